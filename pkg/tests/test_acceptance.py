"""Acceptance gate: every criterion at its stated tolerance, one printed
pass/fail line each (run with `pytest -s` to see them inline; the CLI
`kacou validate` prints the same lines)."""

import time

import pytest

from kacou.acceptance import CRITERIA


@pytest.mark.parametrize(
    "index, name, fn",
    [(i, name, fn) for i, (name, fn) in enumerate(CRITERIA, start=1)],
    ids=[f"criterion_{i:02d}" for i in range(1, len(CRITERIA) + 1)],
)
def test_criterion(index, name, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    dt = time.perf_counter() - t0
    line = f"{'PASS' if passed else 'FAIL'} criterion {index:2d} - {name} ({dt:.1f}s): {detail}"
    print(line)
    assert passed, line
