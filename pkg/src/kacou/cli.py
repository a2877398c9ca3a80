"""Command-line front end.

Subcommands: simulate, fpt, invariant, scaling, validate.  Every run reads a
key=value config (overridable with --set section.key=value), writes CSV/JSON
atomically, and emits a JSON manifest tying the outputs to the seed and the
config hash.  Numeric CSV fields use 17-significant-digit formatting so
reruns with identical (config, seed) are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import asdict

import numpy as np

from . import __version__
from .acceptance import run_all
from .config import ConfigError, RunConfig, config_hash, load_config
from .errors import KacOuError
from .first_passage import FptQuery, fpt_integral_oracle, laplace_fpt
from .invariant import (
    invariant_description,
    invariant_exists,
    invariant_mass,
    stationarity_residual,
    support_cutoff,
)
from .model import classify_regime
from .rng import stream
from .scaling import ScaledPair, ScalingKind, ScalingSpec, convergence_check
from .invariant import invariant_density_with_derivative
from .simulate import (
    SimCaps,
    evaluate_x,
    fpt_samples,
    sample_m_path,
    sample_switch_sequence,
)

_REASON_NAMES = {0: "", 1: "horizon", 2: "switch_cap"}


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(field if isinstance(field, str) else _fmt(field) for field in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _manifest(cfg: RunConfig, command: str, outputs: list[str], t0: float, extra=None) -> str:
    body = {
        "command": command,
        "config_hash": config_hash(cfg.raw_text),
        "seed": cfg.seed,
        "regime": classify_regime(cfg.model).tag.value,
        "versions": {
            "kacou": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "wall_clock_s": round(time.perf_counter() - t0, 3),
        "outputs": outputs,
    }
    if extra:
        body.update(extra)
    path = os.path.join(cfg.out_dir, f"{command}_manifest.json")
    _atomic_write(path, json.dumps(body, indent=2, sort_keys=True) + "\n")
    return path


def _cmd_simulate(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    mode = cfg.get("simulate", "mode", default="path", cast=str)
    n_paths = int(cfg.get("simulate", "n_paths", default=1))
    horizon = cfg.get("simulate", "horizon", default=10.0)
    x0 = cfg.get("simulate", "x0", default=0.0)
    state0 = int(cfg.get("simulate", "state0", default=0))
    extra = {"censoring": {"horizon": 0, "switch_cap": 0}}

    if mode == "path":
        with_noise = cfg.get("simulate", "with_noise", default=False, cast=bool)
        n_eval = int(cfg.get("simulate", "eval_points", default=201))
        grid = np.linspace(0.0, horizon, n_eval)
        rows = []
        for path_id in range(n_paths):
            seq = sample_switch_sequence(
                cfg.model.rates, state0, horizon, stream(cfg.seed, "path-switches", path_id)
            )
            times = np.unique(np.concatenate([grid, seq.switch_times]))
            xs = [evaluate_x(seq, x0, float(t), cfg.model) for t in times]
            if with_noise:
                ms = sample_m_path(seq, x0, times, cfg.model, stream(cfg.seed, "path-noise", path_id))
                for t, xv, mv in zip(times, xs, ms):
                    rows.append((path_id, t, seq.state_at(float(t)), xv, mv))
            else:
                for t, xv in zip(times, xs):
                    rows.append((path_id, t, seq.state_at(float(t)), xv))
        header = ["path", "t", "state", "x"] + (["m"] if with_noise else [])
        out = os.path.join(cfg.out_dir, "paths.csv")
        _write_csv(out, header, rows)
    else:
        if mode != "fpt":
            raise ConfigError("simulate.mode", f"unknown mode {mode!r}")
        x = cfg.get("simulate", "x")
        y = cfg.get("simulate", "y")
        caps = SimCaps(
            horizon=cfg.get("simulate", "cap_horizon", default=1e3),
            max_switches=int(cfg.get("simulate", "cap_switches", default=10_000_000)),
        )
        batch = fpt_samples(cfg.model, x, y, state0, n_paths, cfg.seed, caps=caps)
        rows = [
            (i, "censored" if c else "hit", t, _REASON_NAMES[int(r)])
            for i, (t, c, r) in enumerate(zip(batch.times, batch.censored, batch.reason))
        ]
        out = os.path.join(cfg.out_dir, "fpt_samples.csv")
        _write_csv(out, ["sample", "outcome", "time", "reason"], rows)
        extra["censoring"] = {
            "horizon": int(np.sum(batch.reason == 1)),
            "switch_cap": int(np.sum(batch.reason == 2)),
        }

    manifest = _manifest(cfg, "simulate", [out], t0, extra)
    print(manifest)
    return 0


def _cmd_fpt(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    qs = cfg.get_list("fpt", "q_grid")
    x = cfg.get("fpt", "x")
    y = cfg.get("fpt", "y")
    state = int(cfg.get("fpt", "state"))
    n_mc = int(cfg.get("fpt", "mc_samples", default=200_000))
    tol = cfg.get("fpt", "oracle_tol", default=1e-6)

    rows = []
    censored = 0
    for i, q in enumerate(qs):
        query = FptQuery(q, x, y, state)
        closed = laplace_fpt(query, cfg.model)
        oracle = fpt_integral_oracle(query, cfg.model, tol)
        batch = fpt_samples(cfg.model, x, y, state, n_mc, seed=cfg.seed + i)
        contrib = np.where(batch.censored, 0.0, np.exp(-q * batch.times))
        censored += int(np.sum(batch.censored))
        rows.append(
            (q, x, y, state, closed, oracle, float(np.mean(contrib)),
             float(np.std(contrib, ddof=1) / math.sqrt(n_mc)))
        )
    out = os.path.join(cfg.out_dir, "fpt.csv")
    _write_csv(
        out,
        ["q", "x", "y", "state", "closed_form", "oracle", "mc_mean", "mc_stderr"],
        rows,
    )
    manifest = _manifest(cfg, "fpt", [out], t0, {"censoring": {"count": censored}})
    print(manifest)
    return 0


def _cmd_invariant(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    exists, support = invariant_exists(cfg.model)
    grid_points = int(cfg.get("invariant", "grid_points", default=401))

    out_csv = os.path.join(cfg.out_dir, "invariant.csv")
    summary = {"exists": exists, "support": None}
    if exists:
        lo, hi = support_cutoff(cfg.model, floor=1e-12)
        margin = 1e-6 * (hi - lo)
        xs = np.linspace(lo + margin, hi - margin, grid_points)
        p0, p1, _, _ = invariant_density_with_derivative(xs, cfg.model)
        _write_csv(out_csv, ["x", "pi0", "pi1"], zip(xs, p0, p1))
        r0, r1 = stationarity_residual(xs, cfg.model)
        desc = invariant_description(cfg.model)
        summary.update(
            {
                "support": [support[0], support[1]],
                "kind": desc.kind,
                "normalizer": list(desc.constants),
                "mass_check": invariant_mass(cfg.model),
                "residual_max": float(max(np.max(np.abs(r0)), np.max(np.abs(r1)))),
            }
        )
    else:
        _write_csv(out_csv, ["x", "pi0", "pi1"], [])
    out_json = os.path.join(cfg.out_dir, "invariant_summary.json")
    _atomic_write(out_json, json.dumps(summary, indent=2, sort_keys=True, default=float) + "\n")
    manifest = _manifest(cfg, "invariant", [out_csv, out_json], t0)
    print(manifest)
    return 0


_SCALING_KINDS = {
    "telegraph": ScalingKind.KAC_ASYMMETRIC,
    "kac_classic": ScalingKind.KAC_CLASSIC,
    "fast_switching": ScalingKind.FAST_SWITCHING,
    "case_a": ScalingKind.CASE_A,
    "case_b": ScalingKind.CASE_B,
    "case_c": ScalingKind.CASE_C,
}


def _cmd_scaling(cfg: RunConfig) -> int:
    t0 = time.perf_counter()
    kind_name = cfg.get("scaling", "kind", cast=str)
    if kind_name not in _SCALING_KINDS:
        raise ConfigError("scaling.kind", f"unknown kind {kind_name!r}")
    kind = _SCALING_KINDS[kind_name]
    nu = cfg.get("scaling", "nu", default=1.0)

    def pair(prefix):
        return ScaledPair(
            cfg.get("scaling", f"sigma0_{prefix}"), cfg.get("scaling", f"delta_{prefix}", default=0.0)
        )

    kwargs = {"kind": kind, "nu": nu}
    if kind in (ScalingKind.KAC_ASYMMETRIC, ScalingKind.KAC_CLASSIC):
        kwargs["velocity"] = ScaledPair(
            cfg.get("scaling", "sigma0"), cfg.get("scaling", "delta", default=0.0)
        )
    else:
        kwargs["base"] = cfg.model
        if kind in (ScalingKind.CASE_A, ScalingKind.CASE_C):
            kwargs["drift"] = pair("a")
        if kind in (ScalingKind.CASE_B, ScalingKind.CASE_C):
            kwargs["reversion"] = pair("g")
    spec = ScalingSpec(**kwargs)

    rows = convergence_check(
        spec,
        cfg.get("scaling", "t", default=1.0),
        [int(v) for v in cfg.get_list("scaling", "n_list", default=[10, 100, 1000])],
        int(cfg.get("scaling", "n_paths", default=100_000)),
        seed=cfg.seed,
        x0=cfg.get("scaling", "x0", default=0.0),
    )
    out = os.path.join(cfg.out_dir, "scaling.csv")
    header = [
        "n",
        "emp_mean",
        "emp_var",
        "limit_mean",
        "limit_var",
        "mean_gap",
        "var_gap",
        "mean_stderr",
        "var_stderr",
        "cdf_dist",
    ]
    table = []
    for r in rows:
        d = asdict(r)
        table.append([d[k] if d[k] is not None else "" for k in header])
    _write_csv(out, header, table)
    manifest = _manifest(cfg, "scaling", [out], t0)
    print(manifest)
    return 0


def _cmd_validate(args) -> int:
    indices = None
    if args.only:
        indices = {int(tok) for tok in args.only.split(",")}
    results = run_all(indices=indices, verbose=True)
    failed = [r for r in results if not r.passed]
    if args.report:
        body = [asdict(r) for r in results]
        _atomic_write(args.report, json.dumps(body, indent=2) + "\n")
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kacou", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("simulate", "fpt", "invariant", "scaling"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to key=value config file")
        p.add_argument(
            "--set",
            action="append",
            dest="overrides",
            default=[],
            metavar="SECTION.KEY=VALUE",
            help="override a config entry",
        )

    v = sub.add_parser("validate", help="run the acceptance cross-check suite")
    v.add_argument("--quick", action="store_true", help="run the core criteria only (default)")
    v.add_argument("--only", help="comma-separated criterion indices")
    v.add_argument("--report", help="write a JSON report to this path")

    args = parser.parse_args(argv)
    if args.command == "validate":
        return _cmd_validate(args)

    try:
        cfg = load_config(args.config, overrides=args.overrides)
        handler = {
            "simulate": _cmd_simulate,
            "fpt": _cmd_fpt,
            "invariant": _cmd_invariant,
            "scaling": _cmd_scaling,
        }[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except KacOuError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
