"""Command-line entry points: solve, probe, gauge, norms, report.

Exit codes: 0 success, 2 solver divergence, 3 configuration/input error,
4 probe FAIL verdict.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import estimates as es
from . import evolution as ev
from . import gauge as ga
from . import norms as nm
from . import reporting as rp
from .config import ConfigError, RunConfig, load_config, zk_from_probe
from .grid import SpatialField, SphereField, ifft_space, load_field, save_field
from .partition import build_direction_set

EXIT_OK = 0
EXIT_DIVERGED = 2
EXIT_CONFIG = 3
EXIT_PROBE_FAIL = 4


def _random_data(cfg: RunConfig, seed: int) -> SpatialField:
    """Random initial data on the configured shells, normalized to eps in the critical norm."""
    g = cfg.grid
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    r = g.xi_radii()
    mask = np.zeros(g.space_shape, dtype=bool)
    for k in cfg.solver.shells:
        mask |= (r >= 0.625 * 2.0**k) & (r <= 1.6 * 2.0**k)
    data = np.zeros(g.space_shape, dtype=complex)
    n = int(mask.sum())
    if n == 0:
        raise ConfigError("configured shells are empty on this grid")
    data[mask] = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    phat = SpatialField(g, data, "freq")
    total = nm.besov_norm(phat, g.d / 2.0).total
    phat.data *= cfg.solver.eps / total
    return ifft_space(phat)


def cmd_solve(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    phi = _random_data(cfg, args.seed)
    solver_cfg = ev.SolverConfig(
        eps=cfg.solver.eps,
        max_iters=cfg.solver.max_iters,
        tol=cfg.solver.tol,
        dealias=cfg.solver.dealias,
        track_fnorm=cfg.solver.track_fnorm,
    )
    outputs = []
    try:
        u, trace = ev.picard_solve(phi, solver_cfg)
    except ev.DivergenceError as e:
        trace_path = os.path.join(args.out, "trace.csv")
        rp.write_text(trace_path, rp.trace_to_csv(e.trace))
        outputs.append(trace_path)
        rp.write_manifest(args.out, "solve", cfg.to_dict(), cfg.grid.to_dict(), args.seed,
                          outputs, time.perf_counter() - t0)
        print(f"solver diverged: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except ga.RangeViolationError as e:
        print(f"solver range violation: {e}", file=sys.stderr)
        return EXIT_DIVERGED

    trace_path = os.path.join(args.out, "trace.csv")
    rp.write_text(trace_path, rp.trace_to_csv(trace))
    outputs.append(trace_path)
    field_path = os.path.join(args.out, "solution.fld")
    save_field(field_path, u)
    outputs.append(field_path)
    data_path = os.path.join(args.out, "data.fld")
    save_field(data_path, phi)
    outputs.append(data_path)
    result = {
        "converged": trace.converged,
        "n_iters": trace.n_iters,
        "residual_integral_eq": trace.residual,
        "data_norm_critical": trace.data_norm,
    }
    if cfg.solver.crosscheck:
        tstar = cfg.solver.crosscheck_time
        ss = ev.splitstep_solve(phi, tstar, cfg.solver.splitstep_steps)
        idx = int(np.argmin(np.abs(cfg.grid.t_axis() - tstar)))
        num = np.sqrt(np.sum(np.abs(u.data[..., idx] - ss.data) ** 2))
        den = np.sqrt(np.sum(np.abs(ss.data) ** 2))
        result["splitstep_rel_l2"] = float(num / den) if den > 0 else 0.0
    summary_path = os.path.join(args.out, "solve_summary.json")
    rp.write_text(summary_path, rp.summary_to_json(result))
    outputs.append(summary_path)
    rp.write_manifest(args.out, "solve", cfg.to_dict(), cfg.grid.to_dict(), args.seed,
                      outputs, time.perf_counter() - t0)
    print(json.dumps(result, sort_keys=True, default=str))
    return EXIT_OK


def cmd_probe(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    eid = args.estimate_id.upper()
    if eid not in es.registry():
        print(f"unknown estimate id {eid!r}; known: {', '.join(es.estimate_ids())}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    res = es.run_probe(eid, seed=args.seed, trials=cfg.probe.trials, max_params=cfg.probe.max_params)
    outputs = []
    csv_path = os.path.join(args.out, f"{eid.lower()}_rows.csv")
    rp.write_text(csv_path, rp.probe_rows_to_csv(res.rows))
    outputs.append(csv_path)
    json_path = os.path.join(args.out, f"{eid.lower()}_summary.json")
    rp.write_text(json_path, rp.summary_to_json(res.summary))
    outputs.append(json_path)
    rp.write_manifest(args.out, f"probe {eid}", cfg.to_dict(),
                      es.registry()[eid].spec.grid.to_dict(), args.seed, outputs,
                      time.perf_counter() - t0)
    s = res.summary
    print(f"{eid}: verdict={s['verdict']} trials={s['n_trials']} skipped={s['n_skipped']}")
    if s.get("max_ratio") is not None:
        print(f"  max ratio      {s['max_ratio']:.6g}  at {s.get('argmax_params', {})}")
    for axis, slope in s.get("slopes", {}).items():
        print(f"  slope[{axis}]     {slope:+.4f}  (threshold {es.SLOPE_THRESHOLD})")
    if "max_cs_ratio" in s:
        print(f"  max CS ratio   {s['max_cs_ratio']:.6g}")
    return EXIT_OK if s["verdict"] == "PASS" else EXIT_PROBE_FAIL


def cmd_gauge(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    g = cfg.grid
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    # random small map near the north pole
    amp = 0.1
    w = rng.standard_normal(g.space_shape + (2,)) * amp
    s3 = np.sqrt(np.maximum(0.0, 1.0 - w[..., 0] ** 2 - w[..., 1] ** 2))
    smap = SphereField(g, np.stack([w[..., 0], w[..., 1], s3], axis=-1))
    zfield = ga.stereo_project(smap)
    back = ga.stereo_lift(zfield)
    report = {
        "unit_defect": ga.stereo_lift(zfield).max_norm_defect(),
        "roundtrip_sup": float(np.max(np.abs(back.data - smap.data))),
        "project_sup": float(np.max(np.abs(zfield.data))),
    }
    zsmall = SpatialField(g, zfield.data * 0.5, "phys")
    again = ga.stereo_project(ga.stereo_lift(zsmall))
    report["roundtrip_complex_sup"] = float(np.max(np.abs(again.data - zsmall.data)))
    print(json.dumps(report, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "gauge_report.json")
        rp.write_text(path, rp.summary_to_json(report))
        rp.write_manifest(args.out, "gauge", cfg.to_dict(), g.to_dict(), args.seed,
                          [path], 0.0)
    return EXIT_OK


def cmd_norms(args) -> int:
    try:
        field = load_field(args.field)
    except (OSError, ValueError) as e:
        print(f"cannot load field: {e}", file=sys.stderr)
        return EXIT_CONFIG
    norm_id = args.norm_id.lower()
    try:
        if norm_id == "besov":
            res = nm.besov_norm(field, args.sigma)
            payload = {
                "norm_id": "besov",
                "params": {"sigma": args.sigma},
                "value": res.total,
                "per_component_breakdown": {str(k): v for k, v in sorted(res.per_shell.items())},
                "leakage": res.leakage,
            }
        elif norm_id == "xk":
            pieces = nm.xk_piece_norms(field, args.k)
            payload = {
                "norm_id": "xk",
                "params": {"k": args.k},
                "value": float(sum(pieces.values())),
                "per_component_breakdown": {str(j): v for j, v in sorted(pieces.items())},
            }
        elif norm_id == "fsigma":
            payload = {
                "norm_id": "fsigma",
                "params": {"sigma": args.sigma},
                "value": nm.fsigma_norm(field, args.sigma),
            }
        elif norm_id == "nsigma":
            payload = {
                "norm_id": "nsigma",
                "params": {"sigma": args.sigma},
                "value": nm.nsigma_norm(field, args.sigma),
            }
        else:
            print(f"unknown norm id {args.norm_id!r} (besov, xk, fsigma, nsigma)", file=sys.stderr)
            return EXIT_CONFIG
    except (ValueError, nm.SupportError) as e:
        print(f"norm evaluation failed: {e}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(payload, sort_keys=True))
    return EXIT_OK


def cmd_report(args) -> int:
    runs = rp.report_runs(args.base)
    if not runs:
        print(f"no runs under {args.base}")
        return EXIT_OK
    for r in runs:
        if "error" in r:
            print(f"{r['run']}: INVALID MANIFEST ({r['error']})")
            continue
        print(f"{r['run']}: {r['command']} seed={r['seed']} outputs={len(r['outputs'])} "
              f"wall={r['wall_time_s']:.1f}s")
    return EXIT_OK


def cmd_directions(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    ds = build_direction_set(cfg.grid.d, cfg.directions.delta, cfg.directions.max_height,
                             cfg.directions.n_check)
    print(ds.to_json())
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="schrodmap",
        description="Spectral laboratory for small-data Schrodinger maps",
    )
    parser.add_argument("--version", action="store_true", help="print version and exit")
    sub = parser.add_subparsers(dest="command")

    p_solve = sub.add_parser("solve", help="run the fixed-point solver on random small data")
    p_solve.add_argument("--config", default=None)
    p_solve.add_argument("--seed", type=int, default=0)
    p_solve.add_argument("--out", default="runs/solve")
    p_solve.set_defaults(func=cmd_solve)

    p_probe = sub.add_parser("probe", help="run one estimate probe sweep")
    p_probe.add_argument("estimate_id")
    p_probe.add_argument("--config", default=None)
    p_probe.add_argument("--seed", type=int, default=0)
    p_probe.add_argument("--out", default="runs/probe")
    p_probe.set_defaults(func=cmd_probe)

    p_gauge = sub.add_parser("gauge", help="gauge roundtrip and residual report")
    p_gauge.add_argument("--config", default=None)
    p_gauge.add_argument("--seed", type=int, default=0)
    p_gauge.add_argument("--out", default=None)
    p_gauge.set_defaults(func=cmd_gauge)

    p_norms = sub.add_parser("norms", help="evaluate a norm on a saved field")
    p_norms.add_argument("field")
    p_norms.add_argument("norm_id")
    p_norms.add_argument("--sigma", type=float, default=1.5)
    p_norms.add_argument("--k", type=int, default=1)
    p_norms.set_defaults(func=cmd_norms)

    p_rep = sub.add_parser("report", help="summarize run manifests under a directory")
    p_rep.add_argument("base")
    p_rep.set_defaults(func=cmd_report)

    p_dir = sub.add_parser("directions", help="build and print the rational direction set")
    p_dir.add_argument("--config", default=None)
    p_dir.set_defaults(func=cmd_directions)

    args = parser.parse_args(argv)
    if args.version:
        from . import __version__

        print(__version__)
        return EXIT_OK
    if not getattr(args, "command", None):
        parser.print_help()
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
