"""Command-line entry point and experiment orchestration.

Subcommands: simulate, transform, metric, peakon, toy, bench.  Configs and
state snapshots are JSON, time series are CSV; identical config and seed
produce bit-identical outputs.  The environment variable CH_THREADS caps
the number of worker threads used for ensemble runs (default 1).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import peakons, toymetric
from .evolution import EvolveConfig, IntegrationError, evolve
from .metric import SearchConfig, j_upper, lipschitz_experiment, write_experiment_csv
from .nonlocal_ops import qp_fast_fields, qp_reference
from .state import (
    DimensionError,
    DomainError,
    LagrangianState,
    Tolerances,
    random_state,
)
from .transforms import EulerianState, to_eulerian, to_lagrangian

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path, header, rows) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, float) else str(v)
                             for v in row) + "\n")


def thread_map(fn, items):
    """Map preserving order; parallel when CH_THREADS > 1."""
    workers = int(os.environ.get("CH_THREADS", "1") or "1")
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _tolerances(block: dict) -> Tolerances:
    base = Tolerances()
    kw = {k: float(block[k]) for k in ("compat", "quad", "f0", "clamp", "energy")
          if k in block}
    return Tolerances(**{**base.__dict__, **kw})


def _initial_state(cfg: dict, n: int) -> LagrangianState:
    init = cfg.get("initial", {})
    kind = init.get("type", "peakons")
    if kind == "peakons":
        p = np.asarray(init.get("p", [1.0, -1.0]), dtype=float)
        q = np.asarray(init.get("q", [0.35, 0.65]), dtype=float)
        state = peakons.PeakonState(p=p, q=q)
        m = int(init.get("m", max(n, 1024)))
        return to_lagrangian(peakons.sample_u(state, m), n)
    if kind == "state_file":
        return LagrangianState.load(init["path"])
    if kind == "eulerian_file":
        return to_lagrangian(EulerianState.load(init["path"]), n)
    if kind == "random":
        return random_state(n, seed=int(cfg.get("seed", 0)),
                            energy=float(init.get("energy", 0.5)))
    raise DomainError(f"unknown initial type {kind!r}")


def _cmd_simulate(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    n = int(cfg.get("n", 1024))
    out_dir = Path(cfg.get("out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)

    x0 = _initial_state(cfg, n)
    run = EvolveConfig(
        dt=float(cfg.get("dt", 1e-3)),
        t_end=float(cfg.get("t_end", 1.0)),
        snapshot_every=int(cfg.get("snapshot_every", 10)),
        tol=_tolerances(cfg.get("tolerances", {})),
        conserve_energy=bool(cfg.get("conserve_energy", True)),
    )
    try:
        traj = evolve(x0, run)
    except IntegrationError as err:
        if err.snapshot is not None:
            err.snapshot.save(out_dir / "snap_failure.json")
        print(f"integration failed: {err}", file=sys.stderr)
        return EXIT_NUMERICAL

    for i, snap in enumerate(traj.snapshots):
        snap.save(out_dir / f"snap_{i:06d}.json")
    _write_csv(out_dir / "diagnostics.csv",
               ("t", "h", "umax", "min_yxi", "compat_residual"),
               traj.diagnostics)
    print(f"wrote {len(traj.snapshots)} snapshots to {out_dir}")
    return EXIT_OK


def _cmd_transform(args) -> int:
    if args.to_lagrangian:
        e = EulerianState.load(args.infile)
        x = to_lagrangian(e, args.n)
        x.save(args.out)
    else:
        x = LagrangianState.load(args.infile)
        e = to_eulerian(x, args.m)
        e.save(args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_metric(args) -> int:
    a = LagrangianState.load(args.a)
    b = LagrangianState.load(args.b)
    search = SearchConfig(knots=args.knots)
    rep = j_upper(a, b, search)
    payload = {
        "j_upper": rep.j_upper,
        "linf_diag": rep.linf_diag,
        "candidates_tried": rep.candidates_tried,
        "f_witness": rep.f_witness.fpart.tolist(),
        "g_witness": rep.g_witness.fpart.tolist(),
    }
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh)
    print(f"j_upper = {rep.j_upper!r} (candidates tried: {rep.candidates_tried})")
    return EXIT_OK


def _cmd_metric_experiment(args) -> int:
    with open(args.config) as fh:
        cfg = json.load(fh)
    n = int(cfg.get("n", 512))
    seed = int(cfg.get("seed", 0))
    npairs = int(cfg.get("pairs", 4))
    times = [float(t) for t in cfg.get("times", [0.5, 1.0])]
    amp = float(cfg.get("amplitude", 1.0))
    rel = float(cfg.get("perturbation", 0.01))
    rng = np.random.default_rng(seed)

    def make_pair(i):
        da = 0.12 + 0.06 * rng.random()
        a_state = to_lagrangian(peakons.sample_u(
            peakons.antisymmetric_pair(amp, da), n), n)
        b_state = to_lagrangian(peakons.sample_u(
            peakons.antisymmetric_pair(amp * (1.0 + rel), da), n), n)
        return a_state, b_state

    pairs = [make_pair(i) for i in range(npairs)]
    run = EvolveConfig(dt=float(cfg.get("dt", 1e-3)), t_end=max(times),
                       snapshot_every=1,
                       tol=_tolerances(cfg.get("tolerances", {"clamp": 1e-4, "energy": 1e-2})))
    search_cfg = cfg.get("search", {})
    search = SearchConfig(**{k: search_cfg[k] for k in
                             ("knots", "coarse_shifts", "max_sweeps") if k in search_cfg})
    rows = lipschitz_experiment(pairs, times, run, search)
    write_experiment_csv(rows, args.out)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return EXIT_OK


def _cmd_peakon(args) -> int:
    p = np.array([float(v) for v in args.p.split(",")])
    q = np.array([float(v) for v in args.q.split(",")])
    s0 = peakons.PeakonState(p=p, q=q)
    traj = peakons.evolve_peakons(s0, args.dt, args.t_end)
    k = len(p)
    header = ["t"] + [f"q{i+1}" for i in range(k)] + [f"p{i+1}" for i in range(k)] + ["H"]
    rows = []
    for t, st in zip(traj.times, traj.states):
        rows.append([float(t), *st.q.tolist(), *st.p.tolist(), peakons.hamiltonian(st)])
    _write_csv(args.out, header, rows)
    if traj.halted:
        print(f"stopped near collision at t = {traj.halt_time!r}")
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_toy(args) -> int:
    if args.action != "demo":
        raise DomainError(f"unknown toy action {args.action!r}")
    print(toymetric.demo_table())
    return EXIT_OK


def _cmd_bench(args) -> int:
    fields = bench_fields(args.n)
    qp_fast_fields(*fields)  # warm up
    best = min(_timed(qp_fast_fields, *fields) for _ in range(args.repeats))
    print(f"qp_fast: n={args.n}  best of {args.repeats}: {best * 1e3:.2f} ms")
    if args.reference:
        x = random_state(1 << max(6, args.n.bit_length() - 1) if args.n & (args.n - 1)
                         else args.n, seed=7)
        bref = min(_timed(qp_reference, x) for _ in range(3))
        print(f"qp_reference: n={x.n}  best of 3: {bref * 1e3:.2f} ms")
    return EXIT_OK


def bench_fields(n: int, seed: int = 7):
    """Smooth synthetic field arrays of arbitrary length for kernel timing."""
    rng = np.random.default_rng(seed)
    xi = np.arange(n) / n
    u = 0.3 * np.cos(2 * np.pi * xi + rng.random())
    yxi = 1.0 + 0.5 * np.sin(2 * np.pi * xi)
    uxi = -0.3 * 2 * np.pi * np.sin(2 * np.pi * xi + rng.random())
    nu = (yxi**2 * u**2 + uxi**2) / yxi
    return np.zeros(n), u, yxi, nu


def _timed(fn, *a):
    t0 = time.perf_counter()
    fn(*a)
    return time.perf_counter() - t0


def build_parser() -> _Parser:
    parser = _Parser(prog="chflow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="evolve Lagrangian initial data from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=_cmd_simulate)

    p = sub.add_parser("transform", help="convert between Eulerian and Lagrangian snapshots")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--to-lagrangian", action="store_true")
    g.add_argument("--to-eulerian", action="store_true")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--m", type=int, default=1024)
    p.set_defaults(fn=_cmd_transform)

    p = sub.add_parser("metric", help="certified upper bound for the distance between two states")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--knots", type=int, default=8)
    p.add_argument("--out", default=None)
    p.set_defaults(fn=_cmd_metric)

    p = sub.add_parser("metric-experiment", help="Lipschitz stability ratios over an ensemble")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_metric_experiment)

    p = sub.add_parser("peakon", help="integrate the multipeakon Hamiltonian system")
    p.add_argument("--p", required=True, help="comma-separated amplitudes")
    p.add_argument("--q", required=True, help="comma-separated positions in [0,1)")
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--t-end", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_peakon)

    p = sub.add_parser("toy", help="scalar-ODE metric demonstration")
    p.add_argument("action", choices=["demo"])
    p.set_defaults(fn=_cmd_toy)

    p = sub.add_parser("bench", help="time the fast nonlocal evaluation")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--reference", action="store_true")
    p.set_defaults(fn=_cmd_bench)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except (DomainError, DimensionError, FileNotFoundError, KeyError,
            json.JSONDecodeError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except IntegrationError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
