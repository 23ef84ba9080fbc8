"""Command-line front end: simulate, verify, w1, converge.

Inputs and outputs are plain files: scenario JSON, trajectory CSV, event
JSON-lines, atom-list CSV, recipe JSON and JSON verification reports.

Exit codes: 0 success, 2 malformed input, 3 tolerance conflict inside
the engine, 4 at least one verification check failed.

Reports are deterministic: identical inputs (including --seed) produce
byte-identical bytes.  Timing information goes to stderr only.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .core import (
    AtomicMeasure,
    DegenerateInput,
    DimensionError,
    EngineTolerances,
    Scenario,
    ToleranceConflict,
)
from .engine import MergeForest, SimulationResult, _EventBuilder, simulate, simulate_1d_fast
from .continuum import ContinuumRecipe, converge_study
from .eulerian import (
    averaging_residuals,
    check_convex_monotone,
    check_entropy_1d,
    convex_family,
    qspp_grid_violation,
    random_test_functions,
    time_grid,
    weak_residuals,
)
from .transport import curve_variation, pushforward_curve, w1
from .variation import mass_avg_variation, variation_bound, velocity_spread

SCHEMA_VERSION = 1
EXIT_OK = 0
EXIT_MALFORMED = 2
EXIT_TOLERANCE = 3
EXIT_CHECK_FAILED = 4

CHECK_NAMES = ("variation", "averaging", "convex", "weak", "entropy", "qspp", "transport")
LINE_ONLY = {"entropy", "qspp", "transport"}


# ---------------------------------------------------------------------------
# input plumbing


def _fail(msg: str) -> int:
    print(f"error: {msg}", file=sys.stderr)
    return EXIT_MALFORMED


def random_scenario(n: int, d: int, seed: int, horizon: float,
                    tolerances=None) -> Scenario:
    """Deterministic random scenario; in d >= 2 velocities are aimed in
    small groups at shared meeting points so collisions actually occur."""
    rng = np.random.default_rng(seed)
    m = rng.uniform(0.5, 1.5, n)
    m = m / m.sum()
    if d == 1:
        x = np.sort(rng.uniform(0.0, 2.0, n))[:, None]
        v = rng.uniform(-1.0, 1.0, (n, 1))
    else:
        x = rng.uniform(-1.0, 1.0, (n, d))
        v = np.empty((n, d))
        i = 0
        while i < n:
            k = min(int(rng.integers(2, 5)), n - i)
            target = rng.uniform(-1.0, 1.0, d)
            t_hit = rng.uniform(0.5, 0.9 * horizon)
            v[i : i + k] = (target - x[i : i + k]) / t_hit
            i += k
    return Scenario.from_arrays(m, x, v, horizon=horizon, tolerances=tolerances)


def _tolerances_from_args(args, base=None) -> EngineTolerances | None:
    if args.tol_tgroup is None and args.tol_xhit is None:
        return base
    if base is None:
        base = EngineTolerances()
    return EngineTolerances(
        t_group=base.t_group if args.tol_tgroup is None else args.tol_tgroup,
        x_hit=base.x_hit if args.tol_xhit is None else args.tol_xhit,
        residual_quad=base.residual_quad,
    )


def _load_scenario_from_file(path: str, args) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    sc = Scenario.from_dict(data)
    tol = _tolerances_from_args(args, base=sc.tolerances)
    if args.horizon is not None or tol is not sc.tolerances:
        sc = Scenario.from_arrays(
            sc.masses, sc.positions, sc.velocities,
            horizon=sc.horizon if args.horizon is None else args.horizon,
            tolerances=tol,
        )
    return sc


def _obtain_scenario(args) -> Scenario:
    if args.random is not None:
        n, d = args.random
        return random_scenario(
            int(n), int(d), args.seed,
            horizon=2.0 if args.horizon is None else args.horizon,
            tolerances=_tolerances_from_args(args),
        )
    if args.scenario is None:
        raise ValueError("provide a scenario file or --random N D")
    return _load_scenario_from_file(args.scenario, args)


def scenario_id(sc: Scenario) -> str:
    blob = json.dumps(sc.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _run_engine(sc: Scenario) -> SimulationResult:
    return simulate_1d_fast(sc) if sc.d == 1 else simulate(sc)


# ---------------------------------------------------------------------------
# result directory format


def _write_outputs(out_dir: str, sc: Scenario, result: SimulationResult):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "scenario.json"), "w", encoding="utf-8") as fh:
        json.dump(sc.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    d = sc.d
    with open(os.path.join(out_dir, "trajectories.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["particle_index", "t"]
            + [f"x_{k + 1}" for k in range(d)]
            + [f"v_{k + 1}" for k in range(d)]
        )
        for i in range(result.n):
            traj = result.trajectory(i)
            for k in range(traj.times.shape[0]):
                writer.writerow(
                    [i, repr(float(traj.times[k]))]
                    + [repr(float(val)) for val in traj.positions[k]]
                    + [repr(float(val)) for val in traj.velocities[k]]
                )
    forest = result.forest
    with open(os.path.join(out_dir, "events.jsonl"), "w", encoding="utf-8") as fh:
        for ev in result.events:
            groups = [
                sorted(int(i) for i in forest.members_of(nid)) for nid in ev.new_ids
            ]
            post = [list(map(float, p)) for p in ev.post_velocities]
            fh.write(json.dumps(
                {"t": ev.time, "groups": groups, "post_v": post}, sort_keys=True
            ))
            fh.write("\n")


def _result_from_dir(path: str, args):
    """Rebuild a result from scenario.json + events.jsonl in a directory.

    The merge forest is reconstructed event by event: group members name
    their current clusters, the merged state takes the file's post_v and
    the mass-weighted meet position.  Checks then run on the rebuilt
    flow, so a corrupted event log surfaces as check failures.
    """
    sc = _load_scenario_from_file(os.path.join(path, "scenario.json"), args)
    n, d = sc.n, sc.d
    born = [0.0] * n
    pos0 = [sc.positions[i].copy() for i in range(n)]
    vel = [sc.velocities[i].copy() for i in range(n)]
    mass = list(map(float, sc.masses))
    parent = [-1] * n
    child_off = [0] * (n + 1)
    children: list[int] = []
    cur = list(range(n))
    builder = _EventBuilder(d)
    with open(os.path.join(path, "events.jsonl"), "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            ev = json.loads(line)
            t = float(ev["t"])
            for members, post in zip(ev["groups"], ev["post_v"]):
                cids = sorted({cur[i] for i in members})
                if len(cids) < 2:
                    raise ValueError("event group does not merge two clusters")
                mtot = math.fsum(mass[c] for c in cids)
                meet = np.zeros(d)
                pre_flat = []
                for c in cids:
                    meet += (mass[c] / mtot) * (pos0[c] + (t - born[c]) * vel[c])
                    pre_flat.extend(map(float, vel[c]))
                nid = len(born)
                born.append(t)
                pos0.append(meet)
                vel.append(np.asarray(post, dtype=np.float64))
                mass.append(mtot)
                parent.append(-1)
                for c in cids:
                    parent[c] = nid
                children.extend(cids)
                child_off.append(len(children))
                for i in members:
                    cur[i] = nid
                builder.add_group(nid, cids, map(float, meet), map(float, post), pre_flat)
            builder.end_event(t)
    forest = MergeForest(
        n, d,
        born=np.asarray(born), pos0=np.asarray(pos0).reshape(len(born), d),
        vel=np.asarray(vel).reshape(len(born), d), mass=np.asarray(mass),
        parent=np.asarray(parent, dtype=np.int64),
        child_off=np.asarray(child_off, dtype=np.int64),
        children=np.asarray(children, dtype=np.int64),
        members=None,
    )
    return sc, SimulationResult(sc, forest, builder.build(), engine="rebuilt")


# ---------------------------------------------------------------------------
# verification checks


def _check_seed(sc: Scenario) -> int:
    return int.from_bytes(bytes.fromhex(scenario_id(sc)[:8]), "big")


def _straddling_pairs(result, count: int, seed: int):
    rng = np.random.default_rng(seed)
    h = result.scenario.horizon
    pairs = [(0.0, h)]
    for ev in result.events.times[: max(1, count // 4)]:
        s = max(0.0, float(ev) - 1e-7)
        pairs.append((s, min(h, float(ev) + 1e-7)))
    while len(pairs) < count:
        s, t = np.sort(rng.uniform(0.0, h, 2))
        pairs.append((float(s), float(t)))
    return pairs[:count]


def _run_checks(sc: Scenario, result: SimulationResult, names):
    seed = _check_seed(sc)
    tol_weak = sc.tolerances.residual_quad

    def variation():
        worst = mass_avg_variation(result) - variation_bound(sc)
        return worst, 1e-9

    def averaging():
        return averaging_residuals(result, _straddling_pairs(result, 20, seed)), 1e-9

    def convex():
        grid = time_grid(result)
        worst = max(
            check_convex_monotone(result, F, grid) for _, F in convex_family(sc.d)
        )
        return worst, 1e-9

    def weak():
        tests = random_test_functions(result, 20, seed=seed)
        tests += random_test_functions(result, 20, seed=seed + 1, vector=True)
        mass_r, mom_r = weak_residuals(result, tests)
        return max(mass_r, mom_r), tol_weak

    def entropy():
        grid = time_grid(result)
        return check_entropy_1d(result, grid[grid > 0]), 1e-9

    def qspp():
        grid = time_grid(result)
        return qspp_grid_violation(result, grid[grid > 0]), 1e-9

    def transport():
        cv = curve_variation(pushforward_curve(result))
        worst = max(
            cv - mass_avg_variation(result),
            cv - 2.0 * velocity_spread(sc.velocities),
        )
        return worst, 1e-9

    runners = {
        "variation": variation, "averaging": averaging, "convex": convex,
        "weak": weak, "entropy": entropy, "qspp": qspp, "transport": transport,
    }

    selected = []
    records = {}
    for name in names:
        if name in LINE_ONLY and sc.d != 1:
            print(f"warning: check '{name}' requires d=1, skipped", file=sys.stderr)
            records[name] = {"skipped": True, "reason": "requires d=1"}
        else:
            selected.append(name)

    threads = max(1, int(os.environ.get("STICKY_THREADS", "1")))
    if threads > 1 and len(selected) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {name: pool.submit(runners[name]) for name in selected}
        outcomes = {name: fut.result() for name, fut in futures.items()}
    else:
        outcomes = {name: runners[name]() for name in selected}

    for name in selected:
        worst, tol = outcomes[name]
        records[name] = {
            "worst": float(worst),
            "tolerance": tol,
            "pass": bool(worst <= tol),
        }
    return records


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> int:
    try:
        sc = _obtain_scenario(args)
    except (OSError, ValueError, DegenerateInput, json.JSONDecodeError) as exc:
        return _fail(str(exc))
    t0 = time.perf_counter()
    try:
        result = _run_engine(sc)
    except ToleranceConflict as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    wall = time.perf_counter() - t0
    _write_outputs(args.out, sc, result)
    print(
        f"simulated n={sc.n} d={sc.d}: {len(result.events)} events "
        f"in {wall:.3f}s -> {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def cmd_verify(args) -> int:
    names = CHECK_NAMES if args.checks is None else tuple(args.checks.split(","))
    for name in names:
        if name not in CHECK_NAMES:
            return _fail(f"unknown check {name!r}; valid: {', '.join(CHECK_NAMES)}")
    t0 = time.perf_counter()
    try:
        if args.scenario is not None and os.path.isdir(args.scenario):
            sc, result = _result_from_dir(args.scenario, args)
        else:
            sc = _obtain_scenario(args)
            result = None
    except (OSError, ValueError, DegenerateInput, KeyError,
            json.JSONDecodeError) as exc:
        return _fail(str(exc))
    try:
        if result is None:
            result = _run_engine(sc)
        records = _run_checks(sc, result, names)
    except ToleranceConflict as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    wall = time.perf_counter() - t0
    ran = [r for r in records.values() if not r.get("skipped")]
    overall = all(r["pass"] for r in ran)
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario_id": scenario_id(sc),
        "engine": result.engine,
        "n": sc.n,
        "d": sc.d,
        "event_count": len(result.events),
        "checks": records,
        "pass": overall,
    }
    blob = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(blob)
    else:
        sys.stdout.write(blob)
    print(f"verify wall time {wall:.3f}s", file=sys.stderr)
    return EXIT_OK if overall else EXIT_CHECK_FAILED


def _read_atoms_csv(path: str) -> AtomicMeasure:
    weights, points = [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                w, p = float(row[0]), float(row[1])
            except (ValueError, IndexError):
                if not weights:  # header line
                    continue
                raise ValueError(f"malformed atom row {row!r} in {path}")
            weights.append(w)
            points.append(p)
    if not weights:
        raise ValueError(f"no atoms found in {path}")
    return AtomicMeasure(weights, points)


def cmd_w1(args) -> int:
    try:
        mu = _read_atoms_csv(args.mu)
        nu = _read_atoms_csv(args.nu)
        value = w1(mu, nu)
    except (OSError, ValueError, DimensionError) as exc:
        return _fail(str(exc))
    print(repr(value))
    return EXIT_OK


def cmd_converge(args) -> int:
    try:
        with open(args.recipe, "r", encoding="utf-8") as fh:
            recipe = ContinuumRecipe.from_dict(json.load(fh))
        sizes = [int(s) for s in args.sizes.split(",")]
        times = [float(t) for t in args.times.split(",")]
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        return _fail(str(exc))
    t0 = time.perf_counter()
    try:
        report = converge_study(recipe, sizes, times)
    except ToleranceConflict as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except ValueError as exc:
        return _fail(str(exc))
    wall = time.perf_counter() - t0
    os.makedirs(args.out, exist_ok=True)
    payload = {"schema_version": SCHEMA_VERSION, "recipe": recipe.to_dict(),
               **report.to_dict()}
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    with open(os.path.join(args.out, "w1.csv"), "w", encoding="utf-8",
              newline="") as fh:
        writer = csv.writer(fh)
        pair_names = [f"{a}_{b}" for a, b in zip(sizes, sizes[1:])]
        writer.writerow(
            ["time"]
            + [f"w1_rho_{p}" for p in pair_names]
            + [f"w1_push_{p}" for p in pair_names]
        )
        for i, t in enumerate(times):
            writer.writerow(
                [repr(float(t))]
                + [repr(float(v)) for v in report.w1_rho[i]]
                + [repr(float(v)) for v in report.w1_push[i]]
            )
    print(f"converge wall time {wall:.3f}s -> {args.out}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p):
    p.add_argument("--horizon", type=float, default=None,
                   help="simulation horizon override")
    p.add_argument("--tol-tgroup", type=float, default=None,
                   help="event grouping time window override")
    p.add_argument("--tol-xhit", type=float, default=None,
                   help="spatial coincidence tolerance override")
    p.add_argument("--seed", type=int, default=0,
                   help="seed for --random generation")
    p.add_argument("--random", nargs=2, type=int, metavar=("N", "D"),
                   default=None, help="generate a random scenario instead "
                   "of reading a file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stickysim",
        description="Event-driven sticky particle flows: simulation, "
        "verification, transport distances and convergence studies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario, write trajectories and events")
    p.add_argument("scenario", nargs="?", help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    _add_common(p)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("verify", help="run verification checks, write a JSON report")
    p.add_argument("scenario", nargs="?",
                   help="scenario JSON file or a simulate output directory")
    p.add_argument("--checks", default=None,
                   help=f"comma-separated subset of: {', '.join(CHECK_NAMES)}")
    p.add_argument("--out", default=None, help="report path (default stdout)")
    _add_common(p)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("w1", help="exact 1D transport distance between atom lists")
    p.add_argument("mu", help="CSV of weight,point rows")
    p.add_argument("nu", help="CSV of weight,point rows")
    p.set_defaults(fn=cmd_w1)

    p = sub.add_parser("converge", help="quantization convergence study")
    p.add_argument("recipe", help="recipe JSON file")
    p.add_argument("--sizes", required=True, help="comma-separated atom counts")
    p.add_argument("--times", required=True, help="comma-separated evaluation times")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=cmd_converge)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
