"""Command line entry point: ``etconsensus {validate,run,generate,batch}``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .analysis import analyze, lyapunov_bound_check
from .digraph import condense, describe, is_strongly_connected
from .engine import Trajectory, disagreement, run
from .errors import NoSpanningTree
from .protocol import validate
from .scenario import Scenario, ScenarioError, generate, load_scenario, save_scenario

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_NOT_CONVERGED = 3


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.states.shape[1]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["t"] + [f"x_{i + 1}" for i in range(n)])
        for t, x in zip(traj.times, traj.states):
            w.writerow([fmt(t)] + [fmt(v) for v in x])


def read_trajectory_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    data = np.array([[float(v) for v in r] for r in rows[1:]])
    return data[:, 0], data[:, 1:]


def write_events_csv(traj: Trajectory, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["agent", "l", "t"])
        for agent, l in traj.events:
            w.writerow([agent + 1, l, fmt(l * traj.h)])


def write_lyapunov_csv(rows, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["l", "t", "V", "bound"])
        for l, t, v, b in rows:
            w.writerow([l, fmt(t), fmt(v), fmt(b)])


def run_command(scenario: Scenario, output_dir, no_validate: bool = False, record_substeps: bool = False,
                max_steps: int | None = None, tol: float | None = None, lyapunov_csv: bool = False) -> int:
    changes = {}
    if max_steps is not None:
        changes["horizon_steps"] = max_steps
    if tol is not None:
        changes["convergence_tol"] = tol
    try:
        if changes:
            scenario = scenario.replace(**changes)
        g, p = scenario.digraph(), scenario.params()
    except (ScenarioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    report = validate(g, p)
    if not report.ok and not no_validate:
        print(report.render())
        return EXIT_INVALID

    traj = run(g, p, scenario.x0, scenario.config(record_substeps), unsafe=True)
    lines = [f"scenario: {scenario.name} (n={scenario.n}, h={scenario.h:g}, tau={scenario.tau:g})", report.render()]
    summary = {
        "name": scenario.name,
        "valid": report.ok,
        "converged_at": traj.converged_at,
        "final_disagreement": disagreement(traj.final),
        "event_counts": traj.event_counts().tolist(),
        "steps": traj.steps,
    }
    lyap_rows = None
    try:
        decomp = condense(g)
    except NoSpanningTree:
        decomp = None
        lines.append("topology has no spanning tree; no consensus value is predicted")
    if decomp is not None:
        lines.append(describe(decomp))
        an = analyze(g, p, scenario.x0, traj)
        lines.append(an.render())
        summary["predicted_c"] = an.predicted_c
        summary["checks"] = {k: v[0] for k, v in an.checks.items()}
        if is_strongly_connected(g):
            bc = lyapunov_bound_check(traj, g, p)
            summary["lyapunov_margin"] = bc.worst_margin
            lyap_rows = bc.rows(p.h, p.tau)
    lines.append(f"converged_at: {traj.converged_at}  final disagreement: {summary['final_disagreement']:.3e}")
    lines.append("events per agent: " + ", ".join(f"{i + 1}:{c}" for i, c in enumerate(summary["event_counts"])))

    try:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trajectory_csv(traj, out / "trajectory.csv")
        write_events_csv(traj, out / "events.csv")
        if lyapunov_csv and lyap_rows is not None:
            write_lyapunov_csv(lyap_rows, out / "lyapunov.csv")
        (out / "summary.txt").write_text("\n".join(lines) + "\n")
        (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    print("\n".join(lines))
    return EXIT_OK if traj.converged_at is not None else EXIT_NOT_CONVERGED


def _batch_one(args):
    path, out, kw = args
    try:
        s = load_scenario(path)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return str(path), EXIT_IO
    except ScenarioError as exc:
        print(f"error: {path}: {exc}", file=sys.stderr)
        return str(path), EXIT_INVALID
    return str(path), run_command(s, Path(out) / s.name, **kw)


def _run_kwargs(ns) -> dict:
    return dict(no_validate=ns.no_validate, record_substeps=ns.record_substeps, max_steps=ns.max_steps,
                tol=ns.tol, lyapunov_csv=ns.lyapunov_csv)


def _load(path):
    try:
        return load_scenario(path), None
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_IO
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return None, EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="etconsensus", description="Event-triggered sampled-data consensus simulator")
    sub = ap.add_subparsers(dest="cmd", required=True)

    v = sub.add_parser("validate", help="check a scenario against the convergence conditions")
    v.add_argument("scenario")

    def run_flags(p):
        p.add_argument("--no-validate", action="store_true", help="run even if the parameter checks fail")
        p.add_argument("--record-substeps", action="store_true", help="emit the t = lh + tau breakpoints")
        p.add_argument("--max-steps", type=int, help="override horizon_steps")
        p.add_argument("--tol", type=float, help="override convergence_tol")
        p.add_argument("--lyapunov-csv", action="store_true", help="write lyapunov.csv (strongly connected only)")

    r = sub.add_parser("run", help="simulate one scenario")
    r.add_argument("scenario")
    r.add_argument("-o", "--output-dir", default="out")
    run_flags(r)

    gen = sub.add_parser("generate", help="write a random scenario")
    gen.add_argument("kind", choices=["strongly-connected", "spanning-tree"])
    gen.add_argument("n", type=int)
    gen.add_argument("seed", type=int)
    gen.add_argument("--delayed", action="store_true", help="pick tau inside the admissible delay range")
    gen.add_argument("-o", "--output", help="file to write (default: stdout)")

    b = sub.add_parser("batch", help="simulate many scenarios, one output directory each")
    b.add_argument("scenarios", nargs="+")
    b.add_argument("-o", "--output-dir", default="out")
    b.add_argument("-j", "--jobs", type=int, default=1)
    run_flags(b)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)

    if ns.cmd == "validate":
        s, code = _load(ns.scenario)
        if s is None:
            return code
        g, p = s.digraph(), s.params()
        report = validate(g, p)
        print(report.render())
        if report.ok:
            print(describe(condense(g)))
        return EXIT_OK if report.ok else EXIT_INVALID

    if ns.cmd == "run":
        s, code = _load(ns.scenario)
        if s is None:
            return code
        return run_command(s, ns.output_dir, **_run_kwargs(ns))

    if ns.cmd == "generate":
        s = generate(ns.kind, ns.n, ns.seed, delayed=ns.delayed)
        if ns.output:
            save_scenario(s, ns.output)
        else:
            print(json.dumps(s.to_dict(), indent=2))
        return EXIT_OK

    if ns.cmd == "batch":
        jobs = [(path, ns.output_dir, _run_kwargs(ns)) for path in ns.scenarios]
        if ns.jobs > 1:
            with ProcessPoolExecutor(max_workers=ns.jobs) as ex:
                results = list(ex.map(_batch_one, jobs))
        else:
            results = [_batch_one(j) for j in jobs]
        for path, code in results:
            print(f"{path}: exit {code}")
        return max(code for _, code in results)
    return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
