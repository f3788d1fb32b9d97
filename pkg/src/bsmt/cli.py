"""Command-line front end for the slab mixture solvers.

Two subcommands.  solve runs a single problem with either driver and emits
per-iteration history, converged flux profiles, and a one-line summary.
bench runs the whole 12-test catalog at one and two transport cycles per
outer iteration and writes the spectral-radius matrix, with per-run
iteration counts and wall times in a separate file so the matrix bytes stay
reproducible run to run.
"""

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .multilevel import IterationOptions, run_multilevel
from .problem import MaterialSpec, ProblemSpec, TestId, build_test
from .quadrature import NEGATIVE, POSITIVE
from .source_iteration import run_source_iteration

CATALOG = [t.name for t in TestId]
EMIT_CHOICES = ("history", "flux", "summary")

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_BAD_INPUT = 3
EXIT_NUMERICAL = 4


def _fmt(x):
    """17 significant digits: round-trip exact for 64-bit floats."""
    return f"{float(x):.17g}"


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags by default, which collides with the
    # not-converged status; remap every usage problem to the input code
    def error(self, message):
        self.exit(EXIT_BAD_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="bsmt", description="slab transport in a binary stochastic mixture")
    sub = parser.add_subparsers(dest="command", required=True)

    so = sub.add_parser("solve", help="run one problem and emit CSV output")
    pick = so.add_mutually_exclusive_group(required=True)
    pick.add_argument("--test", choices=CATALOG, help="catalog problem id")
    pick.add_argument("--problem-file", help="JSON problem description")
    so.add_argument(
        "--algorithm", choices=("multilevel", "si"), default="multilevel"
    )
    so.add_argument("--nmax", type=int, default=1, help="transport cycles per outer iteration")
    so.add_argument("--epsilon", type=float, default=1e-10)
    so.add_argument("--max-iterations", type=int, default=200)
    so.add_argument("--cells", type=int, default=100)
    so.add_argument("--quad-order", type=int, default=2, help="directions per half range")
    so.add_argument("--out", default=None, help="output directory (default $BSM_OUT_DIR or .)")
    so.add_argument(
        "--emit",
        default="history,flux,summary",
        help="comma-separated subset of history,flux,summary",
    )

    be = sub.add_parser("bench", help="full catalog spectral-radius matrix")
    be.add_argument("--out", default=None)
    be.add_argument("--workers", type=int, default=4)
    be.add_argument("--epsilon", type=float, default=1e-10)
    be.add_argument("--max-iterations", type=int, default=200)
    return parser


def _resolve_out(flag_value):
    out = flag_value or os.environ.get("BSM_OUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _parse_emit(text):
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in tokens if t not in EMIT_CHOICES]
    if bad or not tokens:
        raise ValueError(f"emit must be a subset of {','.join(EMIT_CHOICES)}")
    return set(tokens)


_MATERIAL_KEYS = {"sigma_t", "sigma_s", "chord", "q"}
_PROBLEM_KEYS = {"materials", "width", "name", "inflow"}


def load_problem_file(path, n_cells, n_per_half):
    """Build a ProblemSpec from a JSON file, rejecting anything unknown.

    Required: materials (exactly two objects with sigma_t, sigma_s, chord
    and optional q) and width.  Optional: name, and inflow as a nested
    [material][side][direction] list matching the quadrature size.
    """
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError("problem file must hold a JSON object")
    unknown = set(data) - _PROBLEM_KEYS
    if unknown:
        raise ValueError(f"unknown problem keys: {sorted(unknown)}")
    if "materials" not in data or "width" not in data:
        raise ValueError("problem file needs materials and width")
    raw_mats = data["materials"]
    if not isinstance(raw_mats, list) or len(raw_mats) != 2:
        raise ValueError("materials must be a list of exactly two objects")
    mats = []
    for entry in raw_mats:
        if not isinstance(entry, dict):
            raise ValueError("each material must be an object")
        unknown = set(entry) - _MATERIAL_KEYS
        if unknown:
            raise ValueError(f"unknown material keys: {sorted(unknown)}")
        missing = {"sigma_t", "sigma_s", "chord"} - set(entry)
        if missing:
            raise ValueError(f"material missing keys: {sorted(missing)}")
        vals = {k: entry[k] for k in entry}
        for k, v in vals.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool):
                raise ValueError(f"material key {k} must be a number")
        mats.append(MaterialSpec(**vals))
    width = data["width"]
    if not isinstance(width, (int, float)) or isinstance(width, bool):
        raise ValueError("width must be a number")
    inflow = data.get("inflow")
    if inflow is not None:
        inflow = np.asarray(inflow, dtype=float)
    return ProblemSpec(
        materials=tuple(mats),
        width=float(width),
        n_cells=n_cells,
        n_per_half=n_per_half,
        inflow=inflow,
        name=str(data.get("name", os.path.basename(path))),
    )


def _problem_from_args(args):
    if args.nmax < 1:
        raise ValueError("nmax must be at least 1")
    if not args.epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    if args.max_iterations < 2:
        raise ValueError("max-iterations must be at least 2")
    if args.test is not None:
        prob = build_test(
            TestId[args.test], n_cells=args.cells, n_per_half=args.quad_order
        )
        return prob, args.test
    prob = load_problem_file(args.problem_file, args.cells, args.quad_order)
    return prob, prob.name


def write_history_csv(path, history):
    ratios = history.ratios()
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(
            ["s", "delta_phi_inf", "delta_phi_mat1_inf", "delta_phi_mat2_inf", "rho_s"]
        )
        for i in range(history.iterations):
            d1, d2 = history.material_deltas[i]
            w.writerow(
                [i + 1, _fmt(history.deltas[i]), _fmt(d1), _fmt(d2), _fmt(ratios[i])]
            )


def write_flux_csv(path, prob, res):
    phi_m1 = res.material_phi[0, POSITIVE] + res.material_phi[0, NEGATIVE]
    phi_m2 = res.material_phi[1, POSITIVE] + res.material_phi[1, NEGATIVE]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["x_center", "phi_ens", "phi_mat1", "phi_mat2", "J_ens"])
        for i, x in enumerate(prob.cell_centers):
            w.writerow(
                [
                    _fmt(x),
                    _fmt(res.phi[i]),
                    _fmt(phi_m1[i]),
                    _fmt(phi_m2[i]),
                    _fmt(res.current[i]),
                ]
            )


def _summary_line(label, algorithm, nmax, res):
    return (
        f"test={label} algorithm={algorithm} n_max={nmax} "
        f"iterations={res.history.iterations} "
        f"rho_estimate={_fmt(res.history.rho)} "
        f"converged={'true' if res.history.converged else 'false'}"
    )


def cmd_solve(args):
    try:
        emit = _parse_emit(args.emit)
        prob, label = _problem_from_args(args)
    except (ValueError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"bsmt: invalid input: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    options = IterationOptions(
        epsilon=args.epsilon,
        max_iterations=args.max_iterations,
        n_transport_cycles=args.nmax,
    )
    runner = run_multilevel if args.algorithm == "multilevel" else run_source_iteration
    try:
        res = runner(prob, options)
    except np.linalg.LinAlgError as exc:
        print(f"bsmt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not np.all(np.isfinite(res.phi)):
        print("bsmt: numerical failure: non-finite flux", file=sys.stderr)
        return EXIT_NUMERICAL
    out_dir = _resolve_out(args.out)
    if "history" in emit:
        write_history_csv(os.path.join(out_dir, "history.csv"), res.history)
    if "flux" in emit:
        write_flux_csv(os.path.join(out_dir, "flux.csv"), prob, res)
    line = _summary_line(label, args.algorithm, args.nmax, res)
    print(line)
    if "summary" in emit:
        with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as f:
            f.write(line + "\n")
    return EXIT_OK if res.history.converged else EXIT_NOT_CONVERGED


def _bench_one(task):
    name, nmax, epsilon, max_iterations = task
    prob = build_test(TestId[name])
    options = IterationOptions(
        epsilon=epsilon, max_iterations=max_iterations, n_transport_cycles=nmax
    )
    t0 = time.perf_counter()
    try:
        res = run_multilevel(prob, options)
    except np.linalg.LinAlgError:
        return name, nmax, None, time.perf_counter() - t0
    return name, nmax, res, time.perf_counter() - t0


def cmd_bench(args):
    if args.workers < 1:
        print("bsmt: invalid input: workers must be at least 1", file=sys.stderr)
        return EXIT_BAD_INPUT
    out_dir = _resolve_out(args.out)
    tasks = [
        (name, nmax, args.epsilon, args.max_iterations)
        for name in CATALOG
        for nmax in (1, 2)
    ]
    with ThreadPoolExecutor(max_workers=args.workers) as pool:
        rows = list(pool.map(_bench_one, tasks))
    results = {(name, nmax): (res, wall) for name, nmax, res, wall in rows}

    status = EXIT_OK
    for (name, nmax), (res, _) in results.items():
        if res is None or not np.all(np.isfinite(res.phi)):
            print(f"bsmt: numerical failure in {name} n_max={nmax}", file=sys.stderr)
            status = EXIT_NUMERICAL
        elif not res.history.converged:
            print(f"bsmt: {name} n_max={nmax} did not converge", file=sys.stderr)
            if status == EXIT_OK:
                status = EXIT_NOT_CONVERGED

    # the matrix file holds only iteration-determined numbers so repeat
    # invocations produce identical bytes; timings go next to it instead
    with open(os.path.join(out_dir, "bench_rho.csv"), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["n_max"] + CATALOG)
        for nmax in (1, 2):
            row = [nmax]
            for name in CATALOG:
                res, _ = results[(name, nmax)]
                row.append(_fmt(res.history.rho) if res is not None else "nan")
            w.writerow(row)
    with open(os.path.join(out_dir, "bench_runs.csv"), "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["test", "n_max", "iterations", "converged", "wall_seconds"])
        for name in CATALOG:
            for nmax in (1, 2):
                res, wall = results[(name, nmax)]
                if res is None:
                    w.writerow([name, nmax, 0, "false", _fmt(wall)])
                else:
                    w.writerow(
                        [
                            name,
                            nmax,
                            res.history.iterations,
                            "true" if res.history.converged else "false",
                            _fmt(wall),
                        ]
                    )
    print(f"wrote {os.path.join(out_dir, 'bench_rho.csv')} and bench_runs.csv")
    return status


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "solve":
        return cmd_solve(args)
    return cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
