"""Command line entry point and run orchestration.

    extrusim simulate <scenario> [--mode characteristic|fv|both] [--out DIR]
                      [--grid N] [--micro-step H] [--cells M] [--dt DT]
    extrusim validate <scenario>
    extrusim compare <runA> <runB>

Output layout of ``simulate`` (per solver subdirectory ``characteristic/``
and/or ``fv/``): ``interface.csv`` with columns t,l,fp1,Fd,dP,
``snapshot_KKK.csv`` with columns x,f_p,M_p,T_p,M_f,T_f and ``times.csv``
mapping snapshot index to time. ``report.json`` sits at the top level.
The output directory defaults to $EXTRUSIM_OUT, then ./extrusim-out.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import CFLError, ExtruderError, ScenarioError
from .interface import solve_global
from .oracle_fv import compare, fv_solve
from .scenario import Scenario, data_deviation, load_scenario
from .transport import FIELDS, FieldSnapshot, SolutionHistory, estimate_norms

log = logging.getLogger("extrusim")

OUT_ENV = "EXTRUSIM_OUT"
DEFAULT_OUT = "extrusim-out"
INTERFACE_COLUMNS = ("t", "l", "fp1", "Fd", "dP")
SNAPSHOT_COLUMNS = ("x",) + FIELDS
MODES = ("characteristic", "fv", "both")


@dataclass
class RunReport:
    scenario: str
    mode: str
    windows: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict)
    comparison: dict | None = None
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures

    @property
    def max_ratio(self) -> float:
        r = [q for w in self.windows for q in w["ratios"]]
        return max(r) if r else 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _fmt(v) -> str:
    return repr(float(v))


def write_history(hist: SolutionHistory, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    il = hist.interface
    with open(outdir / "interface.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(INTERFACE_COLUMNS)
        for row in zip(*(np.asarray(il[c]) for c in INTERFACE_COLUMNS)):
            w.writerow([_fmt(v) for v in row])
    with open(outdir / "times.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("index", "t", "l", "fp1"))
        for k, s in enumerate(hist.snapshots):
            w.writerow([k, _fmt(s.t), _fmt(s.l), _fmt(s.fp1)])
    for k, s in enumerate(hist.snapshots):
        with open(outdir / f"snapshot_{k:03d}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SNAPSHOT_COLUMNS)
            for row in zip(*(np.asarray(getattr(s, c)) for c in SNAPSHOT_COLUMNS)):
                w.writerow([_fmt(v) for v in row])


def _read_csv(path: Path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0]
    data = np.array(rows[1:], dtype=float).reshape(-1, len(cols))
    return {c: data[:, i] for i, c in enumerate(cols)}


def read_history(rundir) -> SolutionHistory:
    """Load a solver output directory (or a run directory with one solver)."""
    d = Path(rundir)
    if not (d / "interface.csv").exists():
        subs = [d / m for m in ("characteristic", "fv") if (d / m / "interface.csv").exists()]
        if not subs:
            raise FileNotFoundError(f"no solver output under {d}")
        d = subs[0]
    il = _read_csv(d / "interface.csv")
    tm = _read_csv(d / "times.csv")
    snaps = []
    for k in range(tm["index"].size):
        s = _read_csv(d / f"snapshot_{k:03d}.csv")
        snaps.append(FieldSnapshot(float(tm["t"][k]), s["x"], *(s[f] for f in FIELDS),
                                   l=float(tm["l"][k]), fp1=float(tm["fp1"][k])))
    return SolutionHistory(snaps, il)


def run(scenario: Scenario, mode: str = "characteristic", out=None, grid: int | None = None,
        micro_step: float | None = None, cells: int = 400, dt: float | None = None) -> RunReport:
    """Solve the scenario, write outputs under ``out`` (if given) and report."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    overrides = {}
    if grid is not None:
        overrides["grid_n"] = grid
    if micro_step is not None:
        overrides["h"] = micro_step
    config = scenario.solver_config(**overrides)
    report = RunReport(scenario.name, mode)
    outdir = Path(out) if out is not None else None
    hists = {}
    if mode in ("characteristic", "both"):
        try:
            sol = solve_global(scenario, config)
            hists["characteristic"] = sol.history
            report.windows = sol.log_records()
            eps = data_deviation(scenario)["total"]
            report.estimates = estimate_norms(sol.history, scenario.equilibrium, eps,
                                              scenario.params, scenario.signals,
                                              scenario.initial, scenario.horizon)
        except ExtruderError as exc:
            report.failures.append(f"characteristic: {type(exc).__name__}: {exc}")
    if mode in ("fv", "both"):
        try:
            hists["fv"] = fv_solve(scenario, cells, dt=dt)
        except (ExtruderError, CFLError) as exc:
            report.failures.append(f"fv: {type(exc).__name__}: {exc}")
    if len(hists) == 2:
        report.comparison = compare(hists["characteristic"], hists["fv"])
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
        scenario.save(outdir / "scenario.scn")
        for name, h in hists.items():
            write_history(h, outdir / name)
        with open(outdir / "report.json", "w") as fh:
            json.dump(report.to_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")
    return report


def _out_dir(arg: str | None) -> Path:
    return Path(arg or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="extrusim", description="Bi-zone extruder simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("simulate", help="solve a scenario and write CSV output")
    sp.add_argument("scenario")
    sp.add_argument("--mode", choices=MODES, default="characteristic")
    sp.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
    sp.add_argument("--grid", type=int, default=None, help="output grid nodes")
    sp.add_argument("--micro-step", type=float, default=None, help="characteristic micro-step h")
    sp.add_argument("--cells", type=int, default=400, help="finite-volume cells per zone")
    sp.add_argument("--dt", type=float, default=None, help="forced finite-volume time step")
    vp = sub.add_parser("validate", help="check a scenario file")
    vp.add_argument("scenario")
    cp = sub.add_parser("compare", help="compare two run directories")
    cp.add_argument("run_a")
    cp.add_argument("run_b")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "compare":
        res = compare(read_history(args.run_a), read_history(args.run_b))
        print(json.dumps(res, indent=1, sort_keys=True))
        return 0
    try:
        sc = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario {args.scenario}:\n{exc}", file=sys.stderr)
        return 2
    except FileNotFoundError:
        print(f"scenario not found: {args.scenario}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(f"{args.scenario}: ok ({sc.name})")
        return 0
    out = _out_dir(args.out)
    rep = run(sc, args.mode, out, args.grid, args.micro_step, args.cells, args.dt)
    for w in rep.windows:
        log.debug("window %d t0=%.6g delta=%.6g iterations=%d", w["window"], w["t0"],
                  w["delta"], w["iterations"])
    print(f"{sc.name}: mode={args.mode} windows={len(rep.windows)} "
          f"max_ratio={rep.max_ratio:.4g} output={out}")
    if rep.comparison:
        print("comparison: " + ", ".join(f"{k}={v:.3g}" for k, v in sorted(rep.comparison.items())))
    for f in rep.failures:
        print(f"FAILED {f}", file=sys.stderr)
    return 0 if rep.ok else 1


if __name__ == "__main__":
    sys.exit(main())
