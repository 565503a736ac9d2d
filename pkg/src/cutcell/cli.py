"""Batch driver: parse, weld, grid, cut and measure a list of STL models.

``run_batch`` processes each model once on its own background grid.
``run_robustness`` adds the perturbation sweep: a baseline cut followed by
one cut per (kind, alpha) with the grid translated or rotated by
``10**-alpha``, reporting the drift of volume and area against the baseline.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from .global_cut import CutError, cut_mesh
from .halfspace import Tolerances
from .measures import error_metrics
from .mesh_io import MeshError, StlParseError, background_grid, export_vtk, perturb, read_stl, weld

PHASES = ("parse", "weld", "grid", "cut", "metrics")
KINDS = ("translate", "rotate")

# acceptance thresholds of the batch experiment
MAX_EPS_V = 1e-11
MAX_EPS_GAMMA = 1e-12


@dataclass
class RunConfig:
    stl: List[str]
    n_max: int = 100
    n_min: int = 10
    scale: float = 1.4
    snap_factor: float = 1e2
    hs_factor: float = 1e3
    perturb: Optional[Tuple[str, ...]] = None  # kinds to sweep; None = plain batch
    alpha_range: Tuple[int, int] = (1, 17)
    report: Optional[str] = None
    csv: Optional[str] = None
    vtk: Optional[str] = None
    workers: int = 1
    exteriors: bool = True
    weld_tol: float = 0.0
    repeats: int = 1  # timings are the minimum over repeats
    max_eps_v: float = MAX_EPS_V
    max_eps_gamma: float = MAX_EPS_GAMMA

    def __post_init__(self):
        if isinstance(self.stl, (str, Path)):
            self.stl = [self.stl]
        self.stl = [str(p) for p in self.stl]
        if self.perturb is not None:
            if isinstance(self.perturb, str):
                self.perturb = (self.perturb,)
            for k in self.perturb:
                if k not in KINDS:
                    raise ValueError(f"unknown perturbation kind {k!r}")
            self.perturb = tuple(self.perturb)
        a, b = self.alpha_range
        if not 1 <= a <= b <= 17:
            raise ValueError("alpha range must satisfy 1 <= A <= B <= 17")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")


@dataclass
class BatchRow:
    model: str
    status: str  # ok, parse-error, non-manifold, cut-error, inaccurate
    n_faces: int = 0
    n_vertices: int = 0
    box: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    kind: str = "none"
    alpha: int = 0
    n_cells: int = 0
    n_cut: int = 0
    V_in: float = float("nan")
    V_out: float = float("nan")
    area: float = float("nan")
    eps_V: float = float("nan")
    eps_Gamma: float = float("nan")
    eps_V0: float = float("nan")
    eps_Gamma0: float = float("nan")
    timings: Dict[str, float] = field(default_factory=dict)
    message: str = ""


@dataclass
class BatchReport:
    rows: List[BatchRow]
    config: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(r.status == "ok" for r in self.rows)

    def as_dict(self) -> dict:
        return {"config": self.config, "ok": self.ok, "rows": [_jsonable(asdict(r)) for r in self.rows]}

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n")

    def to_csv(self, path) -> None:
        cols = [k for k in BatchRow.__dataclass_fields__ if k not in ("timings", "box")]
        header = cols[:4] + ["box_x", "box_y", "box_z"] + cols[4:] + [f"t_{p}" for p in PHASES]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in self.rows:
                d = asdict(r)
                vals = [_fmt(d[c]) for c in cols]
                vals = vals[:4] + [_fmt(x) for x in r.box] + vals[4:]
                w.writerow(vals + [_fmt(r.timings.get(p, float("nan"))) for p in PHASES])

    def metric_tuples(self) -> list:
        """Metric values of every row, without timings (for reproducibility checks)."""
        return [(r.model, r.status, r.kind, r.alpha, r.n_cut, r.V_in, r.V_out, r.area, r.eps_V,
                 r.eps_Gamma, r.eps_V0, r.eps_Gamma0) for r in self.rows]


def _fmt(x) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def _jsonable(d):
    # JSON has no NaN; write null instead
    if isinstance(d, dict):
        return {k: _jsonable(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_jsonable(v) for v in d]
    if isinstance(d, float) and not math.isfinite(d):
        return None
    return d


class _Model:
    """A parsed and welded model, or the row describing why it failed."""

    def __init__(self, path: str, config: RunConfig):
        self.id = Path(path).stem
        self.mesh = None
        self.failure: Optional[BatchRow] = None
        self.timings = {}
        t0 = time.perf_counter()
        try:
            soup = read_stl(path)
        except (StlParseError, OSError) as e:
            self.failure = BatchRow(self.id, "parse-error", message=str(e))
            return
        t1 = time.perf_counter()
        try:
            self.mesh = weld(soup, config.weld_tol)
        except MeshError as e:
            self.failure = BatchRow(self.id, "non-manifold", n_faces=len(soup),
                                    message=f"{e.kind}: {e}")
            return
        self.timings = {"parse": t1 - t0, "weld": time.perf_counter() - t1}
        lo, hi = self.mesh.bbox
        self.box = tuple(float(v) for v in hi - lo)
        self.center = (lo + hi) / 2
        self.tol = Tolerances.from_mesh(self.mesh, config.snap_factor, config.hs_factor)

    def row(self, status="ok", **kw) -> BatchRow:
        return BatchRow(self.id, status, int(len(self.mesh.faces)), int(len(self.mesh.vertices)),
                        self.box, **kw)


def _cut_once(model: _Model, config: RunConfig, kind: str, alpha: int, keep: bool):
    t0 = time.perf_counter()
    lo, hi = model.mesh.bbox
    grid = background_grid(lo, hi, config.n_max, config.n_min, config.scale)
    if kind != "none":
        grid = perturb(grid, kind, alpha, center=model.center)
    t1 = time.perf_counter()
    cm = cut_mesh(grid, model.mesh, model.tol, exteriors=config.exteriors, keep_geometry=keep,
                  workers=config.workers)
    t2 = time.perf_counter()
    rep = error_metrics(cm, model.mesh) if config.exteriors else None
    t3 = time.perf_counter()
    return cm, rep, {"grid": t1 - t0, "cut": t2 - t1, "metrics": t3 - t2}


def _measure(model: _Model, config: RunConfig, kind: str = "none", alpha: int = 0,
             vtk_stem: Optional[str] = None):
    """Cut ``repeats`` times; the row keeps the last result and the minimum timings."""
    best: Dict[str, float] = {}
    for _ in range(config.repeats):
        try:
            cm, rep, t = _cut_once(model, config, kind, alpha, vtk_stem is not None)
        except CutError as e:
            return None, model.row("cut-error", kind=kind, alpha=alpha, message=str(e))
        for k, v in t.items():
            best[k] = min(best.get(k, math.inf), v)
    timings = dict(model.timings)
    timings.update(best)
    row = model.row(kind=kind, alpha=alpha, n_cells=cm.grid.ncells, n_cut=cm.n_cut, V_in=cm.V_in,
                    V_out=cm.V_out, area=cm.area, timings=timings)
    if rep is not None:
        row.eps_V, row.eps_Gamma = rep.eps_V, rep.eps_Gamma
        if not (rep.eps_V <= config.max_eps_v and rep.eps_Gamma <= config.max_eps_gamma):
            row.status = "inaccurate"
    if cm.diagnostics:
        row.message = "; ".join(str(d) for d in cm.diagnostics[:3])
    if vtk_stem is not None:
        export_vtk(cm, config.vtk, vtk_stem)
    return cm, row


def _config_dict(config: RunConfig) -> dict:
    return _jsonable(asdict(config))


def run_batch(config: RunConfig) -> BatchReport:
    """One row per input file; failures are recorded and the batch goes on."""
    if not config.stl:
        raise ValueError("no input files")
    rows = []
    for path in config.stl:
        model = _Model(path, config)
        if model.failure is not None:
            rows.append(model.failure)
            continue
        stem = model.id if config.vtk else None
        _, row = _measure(model, config, vtk_stem=stem)
        rows.append(row)
    return BatchReport(rows, _config_dict(config))


def run_robustness(config: RunConfig) -> BatchReport:
    """Baseline plus one row per perturbation kind and exponent, for each model.

    Perturbed rows carry ``eps_V0 = |V - V0| / V0`` on the interior volume and
    ``eps_Gamma0 = |G - G0| / G0`` on the cut surface area.
    """
    if not config.stl:
        raise ValueError("no input files")
    kinds = config.perturb or KINDS
    a, b = config.alpha_range
    rows = []
    for path in config.stl:
        model = _Model(path, config)
        if model.failure is not None:
            rows.append(model.failure)
            continue
        _, base = _measure(model, config, vtk_stem=f"{model.id}_base" if config.vtk else None)
        rows.append(base)
        if base.status == "cut-error":
            continue
        for kind in kinds:
            for alpha in range(a, b + 1):
                _, row = _measure(model, config, kind, alpha)
                if row.status != "cut-error":
                    row.eps_V0 = abs(row.V_in - base.V_in) / base.V_in
                    row.eps_Gamma0 = abs(row.area - base.area) / base.area
                rows.append(row)
    return BatchReport(rows, _config_dict(config))


def _alpha_range(text: str) -> Tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected A:B with integer bounds")
    return a, b


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cutcell", description=__doc__.splitlines()[0])
    p.add_argument("--stl", nargs="+", required=True, metavar="PATH")
    p.add_argument("--nmax", type=int, default=100)
    p.add_argument("--nmin", type=int, default=10)
    p.add_argument("--scale", type=float, default=1.4)
    p.add_argument("--snap-factor", type=float, default=1e2)
    p.add_argument("--hs-factor", type=float, default=1e3)
    p.add_argument("--perturb", choices=KINDS, action="append",
                   help="run the perturbation sweep for this kind (repeatable)")
    p.add_argument("--alpha-range", type=_alpha_range, default=(1, 17), metavar="A:B")
    p.add_argument("--report", metavar="PATH", help="JSON report")
    p.add_argument("--csv", metavar="PATH", help="CSV mirror of the report")
    p.add_argument("--vtk", metavar="DIR", help="export interior tetrahedra and boundary faces")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--exteriors", choices=("on", "off"), default="on")
    p.add_argument("--weld-tol", type=float, default=0.0)
    p.add_argument("--repeats", type=int, default=1, help="timings are the minimum over repeats")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(stl=args.stl, n_max=args.nmax, n_min=args.nmin, scale=args.scale,
                     snap_factor=args.snap_factor, hs_factor=args.hs_factor,
                     perturb=tuple(args.perturb) if args.perturb else None,
                     alpha_range=args.alpha_range, report=args.report, csv=args.csv,
                     vtk=args.vtk, workers=args.workers, exteriors=args.exteriors == "on",
                     weld_tol=args.weld_tol, repeats=args.repeats)


def _print_rows(rows: Sequence[BatchRow], out) -> None:
    out.write(f"{'model':20s} {'kind':9s} {'a':>2s} {'status':12s} {'faces':>7s} {'cut':>7s} "
              f"{'eps_V':>9s} {'eps_G':>9s} {'eps_V0':>9s} {'eps_G0':>9s} {'t_cut':>8s}\n")
    for r in rows:
        out.write(f"{r.model[:20]:20s} {r.kind:9s} {r.alpha:2d} {r.status:12s} {r.n_faces:7d} "
                  f"{r.n_cut:7d} {r.eps_V:9.2e} {r.eps_Gamma:9.2e} {r.eps_V0:9.2e} "
                  f"{r.eps_Gamma0:9.2e} {r.timings.get('cut', float('nan')):8.3f}\n")
        if r.message and r.status != "ok":
            out.write(f"    {r.message}\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
    except ValueError as e:
        print(f"cutcell: {e}", file=sys.stderr)
        return 2
    report = run_robustness(config) if config.perturb else run_batch(config)
    if config.report:
        report.to_json(config.report)
    if config.csv:
        report.to_csv(config.csv)
    _print_rows(report.rows, sys.stdout)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
