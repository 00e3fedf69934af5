"""Embedding quality: distortion, per-run reports and cross-geometry tables."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .embedder import Embedding, LayoutConfig, OptTrace, sgd_layout, stress
from .graph_io import DistanceMatrix

REPORT_COLUMNS = ("graph", "geometry", "n", "mean_distortion", "sd_distortion",
                  "mean_stress", "runtime_s", "dilation")


def distortion(emb: Embedding, dm: DistanceMatrix) -> float:
    """Mean relative error |delta_ij - d_ij| / d_ij over all pairs i < j."""
    if emb.n != dm.n:
        raise ValueError(f"embedding has {emb.n} points but distance matrix is {dm.n}x{dm.n}")
    if dm.n < 2:
        raise ValueError("distortion needs at least two points")
    iu = np.triu_indices(dm.n, 1)
    d = dm.d[iu]
    if np.any(d == 0):
        k = int(np.flatnonzero(d == 0)[0])
        raise ValueError(f"zero target distance between vertices {iu[0][k]} and {iu[1][k]}")
    delta = emb.distances()[iu]
    return float(np.mean(np.abs(delta - d) / d))


@dataclass(frozen=True)
class QualityReport:
    stress: float
    distortion: float
    geometry: str
    dilation: float
    n: int
    runtime: float

    def __post_init__(self) -> None:
        for name in ("stress", "distortion", "dilation", "runtime"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} is not finite: {v}")
        if self.stress < 0 or self.distortion < 0:
            raise ValueError("stress and distortion must be nonnegative")


def dilation_used(emb: Embedding, trace: OptTrace, dm: DistanceMatrix) -> float:
    """Total scale from the raw distances to the unit sphere (or plane).

    This is the dilation carried by the fitted targets, divided by R when the
    radius was fitted.
    """
    targets = trace.targets if trace.targets is not None else dm
    if trace.radius:
        return targets.dilation / emb.radius
    return targets.dilation


def evaluate(emb: Embedding, trace: OptTrace, dm: DistanceMatrix,
             weight_policy: str = "inverse_square", runtime: Optional[float] = None) -> QualityReport:
    """Report for one layout; measured against the targets the optimizer fit."""
    targets = trace.targets if trace.targets is not None else dm
    return QualityReport(
        stress=stress(emb, targets, weight_policy),
        distortion=distortion(emb, targets),
        geometry=emb.geometry.kind,
        dilation=dilation_used(emb, trace, dm),
        n=emb.n,
        runtime=trace.seconds if runtime is None else runtime,
    )


@dataclass
class GeometrySummary:
    geometry: str
    n: int
    mean_distortion: float
    sd_distortion: float
    mean_stress: float
    sd_stress: float
    runtime_s: float
    dilation: float
    reports: list[QualityReport] = field(default_factory=list)

    def row(self, graph: str) -> dict:
        return {"graph": graph, "geometry": self.geometry, "n": self.n,
                "mean_distortion": self.mean_distortion, "sd_distortion": self.sd_distortion,
                "mean_stress": self.mean_stress, "runtime_s": self.runtime_s,
                "dilation": self.dilation}


def _sd(values: Sequence[float]) -> float:
    # sample standard deviation; a single run has none
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def summarize(reports: Sequence[QualityReport]) -> GeometrySummary:
    if not reports:
        raise ValueError("nothing to summarize")
    dist = [r.distortion for r in reports]
    st = [r.stress for r in reports]
    return GeometrySummary(
        geometry=reports[0].geometry,
        n=reports[0].n,
        mean_distortion=float(np.mean(dist)),
        sd_distortion=_sd(dist),
        mean_stress=float(np.mean(st)),
        sd_stress=_sd(st),
        runtime_s=float(np.mean([r.runtime for r in reports])),
        dilation=float(np.mean([r.dilation for r in reports])),
        reports=list(reports),
    )


def run_repeats(dm: DistanceMatrix, cfg: LayoutConfig, repeats: int = 5) -> list[QualityReport]:
    """``repeats`` layouts with seeds cfg.seed, cfg.seed + 1, ..."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    out = []
    for r in range(repeats):
        run_cfg = cfg.with_seed(cfg.seed + r)
        t0 = time.perf_counter()
        emb, trace = sgd_layout(dm, run_cfg)
        out.append(evaluate(emb, trace, dm, run_cfg.weight_policy, time.perf_counter() - t0))
    return out


def compare_geometries(dm: DistanceMatrix, cfgs: Iterable[LayoutConfig],
                       repeats: int = 5) -> list[GeometrySummary]:
    """One summary per config (typically one per geometry), in the order given."""
    return [summarize(run_repeats(dm, cfg, repeats)) for cfg in cfgs]


def best_geometry(summaries: Sequence[GeometrySummary]) -> str:
    return min(summaries, key=lambda s: s.mean_distortion).geometry


def report_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(REPORT_COLUMNS), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: row[k] for k in REPORT_COLUMNS})
    return buf.getvalue()


def report_json(rows: Iterable[dict]) -> str:
    return json.dumps([{k: row[k] for k in REPORT_COLUMNS} for row in rows], indent=2)


def report_dict(report: QualityReport) -> dict:
    return asdict(report)
