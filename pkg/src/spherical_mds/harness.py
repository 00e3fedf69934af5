"""Experiment drivers behind the command-line tool.

Everything here returns plain rows (dicts) so the CLI can write CSV/JSON and
tests can check the numbers directly.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .embedder import (Embedding, LayoutConfig, OptTrace, Schedule, dilate_heuristic, gd_layout,
                       heuristic_factor, sgd_layout)
from .geometry import GEOMETRIES, SPHERICAL, Geometry, distance_matrix, sample_uniform_coords
from .graph_io import DistanceMatrix, Graph, apsp, generate, load_graph, subdivide
from .metrics import REPORT_COLUMNS, QualityReport, evaluate, run_repeats, summarize

EARTH_RADIUS_KM = 6371.0
DEFAULT_SAMPLE_EXTENT = 2.0


@dataclass(frozen=True)
class GraphSource:
    """Where a graph comes from: a file path or a generator spec, plus subdivision rounds."""

    path: Optional[str] = None
    spec: Optional[str] = None
    subdivide: int = 0

    def __post_init__(self) -> None:
        if (self.path is None) == (self.spec is None):
            raise ValueError("give exactly one of a path or a generator spec")
        if self.subdivide < 0:
            raise ValueError("subdivision rounds must be nonnegative")

    @property
    def name(self) -> str:
        base = os.path.splitext(os.path.basename(self.path))[0] if self.path else self.spec
        return f"{base}_sub{self.subdivide}" if self.subdivide else base

    def load(self) -> Graph:
        g = load_graph(self.path) if self.path else generate(self.spec)
        return subdivide(g, self.subdivide) if self.subdivide else g


def layout(dm: DistanceMatrix, cfg: LayoutConfig, optimizer: str = "sgd",
           labels: Optional[list[str]] = None) -> tuple[Embedding, OptTrace]:
    if optimizer == "gd":
        if cfg.resolved_dilation == "optimize_radius":
            raise ValueError("radius optimization is only available with SGD")
        return gd_layout(dm, cfg, labels)
    if optimizer != "sgd":
        raise ValueError(f"unknown optimizer {optimizer!r}")
    return sgd_layout(dm, cfg, labels)


def layout_payload(emb: Embedding, trace: OptTrace, report: QualityReport, cfg: LayoutConfig) -> dict:
    """JSON-ready description of one layout."""
    return {
        "geometry": emb.geometry.kind,
        "radius": emb.radius,
        "coords": emb.coords.tolist(),
        "labels": emb.labels,
        "final_stress": trace.final_stress,
        "distortion": report.distortion,
        "dilation_factor": report.dilation,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
    }


# ---------------------------------------------------------------------------
# Cross-geometry comparison
# ---------------------------------------------------------------------------

COMPARE_COLUMNS = REPORT_COLUMNS + ("error",)


def compare(sources: Sequence[GraphSource], base: LayoutConfig, repeats: int = 5,
            geometries: Sequence[str] = GEOMETRIES) -> list[dict]:
    """One row per graph and geometry; a graph that fails yields error rows only."""
    rows = []
    for src in sources:
        try:
            dm = apsp(src.load())
        except (OSError, ValueError) as exc:
            rows += [_error_row(src.name, kind, exc) for kind in geometries]
            continue
        for kind in geometries:
            cfg = replace(base, geometry=Geometry(kind))
            try:
                summary = summarize(run_repeats(dm, cfg, repeats))
            except (ValueError, ArithmeticError) as exc:
                rows.append(_error_row(src.name, kind, exc))
                continue
            row = summary.row(src.name)
            row["error"] = ""
            rows.append(row)
    return rows


def _error_row(graph: str, kind: str, exc: Exception) -> dict:
    row = {k: "" for k in COMPARE_COLUMNS}
    row.update(graph=graph, geometry=kind, error=f"{type(exc).__name__}: {exc}")
    return row


# ---------------------------------------------------------------------------
# Dilation sweep
# ---------------------------------------------------------------------------

SWEEP_COLUMNS = ("factor", "relative_factor", "mean_distortion", "sd_distortion",
                 "mean_stress", "heuristic")


def sweep_factors(dm: DistanceMatrix, points: int = 20, low: float = 0.25, high: float = 4.0) -> list[float]:
    """``points`` factors spaced geometrically over [low, high] times the heuristic factor."""
    if points < 1:
        raise ValueError("need at least one sweep point")
    h = heuristic_factor(dm)
    return [h * r for r in np.geomspace(low, high, points)]


def dilation_sweep(dm: DistanceMatrix, factors: Iterable[float], base: LayoutConfig,
                   repeats: int = 1, include_heuristic: bool = True) -> list[dict]:
    """Distortion after scaling the targets by each factor; the heuristic factor is flagged."""
    h = heuristic_factor(dm)
    factors = [float(f) for f in factors]
    if any(not f > 0 for f in factors):
        raise ValueError("dilation factors must be positive")
    if include_heuristic and not any(math.isclose(f, h, rel_tol=1e-12) for f in factors):
        factors.append(h)
    rows = []
    for f in sorted(factors):
        cfg = replace(base, dilation_mode="factor", dilation_factor=f)
        s = summarize(run_repeats(dm, cfg, repeats))
        rows.append({"factor": f, "relative_factor": f / h, "mean_distortion": s.mean_distortion,
                     "sd_distortion": s.sd_distortion, "mean_stress": s.mean_stress,
                     "heuristic": int(math.isclose(f, h, rel_tol=1e-12))})
    return rows


# ---------------------------------------------------------------------------
# Sampling experiment
# ---------------------------------------------------------------------------

def exact_distances(coords: np.ndarray, kind: str, radius: float = 1.0) -> DistanceMatrix:
    """Ground-truth matrix of sampled points, symmetrized with an exact zero diagonal."""
    d = distance_matrix(coords, kind, radius)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return DistanceMatrix(d)


SAMPLE_COLUMNS = ("source", "embedding", "n", "mean_distortion", "sd_distortion")


def sample_experiment(n_points: int = 50, geometries: Sequence[str] = GEOMETRIES,
                      extent: float = DEFAULT_SAMPLE_EXTENT, repeats: int = 5, seed: int = 0,
                      base: LayoutConfig = LayoutConfig()) -> list[dict]:
    """Sample points in each geometry and embed their distances with every variant.

    Repeat r uses seed + r for both the sample and the layout. ``extent`` is the
    radius of the sampled disk in the flat and hyperbolic cases.
    """
    if n_points < 3:
        raise ValueError("need at least 3 points")
    rows = []
    for src in geometries:
        samples = []
        for r in range(repeats):
            coords = sample_uniform_coords(src, n_points, extent, np.random.default_rng(seed + r))
            samples.append(exact_distances(coords, src))
        for emb_kind in geometries:
            dists = []
            for r, dm in enumerate(samples):
                cfg = replace(base, geometry=Geometry(emb_kind), seed=seed + r)
                emb, trace = sgd_layout(dm, cfg)
                dists.append(evaluate(emb, trace, dm, cfg.weight_policy).distortion)
            rows.append({"source": src, "embedding": emb_kind, "n": n_points,
                         "mean_distortion": float(np.mean(dists)),
                         "sd_distortion": float(np.std(dists, ddof=1)) if len(dists) > 1 else 0.0})
    return rows


# ---------------------------------------------------------------------------
# Cities
# ---------------------------------------------------------------------------

def synthetic_cities(n: int = 30, seed: int = 0, radius_km: float = EARTH_RADIUS_KM) -> tuple[DistanceMatrix, np.ndarray]:
    """Random points on a globe and their great-circle distances in km."""
    coords = sample_uniform_coords(SPHERICAL, n, 1.0, np.random.default_rng(seed))
    dm = exact_distances(coords, SPHERICAL, radius_km)
    return DistanceMatrix(dm.d, 1.0, [f"city{i:02d}" for i in range(n)]), coords


def cities_inputs(dm: DistanceMatrix, base: LayoutConfig,
                  schedule: Optional[Schedule] = None) -> tuple[DistanceMatrix, LayoutConfig]:
    """Targets and config for recovering a globe from a distance table.

    By default the table is dilated so its diameter is pi and the radius is then
    fitted, which recovers any exact sphere sample regardless of how much of the
    globe it covers. The radius moves at 0.01 of the step size, so it only
    settles under a step that does not decay; without an explicit schedule the
    step is fixed at the learning-rate cap. An explicit dilation mode other than
    heuristic is used as given.
    """
    cfg = replace(base, geometry=Geometry.spherical(),
                  schedule=schedule or Schedule("fixed", eta0=base.lr_cap))
    if base.dilation_mode in ("auto", "heuristic"):
        return dilate_heuristic(dm), replace(cfg, dilation_mode="optimize_radius")
    return dm, cfg
