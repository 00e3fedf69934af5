"""Stress minimization by stochastic (and exact) gradient descent.

The optimizer works on ``(n, 2)`` coordinate arrays. Every epoch visits each
unordered pair exactly once in a freshly shuffled order and moves both
endpoints against the gradient of that pair's stress term. Stress is
recomputed once per epoch to drive the stopping rule.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from . import _kernels as K
from .geometry import (
    DISTANCE_GRADIENT,
    EUCLIDEAN,
    HYPERBOLIC,
    SPHERICAL,
    Geometry,
    SingularGradientError,
    distance_matrix,
    normalize_coords,
    sample_uniform_coords,
)
from .graph_io import DistanceMatrix

_KIND_CODE = {SPHERICAL: K.SPH, EUCLIDEAN: K.EUC, HYPERBOLIC: K.HYP}

SCHEDULES = ("fixed", "piecewise", "frac_t", "frac_sqrt_t")
WEIGHT_POLICIES = ("inverse_square", "binary")
DILATION_MODES = ("auto", "none", "heuristic", "factor", "optimize_radius")

RADIUS_FLOOR = 1e-3
RADIUS_RATE = 0.01
PERTURBATION = 1e-6


DEFAULT_DECAY = 0.05
DEFAULT_SWITCH = 0.01
# the adaptive switch never sits above this fraction of the cap, so even
# uniform weights get an exponential phase before the 1/t tail
SWITCH_CAP = 0.1


@dataclass(frozen=True)
class Schedule:
    """Learning-rate schedule.

    ``fixed`` uses ``eta0``. ``piecewise`` decays exponentially at rate
    ``decay`` from the cap until it drops to ``switch``, then continues as a
    1/t tail joined continuously at the switch point.

    Leaving ``decay`` and ``switch`` unset lets the optimizer pick them from
    the spread of the pair weights: the exponential phase lasts
    ``ramp_epochs`` and ends where the heaviest pair moves by ``end_step`` of
    its residual. Standalone evaluation falls back to 0.05 and 0.01.
    """

    kind: str = "piecewise"
    eta0: float = 0.05
    decay: Optional[float] = None
    switch: Optional[float] = None
    ramp_epochs: int = 30
    end_step: float = 0.1

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.kind!r}; expected one of {SCHEDULES}")
        for v in (self.eta0, self.decay, self.switch, self.end_step):
            if v is not None and not v > 0:
                raise ValueError("schedule parameters must be positive")
        if self.ramp_epochs < 1:
            raise ValueError("ramp_epochs must be at least 1")

    @property
    def adaptive(self) -> bool:
        return self.kind == "piecewise" and (self.decay is None or self.switch is None)

    def resolved(self, lr_cap: float, weight_ratio: float = 1.0) -> "Schedule":
        """Concrete schedule; ``weight_ratio`` is max step weight over min."""
        if not self.adaptive:
            return self
        switch = self.switch
        if switch is None:
            switch = min(self.end_step / max(weight_ratio, 1.0), SWITCH_CAP * lr_cap)
        decay = self.decay
        if decay is None:
            decay = max(math.log(lr_cap / switch), 1e-12) / self.ramp_epochs
        return replace(self, decay=decay, switch=switch)


def schedule_eta(kind: Schedule | str, t: int, lr_cap: float = 0.1) -> float:
    """Learning rate at epoch ``t`` (0-based); never exceeds ``lr_cap``."""
    sched = Schedule(kind) if isinstance(kind, str) else kind
    if t < 0:
        raise ValueError("epoch index must be nonnegative")
    if sched.kind == "fixed":
        return min(sched.eta0, lr_cap)
    if sched.kind == "frac_t":
        return lr_cap / (1.0 + t)
    if sched.kind == "frac_sqrt_t":
        return lr_cap / math.sqrt(1.0 + t)
    decay = DEFAULT_DECAY if sched.decay is None else sched.decay
    eta_switch = min(DEFAULT_SWITCH if sched.switch is None else sched.switch, lr_cap)
    t_switch = math.log(lr_cap / eta_switch) / decay
    if t <= t_switch:
        return lr_cap * math.exp(-decay * t)
    return eta_switch * (1.0 + t_switch) / (1.0 + t)


@dataclass(frozen=True)
class LayoutConfig:
    geometry: Geometry = field(default_factory=Geometry.spherical)
    schedule: Schedule = field(default_factory=Schedule)
    lr_cap: float = 0.1
    max_epochs: int = 300
    convergence_eps: float = 1e-7
    weight_policy: str = "inverse_square"
    seed: int = 0
    # "auto" means heuristic on the sphere and none elsewhere
    dilation_mode: str = "auto"
    # used when dilation_mode is "factor"
    dilation_factor: Optional[float] = None
    radius_init: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.lr_cap > 0:
            raise ValueError("lr_cap must be positive")
        if not self.convergence_eps > 0:
            raise ValueError("convergence_eps must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.weight_policy not in WEIGHT_POLICIES:
            raise ValueError(f"unknown weight policy {self.weight_policy!r}")
        if self.dilation_mode not in DILATION_MODES:
            raise ValueError(f"unknown dilation mode {self.dilation_mode!r}")
        if self.dilation_mode == "factor" and not (self.dilation_factor or 0) > 0:
            raise ValueError("dilation_mode 'factor' needs a positive dilation_factor")
        if self.radius_init is not None and not self.radius_init > 0:
            raise ValueError("radius_init must be positive")

    @property
    def resolved_dilation(self) -> str:
        if self.dilation_mode == "auto":
            return "heuristic" if self.geometry.kind == SPHERICAL else "none"
        return self.dilation_mode

    def with_seed(self, seed: int) -> "LayoutConfig":
        return replace(self, seed=seed)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["geometry"] = {"kind": self.geometry.kind, "radius": self.geometry.radius}
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "LayoutConfig":
        data = dict(data)
        data["geometry"] = Geometry(**data["geometry"])
        data["schedule"] = Schedule(**data["schedule"])
        return cls(**data)


@dataclass
class Embedding:
    geometry: Geometry
    coords: np.ndarray
    labels: Optional[list[str]] = None

    def __post_init__(self) -> None:
        self.coords = normalize_coords(np.asarray(self.coords, dtype=float).reshape(-1, 2),
                                       self.geometry.kind)

    @property
    def n(self) -> int:
        return self.coords.shape[0]

    @property
    def radius(self) -> float:
        return self.geometry.radius

    def distances(self) -> np.ndarray:
        return distance_matrix(self.coords, self.geometry.kind, self.geometry.radius)


@dataclass
class OptTrace:
    stress: list[float] = field(default_factory=list)
    elapsed: list[float] = field(default_factory=list)
    initial_stress: float = float("nan")
    epochs: int = 0
    terminated_by: str = "max_epochs"
    seconds: float = 0.0
    degenerate_pairs: int = 0
    radius: list[float] = field(default_factory=list)
    # the matrix the optimizer actually fit (after any dilation)
    targets: Optional[DistanceMatrix] = None

    @property
    def final_stress(self) -> float:
        return self.stress[-1] if self.stress else self.initial_stress

    def to_csv(self) -> str:
        lines = ["epoch,stress,elapsed_seconds"]
        lines += [f"{k + 1},{s!r},{e:.6f}" for k, (s, e) in enumerate(zip(self.stress, self.elapsed))]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Stress and its gradient
# ---------------------------------------------------------------------------

def weight_matrix(dm: DistanceMatrix | np.ndarray, weight_policy: str) -> np.ndarray:
    d = dm.d if isinstance(dm, DistanceMatrix) else np.asarray(dm, dtype=float)
    n = d.shape[0]
    off = ~np.eye(n, dtype=bool)
    if weight_policy == "binary":
        w = off.astype(float)
    elif weight_policy == "inverse_square":
        if np.any(d[off] <= 0):
            raise ValueError("inverse-square weights need positive distances between distinct vertices")
        w = np.zeros_like(d)
        w[off] = d[off] ** -2.0
    else:
        raise ValueError(f"unknown weight policy {weight_policy!r}")
    return w


def _check_dims(emb: Embedding, dm: DistanceMatrix) -> None:
    if emb.n != dm.n:
        raise ValueError(f"embedding has {emb.n} points but distance matrix is {dm.n}x{dm.n}")


def stress(emb: Embedding, dm: DistanceMatrix, weight_policy: str = "inverse_square") -> float:
    """Weighted sum over i<j of squared residuals between realized and target distances."""
    _check_dims(emb, dm)
    w = weight_matrix(dm, weight_policy)
    res = emb.distances() - dm.d
    iu = np.triu_indices(emb.n, 1)
    return float(np.sum(w[iu] * res[iu] ** 2))


def pair_gradient(emb: Embedding, dm: DistanceMatrix, i: int, j: int,
                  weight_policy: str = "inverse_square") -> tuple[np.ndarray, np.ndarray, float]:
    """Gradient of the single term for pair (i, j).

    Returns (d/dX_i, d/dX_j, d/dR); the radius part is 0 off the sphere.
    """
    _check_dims(emb, dm)
    kind, R = emb.geometry.kind, emb.geometry.radius
    p, q = tuple(emb.coords[i]), tuple(emb.coords[j])
    d_ij = dm.d[i, j]
    w = 1.0 if weight_policy == "binary" else d_ij ** -2.0
    grad = DISTANCE_GRADIENT[kind]
    gi = np.asarray(grad(p, q))
    gj = np.asarray(grad(q, p))
    if kind == SPHERICAL:
        theta = emb.geometry.distance(p, q) / R
        coef = 2.0 * w * (R * theta - d_ij)
        return coef * R * gi, coef * R * gj, coef * theta
    dist = emb.geometry.distance(p, q)
    coef = 2.0 * w * (dist - d_ij)
    return coef * gi, coef * gj, 0.0


def stress_gradient(emb: Embedding, dm: DistanceMatrix,
                    weight_policy: str = "inverse_square") -> tuple[np.ndarray, float]:
    """Exact gradient of the total stress: ``(n, 2)`` coordinate part and the radius part.

    Vectorized over all pairs; raises :class:`SingularGradientError` on any
    coincident (or antipodal, on the sphere) pair.
    """
    _check_dims(emb, dm)
    kind, R = emb.geometry.kind, emb.geometry.radius
    X = emb.coords
    n = emb.n
    w = weight_matrix(dm, weight_policy)
    off = ~np.eye(n, dtype=bool)
    a0, a1 = X[:, 0][:, None], X[:, 1][:, None]
    b0, b1 = X[:, 0][None, :], X[:, 1][None, :]
    # ga[i, j] = d dist(X_i, X_j) / d X_i
    if kind == EUCLIDEAN:
        dx, dy = a0 - b0, a1 - b1
        dist = np.hypot(dx, dy)
        if np.any(dist[off] < 1e-12):
            raise SingularGradientError("coincident points")
        with np.errstate(divide="ignore", invalid="ignore"):
            g0, g1 = dx / dist, dy / dist
        unit = dist
    elif kind == SPHERICAL:
        c = np.clip(np.sin(a0) * np.sin(b0) + np.cos(a0) * np.cos(b0) * np.cos(a1 - b1), -1.0, 1.0)
        s = np.sqrt(1.0 - c * c)
        if np.any(s[off] < 1e-12):
            raise SingularGradientError("coincident or antipodal points")
        with np.errstate(divide="ignore", invalid="ignore"):
            g0 = -(np.cos(a0) * np.sin(b0) - np.sin(a0) * np.cos(b0) * np.cos(a1 - b1)) / s
            g1 = np.cos(a0) * np.cos(b0) * np.sin(a1 - b1) / s
        unit = np.arccos(c)
        dist = R * unit
        g0, g1 = R * g0, R * g1
    else:
        sa, sb = np.sinh(0.5 * (a0 - b0)), np.sin(0.5 * (a1 - b1))
        u = np.maximum(2.0 * (sa * sa + np.sinh(a0) * np.sinh(b0) * sb * sb), 0.0)
        s = np.sqrt(u * (u + 2.0))
        if np.any(s[off] < 1e-12):
            raise SingularGradientError("coincident points")
        with np.errstate(divide="ignore", invalid="ignore"):
            g0 = (np.sinh(a0) * np.cosh(b0) - np.cosh(a0) * np.sinh(b0) * np.cos(a1 - b1)) / s
            g1 = np.sinh(a0) * np.sinh(b0) * np.sin(a1 - b1) / s
        dist = np.log1p(u + s)
        unit = dist
    coef = np.where(off, 2.0 * w * (dist - dm.d), 0.0)
    grad = np.column_stack([
        np.where(off, coef * g0, 0.0).sum(axis=1),
        np.where(off, coef * g1, 0.0).sum(axis=1),
    ])
    d_radius = 0.0
    if kind == SPHERICAL:
        iu = np.triu_indices(n, 1)
        d_radius = float(np.sum(coef[iu] * unit[iu]))
    return grad, d_radius


# ---------------------------------------------------------------------------
# Dilation
# ---------------------------------------------------------------------------

def heuristic_factor(dm: DistanceMatrix) -> float:
    """The factor that makes the largest target distance exactly pi."""
    m = dm.max()
    if not m > 0:
        raise ValueError("cannot dilate an all-zero distance matrix")
    return math.pi / m


def dilate_heuristic(dm: DistanceMatrix) -> DistanceMatrix:
    """Scale so the largest target distance is exactly pi."""
    factor = heuristic_factor(dm)
    out = dm.scaled(factor)
    # guard against the product rounding just past pi
    out.d[out.d == out.d.max()] = math.pi
    return out


def prepare_targets(dm: DistanceMatrix, cfg: LayoutConfig) -> DistanceMatrix:
    """The targets the optimizer fits: ``dm`` after the configured dilation."""
    mode = cfg.resolved_dilation
    if mode == "heuristic":
        return dilate_heuristic(dm)
    if mode == "factor":
        return dm.scaled(cfg.dilation_factor)
    return dm


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------

def _validate(dm: DistanceMatrix) -> None:
    if dm.n < 2:
        raise ValueError("need at least two points to lay out")
    if not np.all(np.isfinite(dm.d)):
        raise ValueError("distance matrix has non-finite entries")


def _pairs(dm: DistanceMatrix) -> np.ndarray:
    I, J = np.triu_indices(dm.n, 1)
    return K.pack_pairs(I, J, dm.d[I, J])


def initial_coords(kind: str, n: int, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Area-uniform random start: the whole sphere, or a disk of radius ``scale / 2``."""
    extent = max(scale, 1e-9) / 2.0
    return sample_uniform_coords(kind, n, extent, rng)


def _noise(rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-PERTURBATION, PERTURBATION, size=(64, 2))


def _run(dm: DistanceMatrix, cfg: LayoutConfig, *, full: bool, opt_radius: bool,
         labels: Optional[list[str]] = None):
    _validate(dm)
    kind = cfg.geometry.kind
    code = _KIND_CODE[kind]
    if opt_radius:
        if kind != SPHERICAL:
            raise ValueError("radius optimization needs spherical geometry")
        targets = dm
        R = cfg.radius_init if cfg.radius_init is not None else max(dm.max() / math.pi, RADIUS_FLOOR)
    else:
        targets = prepare_targets(dm, cfg)
        R = cfg.geometry.radius if kind == SPHERICAL else 1.0
    Wm = weight_matrix(targets, cfg.weight_policy)
    PR = _pairs(targets)
    # step weights: rescaled so the smallest is 1 (same minimizer), so the first
    # epochs run every pair at the cap
    inv_sq = cfg.weight_policy == "inverse_square"
    dmin, dmax = float(PR[:, 1].min()), float(PR[:, 1].max())
    wscale = dmax * dmax if inv_sq else 1.0
    ratio = (dmax / dmin) ** 2 if inv_sq else 1.0
    cap = cfg.lr_cap
    if full:
        # per-vertex curvature scale for the preconditioned full step
        Winv = 1.0 / Wm.sum(axis=1)
    sched = cfg.schedule.resolved(cfg.lr_cap, ratio)

    rng = np.random.default_rng(cfg.seed)
    X = np.ascontiguousarray(initial_coords(kind, dm.n, targets.max(), rng))
    G = np.zeros_like(X)

    trace = OptTrace(targets=targets)
    prev = float(K.stress(X, targets.d, Wm, code, R))
    trace.initial_stress = prev
    start = time.perf_counter()
    for t in range(cfg.max_epochs):
        eta = schedule_eta(sched, t, cfg.lr_cap)
        if full:
            trace.degenerate_pairs += K.full_step(X, PR, eta / cfg.lr_cap, inv_sq, Winv, code, R, G)
        else:
            K.shuffle_rows(PR, rng.random(len(PR)))
            R, bad = K.sgd_epoch(X, PR, eta, cap, inv_sq, wscale, code, R,
                                 opt_radius, RADIUS_RATE, RADIUS_FLOOR, _noise(rng))
            trace.degenerate_pairs += bad
        cur = float(K.stress(X, targets.d, Wm, code, R))
        if not math.isfinite(cur):
            raise FloatingPointError(f"stress became non-finite at epoch {t + 1}")
        trace.stress.append(cur)
        trace.elapsed.append(time.perf_counter() - start)
        if opt_radius:
            trace.radius.append(R)
        if abs(cur - prev) < cfg.convergence_eps:
            trace.terminated_by = "converged"
            break
        prev = cur
    trace.epochs = len(trace.stress)
    trace.seconds = time.perf_counter() - start

    geometry = Geometry(kind, R) if kind == SPHERICAL else cfg.geometry
    labels = labels if labels is not None else dm.labels
    return Embedding(geometry, X, labels), trace


def sgd_layout(dm: DistanceMatrix, cfg: LayoutConfig = LayoutConfig(),
               labels: Optional[list[str]] = None) -> tuple[Embedding, OptTrace]:
    """Stochastic gradient descent with random reshuffling of all pairs each epoch.

    With ``dilation_mode="optimize_radius"`` this defers to :func:`sgd_layout_with_radius`.
    """
    if cfg.resolved_dilation == "optimize_radius":
        return sgd_layout_with_radius(dm, cfg, labels)
    return _run(dm, cfg, full=False, opt_radius=False, labels=labels)


def gd_layout(dm: DistanceMatrix, cfg: LayoutConfig = LayoutConfig(),
              labels: Optional[list[str]] = None) -> tuple[Embedding, OptTrace]:
    """Exact gradient descent: one step along the full stress gradient per epoch.

    Each vertex's step is divided by the total weight of its pairs and scaled
    by ``eta(t) / lr_cap``, so the schedule sets the step as a fraction of the
    Jacobi step.
    """
    return _run(dm, cfg, full=True, opt_radius=False, labels=labels)


def sgd_layout_with_radius(dm: DistanceMatrix, cfg: LayoutConfig = LayoutConfig(),
                           labels: Optional[list[str]] = None) -> tuple[Embedding, OptTrace]:
    """SGD on the sphere that also fits the radius.

    Targets are used undilated. The radius starts at ``cfg.radius_init`` (or
    ``max d / pi``) and takes a step of ``0.01 * min(eta * w, cap)`` times the
    per-pair radius gradient after every pair update.
    """
    return _run(dm, cfg, full=False, opt_radius=True, labels=labels)
