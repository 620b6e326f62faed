"""Low-loss path search between two minima.

A path is a fixed-endpoint chain of parameter vectors. Each optimization
sweep moves every interior point against the component of the gradient
that is orthogonal to the local chord directions (the tangential part is
reparametrization and is discarded); a refinement pass inserts midpoints
where a loss or spacing criterion flags a stretched gap, banking border
points so the chain length stays constant.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateChordError, DivergenceError, NonFiniteValueError
from .landscape import (ScalarField, eval_grad_many, eval_loss, eval_loss_many)
from .trainer import SchedulerSpec, schedule_lr

COINCIDENCE_EPS = 1e-12
REFINE_THRESHOLD = 1.2
DEFAULT_ALPHA_GRID = (0.2, 0.4, 0.6, 0.8)


@dataclass
class PathState:
    """Ordered chain of parameter vectors with immutable endpoints."""

    points: np.ndarray  # (n, dim), n >= 3

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[0] < 3:
            raise ValueError("a path needs a 2-D (n >= 3, dim) point array")
        gaps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        if np.any(gaps <= COINCIDENCE_EPS):
            raise DegenerateChordError(int(np.argmin(gaps)))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


@dataclass
class PathTrace:
    """Per-epoch history of a path optimization."""

    max_loss: np.ndarray          # (epochs,)
    orth_norms: np.ndarray        # (epochs, n_interior)
    tang_norms: np.ndarray        # (epochs, n_interior)

    def mean_orth(self) -> np.ndarray:
        return self.orth_norms.mean(axis=1)

    def mean_tang(self) -> np.ndarray:
        return self.tang_norms.mean(axis=1)


@dataclass(frozen=True)
class PathConfig:
    """Hyperparameters of a full path optimization run."""

    n_points: int = 19            # interior points; the chain has n_points + 2
    epochs: int = 300
    scheduler: SchedulerSpec = field(default_factory=lambda: SchedulerSpec(
        m1=270, m2=300, lr_max=2e-3, lr_min=1.25e-4))
    l2: float = 1e-5
    refine_every: int = 25        # 0 disables refinement
    criterion: str = "distance"
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    threshold: float = REFINE_THRESHOLD
    batch_size: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_points < 1:
            raise ValueError("need at least one interior point")
        if self.criterion not in ("loss", "distance"):
            raise ValueError(f"unknown refinement criterion '{self.criterion}'")


def proj(theta_i: np.ndarray, theta_j: np.ndarray) -> np.ndarray:
    """Unit chord direction from theta_j to theta_i."""
    diff = np.asarray(theta_i, dtype=np.float64) - np.asarray(theta_j, dtype=np.float64)
    norm = float(np.linalg.norm(diff))
    if norm <= COINCIDENCE_EPS:
        raise DegenerateChordError()
    return diff / norm


def _sweep(points: np.ndarray, field_: ScalarField, eta: float, batch, l2: float):
    """One in-order update of all interior points; returns norms per point.

    Point i sees its already-updated left neighbor, matching a sequential
    pass over the chain. Interior gradients are batch-evaluated up front
    (legal because a point never moves before its own update). Endpoints
    never move.
    """
    pts = points.copy()
    n = pts.shape[0]
    orth = np.zeros(n - 2)
    tang = np.zeros(n - 2)
    try:
        grads = eval_grad_many(field_, pts[1:n - 1], batch=batch)
    except NonFiniteValueError as exc:
        raise DivergenceError("non-finite gradient on the path", point=None) from exc
    if l2 > 0.0:
        grads = grads + l2 * pts[1:n - 1]
    for i in range(1, n - 1):
        grad = grads[i - 1]
        try:
            left = proj(pts[i], pts[i - 1])
            right = proj(pts[i + 1], pts[i])
        except DegenerateChordError:
            raise DegenerateChordError(i) from None
        tangential = 0.5 * ((grad @ left) * left + (grad @ right) * right)
        normal = grad - tangential
        orth[i - 1] = np.linalg.norm(normal)
        tang[i - 1] = np.linalg.norm(tangential)
        pts[i] = pts[i] - eta * normal
    return pts, orth, tang


def step(path: PathState, field_: ScalarField, eta: float, batch=None,
         l2: float = 0.0) -> PathState:
    """Apply one orthogonal-gradient sweep and return the updated path."""
    if eta < 0:
        raise ValueError("eta must be non-negative")
    pts, _, _ = _sweep(path.points, field_, eta, batch, l2)
    return PathState(pts)


def loss_criterion(field_: ScalarField, theta_i, theta_j, l_ref: float,
                   alpha_grid=DEFAULT_ALPHA_GRID, batch=None) -> float:
    """Peak interpolated loss on the chord, relative to ``l_ref``."""
    if l_ref <= 0:
        raise ValueError("loss criterion needs a positive reference loss")
    worst = -np.inf
    for a in alpha_grid:
        val = eval_loss(field_, (1.0 - a) * np.asarray(theta_i) + a * np.asarray(theta_j),
                        batch=batch)
        worst = max(worst, val)
    return worst / l_ref


def distance_criterion(theta_i, theta_j, mu: float) -> float:
    """Gap length relative to the mean spacing ``mu``."""
    if mu <= 0:
        raise ValueError("mean spacing must be positive")
    return float(np.linalg.norm(np.asarray(theta_i) - np.asarray(theta_j))) / mu


def _gap_scores(path: PathState, field_: ScalarField, criterion: str,
                alpha_grid, batch) -> np.ndarray:
    pts = path.points
    n = len(path)
    if criterion == "distance":
        mu = float(np.linalg.norm(pts[-1] - pts[0])) / n
        return np.array([distance_criterion(pts[i], pts[i + 1], mu)
                         for i in range(n - 1)])
    l_ref = max(eval_loss(field_, pts[i], batch=batch) for i in range(n))
    return np.array([loss_criterion(field_, pts[i], pts[i + 1], l_ref,
                                    alpha_grid, batch) for i in range(n - 1)])


def refine(path: PathState, field_: ScalarField, criterion: str = "distance",
           bank=None, alpha_grid=DEFAULT_ALPHA_GRID,
           threshold: float = REFINE_THRESHOLD, batch=None):
    """Insert midpoints at the two worst gaps when the criterion exceeds 1.2.

    Length is conserved: after insertion the two interior points adjacent
    to the (never-moved) endpoints are displaced into the bank. Below the
    threshold the path and bank are returned unchanged.
    """
    bank = list(bank) if bank is not None else []
    n = len(path)
    if n < 4:
        raise ValueError("refinement needs at least 4 points")
    scores = _gap_scores(path, field_, criterion, alpha_grid, batch)
    if scores.max() <= threshold:
        return path, bank
    first = int(np.argmax(scores))
    masked = scores.copy()
    masked[first] = -np.inf
    second = int(np.argmax(masked))
    pts = list(path.points)
    for gap in sorted((first, second), reverse=True):
        pts.insert(gap + 1, 0.5 * (pts[gap] + pts[gap + 1]))
    bank.append(pts.pop(1))
    bank.append(pts.pop(-2))
    return PathState(np.array(pts)), bank


def path_max_loss(field_: ScalarField, path: PathState,
                  alpha_grid=DEFAULT_ALPHA_GRID, batch=None):
    """Maximum loss over all chain points and chord-interpolated points.

    Returns ``(value, (segment, alpha))``; the location of a chain point i
    is encoded as (i, 0.0) except the last, which is (n - 2, 1.0). Ties go
    to the smallest segment index, then the smallest alpha.
    """
    pts = path.points
    n = pts.shape[0]
    alphas = sorted(float(a) for a in alpha_grid)
    locations, thetas = [], []
    for seg in range(n - 1):
        for a in [0.0] + alphas + ([1.0] if seg == n - 2 else []):
            locations.append((seg, a))
            thetas.append(pts[seg] if a == 0.0
                          else (1.0 - a) * pts[seg] + a * pts[seg + 1])
    vals = eval_loss_many(field_, np.array(thetas), batch=batch)
    best = int(np.argmax(vals))  # first maximum = smallest (segment, alpha)
    return float(vals[best]), locations[best]


def _straight_path(p: np.ndarray, q: np.ndarray, n_interior: int) -> PathState:
    ts = np.linspace(0.0, 1.0, n_interior + 2)
    pts = p[None, :] + ts[:, None] * (q - p)[None, :]
    pts[0], pts[-1] = p, q  # endpoints bit-exact, not reconstructed
    return PathState(pts)


def _endpoint_params(x) -> np.ndarray:
    return np.asarray(getattr(x, "params", x), dtype=np.float64)


def optimize_path(field_: ScalarField, p, q, config: PathConfig = PathConfig()):
    """Optimize a chain from minimum ``p`` to minimum ``q`` (Minimum or array).

    Starts from the straight segment with ``config.n_points`` equally
    spaced interior points, sweeps once per epoch with the scheduled
    learning rate, and refines every ``refine_every`` epochs. Returns the
    final path and the full trace.
    """
    p = _endpoint_params(p)
    q = _endpoint_params(q)
    if p.shape != q.shape or p.size != field_.dim:
        raise ValueError("endpoints must share the field's dimension")
    if np.linalg.norm(p - q) <= COINCIDENCE_EPS:
        raise DegenerateChordError(0)

    rng = np.random.default_rng(config.seed)
    path = _straight_path(p, q, config.n_points)
    bank: list = []
    max_losses, orth_rows, tang_rows = [], [], []
    for epoch in range(config.epochs):
        batch = None
        if config.batch_size is not None:
            n_total = getattr(field_, "n_samples", None)
            if n_total is None:
                raise ValueError("batch_size set but the field has no samples")
            batch = rng.choice(n_total, size=min(config.batch_size, n_total),
                               replace=False)
        eta = schedule_lr(config.scheduler, epoch * config.scheduler.batches_per_epoch)
        try:
            pts, orth, tang = _sweep(path.points, field_, eta, batch, config.l2)
        except DivergenceError as exc:
            raise DivergenceError(f"path diverged at epoch {epoch}: {exc}",
                                  step=epoch, point=exc.point) from exc
        path = PathState(pts)
        if config.refine_every and (epoch + 1) % config.refine_every == 0:
            path, bank = refine(path, field_, config.criterion, bank,
                                config.alpha_grid, config.threshold, batch)
        val, _ = path_max_loss(field_, path, config.alpha_grid)
        max_losses.append(val)
        orth_rows.append(orth)
        tang_rows.append(tang)

    trace = PathTrace(max_loss=np.array(max_losses),
                      orth_norms=np.array(orth_rows),
                      tang_norms=np.array(tang_rows))
    return path, trace


def save_path(path: PathState, fp) -> None:
    """Write a path checkpoint as a JSON array of point arrays."""
    with open(fp, "w", encoding="utf-8") as fh:
        json.dump([[float(x) for x in pt] for pt in path.points], fh)
        fh.write("\n")


def load_path(fp) -> PathState:
    with open(fp, "r", encoding="utf-8") as fh:
        return PathState(np.array(json.load(fh), dtype=np.float64))


def save_trace(trace: PathTrace, fp) -> None:
    """Write the trace as CSV: epoch, max_loss, mean_orth_norm, mean_tang_norm."""
    with open(fp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "max_loss", "mean_orth_norm", "mean_tang_norm"])
        mo, mt = trace.mean_orth(), trace.mean_tang()
        for e in range(trace.max_loss.shape[0]):
            writer.writerow([e, repr(float(trace.max_loss[e])),
                             repr(float(mo[e])), repr(float(mt[e]))])
