"""Local-minimum search: SGD with momentum under a piecewise LR scheduler.

The scheduler holds the learning rate at ``lr_max`` for the first ``m1``
epochs, interpolates linearly to ``lr_min`` until epoch ``m2``, then stays
at ``lr_min``. Epochs are counted in batches: one gradient step advances
the batch index by one, and ``batches_per_epoch`` batches make an epoch.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, NonFiniteValueError
from .landscape import ScalarField, as_params, eval_grad, eval_loss

DEFAULT_TOL = 1e-6


@dataclass(frozen=True)
class SchedulerSpec:
    """Piecewise learning-rate schedule: hold, linear anneal, hold."""

    m1: float = 0.0
    m2: float = 0.0
    lr_max: float = 0.0
    lr_min: float = 1e-3
    batches_per_epoch: int = 1

    def __post_init__(self):
        if self.m1 < 0 or self.m2 < self.m1:
            raise ValueError("need 0 <= m1 <= m2")
        if self.lr_min <= 0:
            raise ValueError("lr_min must be positive")
        if self.lr_max < 0:
            raise ValueError("lr_max must be non-negative")
        if self.batches_per_epoch < 1:
            raise ValueError("batches_per_epoch must be >= 1")


def schedule_lr(spec: SchedulerSpec, batch_index: int) -> float:
    """Learning rate for a batch index under the hold/anneal/hold schedule."""
    b = float(batch_index)
    d = float(spec.batches_per_epoch)
    # The lr_min branch is checked first so the degenerate m1 == m2 spec
    # (used for a fixed learning rate) resolves to lr_min at the breakpoint.
    if b >= d * spec.m2:
        return spec.lr_min
    if b <= d * spec.m1:
        return spec.lr_max
    delta = (b - d * spec.m1) / (d * (spec.m2 - spec.m1))
    return (1.0 - delta) * spec.lr_max + delta * spec.lr_min


def fixed_lr(lr: float) -> SchedulerSpec:
    """Constant learning-rate schedule."""
    return SchedulerSpec(m1=0.0, m2=0.0, lr_max=0.0, lr_min=lr)


@dataclass(frozen=True)
class Minimum:
    """A converged (or best-effort) local minimum of a scalar field."""

    params: np.ndarray
    loss: float
    grad_norm: float
    seed: int
    steps: int
    converged: bool = True
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        object.__setattr__(self, "params", np.asarray(self.params, dtype=np.float64))


def find_minimum(field: ScalarField, init, scheduler: SchedulerSpec,
                 momentum: float = 0.9, max_steps: int = 10000,
                 tol: float = DEFAULT_TOL, seed: int = 0,
                 batches=None) -> Minimum:
    """Descend from ``init`` until the gradient norm drops below ``tol``.

    ``batches`` may be a callable step -> sample-index array for stochastic
    gradients (the caller owns the seeding); the returned record is always
    evaluated on the full loss. If ``max_steps`` is exhausted the best
    iterate seen is returned with ``converged=False``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    theta = as_params(init).copy()
    velocity = np.zeros_like(theta)
    best_theta, best_loss = theta.copy(), np.inf
    steps = 0
    for step in range(max_steps):
        batch = batches(step) if batches is not None else None
        try:
            loss = eval_loss(field, theta, batch=batch)
            grad = eval_grad(field, theta, batch=batch)
        except NonFiniteValueError as exc:
            raise DivergenceError(f"non-finite loss/gradient at step {step}",
                                  step=step) from exc
        if loss < best_loss:
            best_loss, best_theta = loss, theta.copy()
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            break
        lr = schedule_lr(scheduler, step)
        velocity = momentum * velocity + grad
        theta = theta - lr * velocity
        steps = step + 1
    else:
        theta = best_theta

    final_loss = eval_loss(field, theta)
    final_gnorm = float(np.linalg.norm(eval_grad(field, theta)))
    return Minimum(params=theta, loss=final_loss, grad_norm=final_gnorm,
                   seed=seed, steps=steps, converged=final_gnorm <= tol, tol=tol)


def sample_minima(field: ScalarField, count: int, seed: int = 0,
                  init_scale: float = 1.0, scheduler: SchedulerSpec | None = None,
                  momentum: float = 0.9, max_steps: int = 10000,
                  tol: float = DEFAULT_TOL) -> list[Minimum]:
    """Train ``count`` minima from seeded uniform initializations.

    Deterministic for a fixed seed. A diverging initialization is redrawn
    up to 3 times before the whole call fails.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if scheduler is None:
        scheduler = fixed_lr(1e-2)
    rng = np.random.default_rng(seed)
    minima = []
    for _ in range(count):
        last_exc = None
        for _attempt in range(3):
            init = rng.uniform(-init_scale, init_scale, size=field.dim)
            try:
                minima.append(find_minimum(field, init, scheduler, momentum=momentum,
                                           max_steps=max_steps, tol=tol, seed=seed))
                last_exc = None
                break
            except DivergenceError as exc:
                last_exc = exc
        if last_exc is not None:
            raise last_exc
    return minima


def minimum_to_dict(m: Minimum) -> dict:
    return {
        "params": [float(x) for x in m.params],
        "loss": float(m.loss),
        "grad_norm": float(m.grad_norm),
        "seed": int(m.seed),
        "converged": bool(m.converged),
    }


def minimum_from_dict(d: dict) -> Minimum:
    return Minimum(params=np.array(d["params"], dtype=np.float64),
                   loss=float(d["loss"]), grad_norm=float(d["grad_norm"]),
                   seed=int(d["seed"]), steps=0, converged=bool(d["converged"]))


def save_minima(minima, path) -> None:
    """Write minima as a JSON array of records with a fixed key order."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([minimum_to_dict(m) for m in minima], fh, indent=2)
        fh.write("\n")


def load_minima(path) -> list[Minimum]:
    with open(path, "r", encoding="utf-8") as fh:
        return [minimum_from_dict(d) for d in json.load(fh)]
