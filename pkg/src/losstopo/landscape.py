"""Differentiable scalar fields over flat parameter vectors.

A parameter vector is a finite 1-D float64 array; a field exposes ``value``
and ``gradient`` at such a vector. Ships three analytic benchmark
landscapes and a small fully-connected classifier loss with hand-rolled
backpropagation, so path and simplex optimizers can treat networks and
toy surfaces identically. Fields are immutable after construction and
safe for concurrent read-only evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DatasetError, DimensionMismatchError, NonFiniteValueError

BUILTIN_NAMES = ("double_well_1d", "gaussian_mixture_2d", "quadratic_bowl")


def as_params(coords) -> np.ndarray:
    """Validate and return a finite 1-D float64 parameter vector."""
    theta = np.asarray(coords, dtype=np.float64)
    if theta.ndim != 1:
        raise DimensionMismatchError(1, theta.ndim, "parameter vector must be 1-D")
    if not np.all(np.isfinite(theta)):
        raise NonFiniteValueError("parameter vector", theta)
    return theta


class ScalarField:
    """Base class: a differentiable scalar function on R^dim.

    Subclasses implement ``_value`` and ``_gradient`` on validated
    vectors. ``batch`` restricts data-backed fields to a subset of
    samples; analytic fields reject it.
    """

    dim: int = 0

    def value(self, theta: np.ndarray, batch=None) -> float:
        if batch is not None:
            raise ValueError(f"{type(self).__name__} does not support batches")
        return self._value(theta)

    def gradient(self, theta: np.ndarray, batch=None) -> np.ndarray:
        if batch is not None:
            raise ValueError(f"{type(self).__name__} does not support batches")
        return self._gradient(theta)

    def _value(self, theta: np.ndarray) -> float:
        raise NotImplementedError

    def _gradient(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def eval_loss(field: ScalarField, theta, batch=None) -> float:
    """Evaluate the field's loss at theta, with dimension and finiteness checks."""
    theta = as_params(theta)
    if theta.size != field.dim:
        raise DimensionMismatchError(field.dim, theta.size, "eval_loss")
    val = float(field.value(theta, batch=batch))
    if not np.isfinite(val):
        raise NonFiniteValueError("loss", theta)
    return val


def eval_loss_many(field: ScalarField, points: np.ndarray, batch=None) -> np.ndarray:
    """Loss at each row of ``points``, using the field's vectorized path if any."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != field.dim:
        raise DimensionMismatchError(field.dim, points.shape[-1], "eval_loss_many")
    if batch is None and hasattr(field, "value_many"):
        vals = np.asarray(field.value_many(points), dtype=np.float64)
    else:
        vals = np.array([field.value(p, batch=batch) for p in points])
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise NonFiniteValueError("loss", points[bad])
    return vals


def eval_grad(field: ScalarField, theta, batch=None) -> np.ndarray:
    """Evaluate the field's gradient at theta, with the same checks as eval_loss."""
    theta = as_params(theta)
    if theta.size != field.dim:
        raise DimensionMismatchError(field.dim, theta.size, "eval_grad")
    g = np.asarray(field.gradient(theta, batch=batch), dtype=np.float64)
    if g.shape != (field.dim,):
        raise DimensionMismatchError(field.dim, g.size, "gradient shape")
    if not np.all(np.isfinite(g)):
        raise NonFiniteValueError("gradient", theta)
    return g


def eval_grad_many(field: ScalarField, points: np.ndarray, batch=None) -> np.ndarray:
    """Gradient at each row of ``points``; one row of the result per input row."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != field.dim:
        raise DimensionMismatchError(field.dim, points.shape[-1], "eval_grad_many")
    if batch is None and hasattr(field, "gradient_many"):
        grads = np.asarray(field.gradient_many(points), dtype=np.float64)
    else:
        grads = np.array([field.gradient(p, batch=batch) for p in points])
    if not np.all(np.isfinite(grads)):
        bad = int(np.flatnonzero(~np.isfinite(grads).all(axis=1))[0])
        raise NonFiniteValueError("gradient", points[bad])
    return grads


class QuadraticBowl(ScalarField):
    """L(theta) = 0.5 * ||theta||^2, the convex sanity case."""

    def __init__(self, dim: int = 2):
        self.dim = int(dim)
        self.default_box = tuple((-2.0, 2.0) for _ in range(self.dim))

    def _value(self, theta):
        return 0.5 * float(theta @ theta)

    def _gradient(self, theta):
        return theta.copy()

    def value_many(self, points: np.ndarray) -> np.ndarray:
        return 0.5 * np.sum(points * points, axis=-1)

    def gradient_many(self, points: np.ndarray) -> np.ndarray:
        return points.copy()


class DoubleWell1D(ScalarField):
    """f(x) = x^4 - x^2: two minima at +-1/sqrt(2) of depth -1/4, hump at 0."""

    dim = 1
    default_box = ((-2.0, 2.0),)

    def _value(self, theta):
        x = theta[0]
        return float(x ** 4 - x ** 2)

    def _gradient(self, theta):
        x = theta[0]
        return np.array([4.0 * x ** 3 - 2.0 * x])

    def value_many(self, points: np.ndarray) -> np.ndarray:
        x = points[..., 0]
        return x ** 4 - x ** 2

    def gradient_many(self, points: np.ndarray) -> np.ndarray:
        x = points[..., 0]
        return (4.0 * x ** 3 - 2.0 * x)[:, None]


class GaussianMixture2D(ScalarField):
    """Seeded sum of 3-6 negated Gaussian bumps with well-separated depths.

    Bump centers sit on a jittered 3x3 lattice (min separation ~1.0, widths
    <= 0.25), and depths step by >= 0.15 with jitter < 0.05, so the sorted
    local-minimum values keep gaps >= 0.05 despite cross-talk between bumps
    (bounded by exp(-8) per neighbor at 4 sigma separation).
    """

    dim = 2
    default_box = ((-2.5, 2.5), (-2.5, 2.5))

    def __init__(self, seed: int):
        rng = np.random.default_rng(seed)
        self.seed = int(seed)
        n = int(rng.integers(3, 7))
        lattice = np.array([(x, y) for x in (-1.4, 0.0, 1.4) for y in (-1.4, 0.0, 1.4)])
        cells = rng.choice(len(lattice), size=n, replace=False)
        self.centers = lattice[cells] + rng.uniform(-0.2, 0.2, size=(n, 2))
        self.depths = 1.0 + 0.15 * np.arange(n) + rng.uniform(0.0, 0.05, size=n)
        self.widths = rng.uniform(0.18, 0.25, size=n)

    def _bumps(self, theta):
        d2 = np.sum((self.centers - theta) ** 2, axis=1)
        return self.depths * np.exp(-d2 / (2.0 * self.widths ** 2))

    def _value(self, theta):
        return float(-np.sum(self._bumps(theta)))

    def _gradient(self, theta):
        b = self._bumps(theta)
        return (b / self.widths ** 2) @ (theta - self.centers)

    def value_many(self, points: np.ndarray) -> np.ndarray:
        d2 = np.sum((points[..., None, :] - self.centers) ** 2, axis=-1)
        return -np.sum(self.depths * np.exp(-d2 / (2.0 * self.widths ** 2)), axis=-1)

    def gradient_many(self, points: np.ndarray) -> np.ndarray:
        diff = points[:, None, :] - self.centers          # (N, n_bumps, 2)
        d2 = np.sum(diff ** 2, axis=-1)
        w = self.depths * np.exp(-d2 / (2.0 * self.widths ** 2)) / self.widths ** 2
        return np.einsum("nk,nkd->nd", w, diff)


def make_builtin(name: str, seed: int = 0) -> ScalarField:
    """Construct one of the builtin benchmark landscapes by name."""
    if name == "double_well_1d":
        return DoubleWell1D()
    if name == "gaussian_mixture_2d":
        return GaussianMixture2D(seed)
    if name == "quadratic_bowl":
        return QuadraticBowl()
    raise ValueError(f"unknown builtin landscape '{name}'; choose from {BUILTIN_NAMES}")


@dataclass(frozen=True)
class Dataset:
    """Classification samples: row-major features and integer class labels."""

    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "features", np.asarray(self.features, dtype=np.float64))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise DatasetError("feature rows and label count differ")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DatasetError("label out of range")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


def load_dataset(path) -> Dataset:
    """Load a CSV dataset with header ``f0,...,fk,label``. Row order is kept."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise DatasetError("empty file")
    header = [c.strip() for c in lines[0].split(",")]
    if len(header) < 2 or header[-1] != "label":
        raise DatasetError("header must be f0,...,fk,label", line=1)
    for k, col in enumerate(header[:-1]):
        if col != f"f{k}":
            raise DatasetError(f"expected column 'f{k}', found '{col}'", line=1)
    n_feat = len(header) - 1
    feats, labels = [], []
    for i, ln in enumerate(lines[1:], start=2):
        cells = [c.strip() for c in ln.split(",")]
        if len(cells) != len(header):
            raise DatasetError(f"expected {len(header)} columns, found {len(cells)}", line=i)
        try:
            row = [float(c) for c in cells[:-1]]
        except ValueError as exc:
            raise DatasetError(f"non-numeric feature: {exc}", line=i) from None
        try:
            lab = int(cells[-1])
        except ValueError:
            raise DatasetError(f"non-integer label '{cells[-1]}'", line=i) from None
        if lab < 0:
            raise DatasetError(f"label out of range: {lab}", line=i)
        feats.append(row)
        labels.append(lab)
    if not feats:
        raise DatasetError("empty dataset")
    n_classes = max(max(labels) + 1, 2)
    return Dataset(np.array(feats), np.array(labels), n_classes)


def two_moons(n_samples: int = 400, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Seeded two interleaved half-circles, the standard 2-class toy set."""
    rng = np.random.default_rng(seed)
    n0 = n_samples // 2
    n1 = n_samples - n0
    t0 = rng.uniform(0.0, np.pi, n0)
    t1 = rng.uniform(0.0, np.pi, n1)
    outer = np.column_stack([np.cos(t0), np.sin(t0)])
    inner = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    pts = np.vstack([outer, inner]) + rng.normal(0.0, noise, size=(n_samples, 2))
    labels = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    return Dataset(pts, labels, 2)


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected architecture: layer widths (input first) and activation."""

    layer_widths: tuple
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if len(self.layer_widths) < 2:
            raise ValueError("need at least input and output widths")
        if any(w <= 0 for w in self.layer_widths):
            raise ValueError("layer widths must be positive")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation '{self.activation}'")

    @property
    def param_count(self) -> int:
        ws = self.layer_widths
        return sum(ws[i] * ws[i + 1] + ws[i + 1] for i in range(len(ws) - 1))


class MlpField(ScalarField):
    """Mean cross-entropy of a small MLP, differentiated by reverse-mode sweep.

    Parameters are flattened per layer as weights (row-major) then biases.
    An index list restricts the loss to those samples; the default is the
    full dataset. Batches are always caller-supplied so runs stay replayable.
    """

    def __init__(self, spec: MlpSpec, data: Dataset, batch=None):
        if spec.layer_widths[0] != data.n_features:
            raise DimensionMismatchError(data.n_features, spec.layer_widths[0],
                                         "input width vs dataset features")
        if spec.layer_widths[-1] != data.n_classes:
            raise DimensionMismatchError(data.n_classes, spec.layer_widths[-1],
                                         "output width vs dataset classes")
        self.spec = spec
        self.data = data
        self.dim = spec.param_count
        self._batch = None if batch is None else np.asarray(batch, dtype=np.int64)

    @property
    def n_samples(self) -> int:
        return self.data.n_samples

    def _select(self, batch):
        idx = self._batch if batch is None else np.asarray(batch, dtype=np.int64)
        if idx is None:
            return self.data.features, self.data.labels
        return self.data.features[idx], self.data.labels[idx]

    def unflatten(self, theta: np.ndarray):
        """Split a flat parameter vector into per-layer (W, b) pairs."""
        ws = self.spec.layer_widths
        layers, off = [], 0
        for i in range(len(ws) - 1):
            n_in, n_out = ws[i], ws[i + 1]
            w = theta[off:off + n_in * n_out].reshape(n_in, n_out)
            off += n_in * n_out
            b = theta[off:off + n_out]
            off += n_out
            layers.append((w, b))
        return layers

    def _forward(self, theta, x):
        layers = self.unflatten(theta)
        acts, pre = [x], []
        h = x
        for li, (w, b) in enumerate(layers):
            z = h @ w + b
            pre.append(z)
            if li < len(layers) - 1:
                h = np.maximum(z, 0.0) if self.spec.activation == "relu" else np.tanh(z)
            else:
                h = z
            acts.append(h)
        return layers, acts, pre

    @staticmethod
    def _log_softmax(logits):
        shifted = logits - logits.max(axis=1, keepdims=True)
        return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))

    def value(self, theta, batch=None):
        x, y = self._select(batch)
        _, acts, _ = self._forward(theta, x)
        logp = self._log_softmax(acts[-1])
        return float(-np.mean(logp[np.arange(len(y)), y]))

    def gradient(self, theta, batch=None):
        x, y = self._select(batch)
        layers, acts, pre = self._forward(theta, x)
        n = len(y)
        logp = self._log_softmax(acts[-1])
        delta = np.exp(logp)
        delta[np.arange(n), y] -= 1.0
        delta /= n
        grads = []
        for li in range(len(layers) - 1, -1, -1):
            w, _ = layers[li]
            gw = acts[li].T @ delta
            gb = delta.sum(axis=0)
            grads.append((gw, gb))
            if li > 0:
                delta = delta @ w.T
                if self.spec.activation == "relu":
                    delta = delta * (pre[li - 1] > 0.0)
                else:
                    delta = delta * (1.0 - np.tanh(pre[li - 1]) ** 2)
        grads.reverse()
        return np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])


def make_mlp_field(spec: MlpSpec, data: Dataset, batch=None) -> MlpField:
    """Build the cross-entropy loss field for an MLP spec over a dataset."""
    return MlpField(spec, data, batch=batch)
