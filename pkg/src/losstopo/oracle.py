"""Ground-truth persistence for 1D/2D landscapes by dense grid sampling.

This module is the verification layer: it computes sublevel-set
persistence combinatorially on a lattice (union-find with the elder rule
for components; cubical column reduction for loops) and provides a
brute-force bottleneck matcher, all independent of the path/simplex
pipeline it is used to check.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .barcode import PersistenceDiagram, _diag_cost, _essential_cost, _pair_cost
from .errors import LossTopoError
from .landscape import ScalarField, eval_loss_many

BRUTE_MAX_POINTS = 8


@dataclass
class ScalarGrid:
    """Loss values sampled on a rectangular lattice."""

    values: np.ndarray
    box: tuple
    resolution: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        self.resolution = tuple(int(r) for r in self.resolution)
        if self.values.ndim not in (1, 2):
            raise LossTopoError("only 1-D and 2-D grids are supported")
        if self.values.shape != self.resolution:
            raise LossTopoError("grid shape does not match resolution")
        if any(r < 2 for r in self.resolution):
            raise LossTopoError("resolution must be >= 2 per axis")
        if not np.all(np.isfinite(self.values)):
            raise LossTopoError("grid contains non-finite values")

    def axis(self, k: int) -> np.ndarray:
        lo, hi = self.box[k]
        return np.linspace(lo, hi, self.resolution[k])


def grid_sample(field: ScalarField, box, resolution) -> ScalarGrid:
    """Sample the field on a lattice over ``box`` (per-axis (lo, hi) pairs)."""
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    if field.dim != len(box):
        raise LossTopoError(f"field dim {field.dim} vs {len(box)} box axes")
    if isinstance(resolution, int):
        resolution = (resolution,) * len(box)
    resolution = tuple(int(r) for r in resolution)
    axes = [np.linspace(lo, hi, r) for (lo, hi), r in zip(box, resolution)]
    if len(axes) == 1:
        pts = axes[0][:, None]
    else:
        xx, yy = np.meshgrid(axes[0], axes[1], indexing="ij")
        pts = np.column_stack([xx.ravel(), yy.ravel()])
    values = eval_loss_many(field, pts).reshape(resolution)
    return ScalarGrid(values=values, box=box, resolution=resolution)


# -- dimension 0: union-find over lattice vertices ---------------------------

def _grid_neighbors_flat(shape):
    """Pairs of flat indices for lattice edges (2-neighbor in 1D, 4 in 2D)."""
    if len(shape) == 1:
        n = shape[0]
        idx = np.arange(n - 1)
        return np.column_stack([idx, idx + 1])
    rows, cols = shape
    flat = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.column_stack([flat[:, :-1].ravel(), flat[:, 1:].ravel()])
    vert = np.column_stack([flat[:-1, :].ravel(), flat[1:, :].ravel()])
    return np.vstack([horiz, vert])


def _dim0_pairs(values_flat, shape):
    """Elder-rule merge pairs; ties broken by lexicographic lattice index."""
    n = values_flat.size
    order = np.argsort(values_flat, kind="stable")
    rank = np.empty(n, dtype=np.int64)
    rank[order] = np.arange(n)

    neighbor_lists = [[] for _ in range(n)]
    for a, b in _grid_neighbors_flat(shape):
        neighbor_lists[a].append(b)
        neighbor_lists[b].append(a)

    parent = np.arange(n)
    birth = np.arange(n)  # for roots: the component's founding vertex

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    pairs = []
    for v in order:
        for u in neighbor_lists[v]:
            if rank[u] > rank[v]:
                continue
            ru, rv = find(u), find(v)
            if ru == rv:
                continue
            if rank[birth[ru]] > rank[birth[rv]]:
                ru, rv = rv, ru
            pairs.append((values_flat[birth[rv]], values_flat[v]))
            parent[rv] = ru
    essential = float(values_flat[order[0]])
    return pairs, essential


# -- dimension 1: cubical column reduction -----------------------------------

def _dim1_pairs(values: np.ndarray):
    """Loop birth/death pairs on a 2-D grid by reducing the square boundaries.

    Rows are edges in filtration order; each reduced square column's lowest
    edge is the creator of the loop the square fills (standard clearing
    argument, so the edge/vertex reduction never needs to run here).
    """
    rows, cols = values.shape
    n_h = rows * (cols - 1)

    # edge table: value, tie-break key (type, i, j)
    h_vals = np.maximum(values[:, :-1], values[:, 1:]).ravel()
    v_vals = np.maximum(values[:-1, :], values[1:, :]).ravel()
    edge_vals = np.concatenate([h_vals, v_vals])
    h_i, h_j = np.divmod(np.arange(n_h), cols - 1)
    v_i, v_j = np.divmod(np.arange(v_vals.size), cols)
    code = np.concatenate([np.zeros(n_h, dtype=np.int64),
                           np.ones(v_vals.size, dtype=np.int64)])
    ei = np.concatenate([h_i, v_i])
    ej = np.concatenate([h_j, v_j])
    edge_order = np.lexsort((ej, ei, code, edge_vals))
    edge_rank = np.empty(edge_vals.size, dtype=np.int64)
    edge_rank[edge_order] = np.arange(edge_vals.size)

    # squares in filtration order
    sq_vals = np.maximum.reduce([values[:-1, :-1], values[:-1, 1:],
                                 values[1:, :-1], values[1:, 1:]]).ravel()
    sq_i, sq_j = np.divmod(np.arange(sq_vals.size), cols - 1)
    sq_order = np.lexsort((sq_j, sq_i, sq_vals))

    def square_column(k):
        i, j = int(sq_i[k]), int(sq_j[k])
        h_top = i * (cols - 1) + j
        h_bot = (i + 1) * (cols - 1) + j
        v_left = n_h + i * cols + j
        v_right = n_h + i * cols + (j + 1)
        return {int(edge_rank[h_top]), int(edge_rank[h_bot]),
                int(edge_rank[v_left]), int(edge_rank[v_right])}

    low_owner = {}
    reduced_cols = {}
    pairs = []
    for k in sq_order:
        col = square_column(k)
        while col:
            low = max(col)
            owner = low_owner.get(low)
            if owner is None:
                break
            col ^= reduced_cols[owner]
        if col:
            low = max(col)
            low_owner[low] = k
            reduced_cols[k] = col
            birth_val = float(edge_vals[edge_order[low]])
            pairs.append((birth_val, float(sq_vals[k])))
    return pairs


def sublevel_persistence(grid: ScalarGrid, max_dim: int | None = None):
    """Persistence diagrams of the sublevel filtration of a sampled grid.

    Dimension 0 uses union-find with the elder rule; dimension 1 (2-D
    grids only) uses cubical column reduction with the lower-star
    filtration (cell value = max over its vertices).
    """
    ndim = grid.values.ndim
    if max_dim is None:
        max_dim = ndim - 1
    pairs0, essential = _dim0_pairs(grid.values.ravel(), grid.values.shape)
    diagrams = [PersistenceDiagram(finite_points=pairs0, essential_births=[essential])]
    if ndim == 2 and max_dim >= 1:
        diagrams.append(PersistenceDiagram(finite_points=_dim1_pairs(grid.values)))
    return diagrams


# -- brute-force bottleneck ---------------------------------------------------

def brute_bottleneck(d1: PersistenceDiagram, d2: PersistenceDiagram) -> float:
    """Exact bottleneck distance by enumerating all partial matchings.

    Only for small diagrams (<= 8 finite points per side); use
    ``barcode.bottleneck_distance`` beyond that.
    """
    P, Q = d1.finite_points, d2.finite_points
    if len(P) > BRUTE_MAX_POINTS or len(Q) > BRUTE_MAX_POINTS:
        raise LossTopoError(
            f"brute matcher capped at {BRUTE_MAX_POINTS} points per side; "
            "use barcode.bottleneck_distance")
    ess_a, ess_b = d1.essential_births, d2.essential_births
    if len(ess_a) != len(ess_b):
        return math.inf
    if not ess_a:
        ess = 0.0
    elif len(ess_a) <= BRUTE_MAX_POINTS:
        ess = math.inf
        for perm in itertools.permutations(range(len(ess_b))):
            cost = max(abs(a - ess_b[p]) for a, p in zip(ess_a, perm))
            ess = min(ess, cost)
    else:
        ess = _essential_cost(ess_a, ess_b)

    diag_p = [_diag_cost(p) for p in P]
    diag_q = [_diag_cost(q) for q in Q]
    best = math.inf

    def recurse(i, used, current):
        nonlocal best
        if current >= best:
            return
        if i == len(P):
            rest = max((diag_q[j] for j in range(len(Q)) if j not in used),
                       default=0.0)
            best = min(best, max(current, rest))
            return
        recurse(i + 1, used, max(current, diag_p[i]))
        for j in range(len(Q)):
            if j not in used:
                recurse(i + 1, used | {j}, max(current, _pair_cost(P[i], Q[j])))

    recurse(0, frozenset(), 0.0)
    return max(ess, best)


# -- grid persistence to disk -------------------------------------------------

def save_grid(grid: ScalarGrid, path) -> None:
    """Write values as little-endian float64 with a JSON sidecar at path + '.json'."""
    with open(path, "wb") as fh:
        fh.write(np.ascontiguousarray(grid.values, dtype="<f8").tobytes())
    sidecar = {"box": [[lo, hi] for lo, hi in grid.box],
               "resolution": list(grid.resolution)}
    with open(f"{path}.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_grid(path) -> ScalarGrid:
    with open(f"{path}.json", "r", encoding="utf-8") as fh:
        sidecar = json.load(fh)
    resolution = tuple(int(r) for r in sidecar["resolution"])
    with open(path, "rb") as fh:
        values = np.frombuffer(fh.read(), dtype="<f8").reshape(resolution)
    return ScalarGrid(values=values.astype(np.float64),
                      box=tuple((lo, hi) for lo, hi in sidecar["box"]),
                      resolution=resolution)
