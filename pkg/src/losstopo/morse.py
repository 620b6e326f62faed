"""Index-r barcodes from gradient-flow-optimized sampled simplices.

Edges between minima are optimized as paths; triangles carry a
barycentric grid whose interior points flow against the gradient
component normal to the locally estimated tangent plane, with all faces
frozen first (vertices, then edges). The max-loss filtration over the
resulting complex feeds a mod-2 boundary reduction whose pairing gives
birth and death values per dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .barcode import PersistenceDiagram, bottleneck_distance
from .errors import (DegenerateChordError, DegenerateTangentError,
                     DivergenceError, LossTopoError, NonFiniteValueError)
from .landscape import ScalarField, eval_grad, eval_loss, eval_loss_many
from .pathopt import PathConfig, optimize_path
from .trainer import SchedulerSpec, schedule_lr

TANGENT_EPS = 1e-12


@dataclass(frozen=True)
class SimplexConfig:
    """Hyperparameters shared by edge and triangle optimization."""

    epochs: int = 100
    scheduler: SchedulerSpec = field(default_factory=lambda: SchedulerSpec(
        m1=90, m2=100, lr_max=2e-3, lr_min=1.25e-4))
    l2: float = 0.0
    grid_depth: int | None = None  # None: 8 for 1-complexes, 6 for 2-complexes


@dataclass
class SampledSimplex:
    """An optimized r-simplex: sample points and its max-loss filtration value."""

    r: int
    vertex_ids: tuple
    sample_points: np.ndarray | None
    filtration_value: float
    bary_coords: list | None = None
    trace: np.ndarray | None = None


@dataclass
class FiltrationComplex:
    """Simplices by dimension with mod-2 boundary matrices, filtration-ready."""

    simplices: dict          # dim -> list[SampledSimplex], sorted by vertex_ids
    boundaries: dict         # r -> uint8 matrix, (r-1)-simplices x r-simplices
    r_max: int
    clamp_count: int = 0

    def index_of(self, dim: int, vertex_ids: tuple) -> int:
        for k, s in enumerate(self.simplices[dim]):
            if s.vertex_ids == vertex_ids:
                return k
        raise KeyError(vertex_ids)


def _vertex_params(v) -> np.ndarray:
    return np.asarray(getattr(v, "params", v), dtype=np.float64)


def _bary_grid(depth: int):
    """Barycentric index triples (i, j, k), i + j + k = depth, lexicographic."""
    return [(i, j, depth - i - j)
            for i in range(depth, -1, -1) for j in range(depth - i, -1, -1)]


def _tangent_basis(neighbors: np.ndarray, coords) -> np.ndarray:
    """Best-fit 2-plane through a sample point's grid star."""
    centered = neighbors - neighbors.mean(axis=0)
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    if len(s) < 2 or s[1] <= TANGENT_EPS * max(s[0], 1.0):
        raise DegenerateTangentError(coords)
    return vt[:2]


def optimize_simplex(field_: ScalarField, vertices, grid_depth: int,
                     config: SimplexConfig = SimplexConfig(),
                     faces=None) -> SampledSimplex:
    """Gradient-flow a sampled r-simplex (r in {1, 2}) with frozen faces.

    A 1-simplex is exactly a path between its two vertices. For a
    2-simplex the three boundary edges must already be optimized (they
    are computed here when ``faces`` is omitted); interior grid points
    move against the out-of-plane gradient component, the plane being
    estimated from the six lattice neighbors.
    """
    xs = [_vertex_params(v) for v in vertices]
    r = len(xs) - 1
    if r not in (1, 2):
        raise LossTopoError(f"only 1- and 2-simplices are supported, got r={r}")
    for a, b in combinations(range(r + 1), 2):
        if np.linalg.norm(xs[a] - xs[b]) <= 1e-12:
            raise DegenerateChordError(a)
    if grid_depth < 2:
        raise LossTopoError("grid_depth must be >= 2")

    if r == 1:
        pcfg = PathConfig(n_points=grid_depth - 1, epochs=config.epochs,
                          scheduler=config.scheduler, l2=config.l2,
                          refine_every=0, alpha_grid=())
        path, trace = optimize_path(field_, xs[0], xs[1], pcfg)
        filt = float(np.max(eval_loss_many(field_, path.points)))
        return SampledSimplex(r=1, vertex_ids=(0, 1), sample_points=path.points,
                              filtration_value=filt, trace=trace.max_loss)

    d = grid_depth
    if faces is None:
        faces = [optimize_simplex(field_, [xs[a], xs[b]], d, config)
                 for a, b in ((0, 1), (0, 2), (1, 2))]
    for f in faces:
        if f.sample_points.shape[0] != d + 1:
            raise LossTopoError("face sample count does not match grid_depth")

    coords = _bary_grid(d)
    pos = {c: k for k, c in enumerate(coords)}
    pts = np.array([(i * xs[0] + j * xs[1] + k * xs[2]) / d for i, j, k in coords])
    # boundary rows are overwritten with the frozen optimized edges
    e01, e02, e12 = (f.sample_points for f in faces)
    for m in range(d + 1):
        pts[pos[(d - m, m, 0)]] = e01[m]
        pts[pos[(d - m, 0, m)]] = e02[m]
        pts[pos[(0, d - m, m)]] = e12[m]

    interior = [c for c in coords if all(x >= 1 for x in c)]
    offsets = ((1, -1, 0), (-1, 1, 0), (1, 0, -1), (-1, 0, 1), (0, 1, -1), (0, -1, 1))
    trace = []
    for epoch in range(config.epochs):
        eta = schedule_lr(config.scheduler,
                          epoch * config.scheduler.batches_per_epoch)
        for c in interior:
            i, j, k = c
            neigh = np.array([pts[pos[(i + di, j + dj, k + dk)]]
                              for di, dj, dk in offsets])
            basis = _tangent_basis(neigh, c)
            try:
                grad = eval_grad(field_, pts[pos[c]])
            except NonFiniteValueError as exc:
                raise DivergenceError(
                    f"non-finite gradient at grid point {c}, epoch {epoch}",
                    step=epoch) from exc
            if config.l2 > 0.0:
                grad = grad + config.l2 * pts[pos[c]]
            normal = grad - basis.T @ (basis @ grad)
            pts[pos[c]] = pts[pos[c]] - eta * normal
        trace.append(float(np.max(eval_loss_many(field_, pts))))

    filt = float(np.max(eval_loss_many(field_, pts)))
    return SampledSimplex(r=2, vertex_ids=(0, 1, 2), sample_points=pts,
                          filtration_value=filt, bary_coords=coords,
                          trace=np.array(trace))


def build_complex(minima, field_: ScalarField, r_max: int,
                  config: SimplexConfig = SimplexConfig()) -> FiltrationComplex:
    """Optimize the full r_max-skeleton over all minima, faces frozen first.

    Filtration values are clamped up to the max over faces if optimization
    ever left a face above its coface; the clamp counter records how often
    (zero when face sample points are shared, as they are here).
    """
    if r_max not in (1, 2):
        raise LossTopoError("r_max must be 1 or 2")
    n = len(minima)
    if n < r_max + 1:
        raise LossTopoError(f"need at least {r_max + 1} minima for r_max={r_max}")
    depth = config.grid_depth if config.grid_depth is not None else (8 if r_max == 1 else 6)

    params = [_vertex_params(m) for m in minima]
    vertices = [SampledSimplex(r=0, vertex_ids=(i,), sample_points=params[i][None, :],
                               filtration_value=eval_loss(field_, params[i]))
                for i in range(n)]

    clamp = 0
    edges = {}
    for i, j in combinations(range(n), 2):
        s = optimize_simplex(field_, [params[i], params[j]], depth, config)
        s.vertex_ids = (i, j)
        floor = max(vertices[i].filtration_value, vertices[j].filtration_value)
        if s.filtration_value < floor:
            s.filtration_value = floor
            clamp += 1
        edges[(i, j)] = s

    triangles = {}
    if r_max == 2:
        for i, j, k in combinations(range(n), 3):
            faces = [edges[(i, j)], edges[(i, k)], edges[(j, k)]]
            s = optimize_simplex(field_, [params[i], params[j], params[k]],
                                 depth, config, faces=faces)
            s.vertex_ids = (i, j, k)
            floor = max(f.filtration_value for f in faces)
            if s.filtration_value < floor:
                s.filtration_value = floor
                clamp += 1
            triangles[(i, j, k)] = s

    simplices = {0: vertices, 1: [edges[key] for key in sorted(edges)]}
    if r_max == 2:
        simplices[2] = [triangles[key] for key in sorted(triangles)]
    return _assemble_complex(simplices, r_max, clamp)


def make_complex(vertex_values, edge_values, triangle_values=None) -> FiltrationComplex:
    """Build a complex from prescribed filtration values (no optimization).

    ``edge_values`` maps (i, j) to a value; ``triangle_values`` maps
    (i, j, k). Used for synthetic complexes and for re-reducing a
    1-skeleton whose edge values come from path optimization.
    """
    vertices = [SampledSimplex(r=0, vertex_ids=(i,), sample_points=None,
                               filtration_value=float(v))
                for i, v in enumerate(vertex_values)]
    edges = [SampledSimplex(r=1, vertex_ids=tuple(sorted(k)), sample_points=None,
                            filtration_value=float(v))
             for k, v in sorted(edge_values.items())]
    simplices = {0: vertices, 1: edges}
    r_max = 1
    if triangle_values is not None:
        simplices[2] = [SampledSimplex(r=2, vertex_ids=tuple(sorted(k)),
                                       sample_points=None, filtration_value=float(v))
                        for k, v in sorted(triangle_values.items())]
        r_max = 2
    return _assemble_complex(simplices, r_max, 0)


def _assemble_complex(simplices, r_max, clamp) -> FiltrationComplex:
    boundaries = {}
    for r in range(1, r_max + 1):
        lower = {s.vertex_ids: k for k, s in enumerate(simplices[r - 1])}
        mat = np.zeros((len(simplices[r - 1]), len(simplices[r])), dtype=np.uint8)
        for col, s in enumerate(simplices[r]):
            for face in combinations(s.vertex_ids, r):
                mat[lower[face], col] = 1
        boundaries[r] = mat
    cx = FiltrationComplex(simplices=simplices, boundaries=boundaries,
                           r_max=r_max, clamp_count=clamp)
    _check_monotone(cx)
    return cx


def _check_monotone(cx: FiltrationComplex) -> None:
    for r in range(1, cx.r_max + 1):
        lower = {s.vertex_ids: s.filtration_value for s in cx.simplices[r - 1]}
        for s in cx.simplices[r]:
            for face in combinations(s.vertex_ids, r):
                if lower[face] > s.filtration_value:
                    raise LossTopoError(
                        f"non-monotone filtration: face {face} above {s.vertex_ids}")


def reduce_complex(cx: FiltrationComplex):
    """Persistence diagrams per dimension by mod-2 column reduction.

    Columns are processed in filtration order (ties: lower dimension,
    then lexicographic vertex tuple); each pairing contributes a point
    (creating value, killing value) in the creator's dimension, and
    unpaired creators become essential births.
    """
    _check_monotone(cx)
    cells = []
    for dim in range(cx.r_max + 1):
        for k, s in enumerate(cx.simplices[dim]):
            cells.append((s.filtration_value, dim, s.vertex_ids, k))
    order = sorted(range(len(cells)), key=lambda c: cells[c][:3])
    rank = {cells[c][1:3]: pos for pos, c in enumerate(order)}

    low_owner, reduced_cols = {}, {}
    pairs, positive = [], []
    for pos, c in enumerate(order):
        filt, dim, vid, k = cells[c]
        col = set()
        if dim > 0:
            col = {rank[(dim - 1, face)] for face in combinations(vid, dim)}
        while col:
            low = max(col)
            owner = low_owner.get(low)
            if owner is None:
                break
            col ^= reduced_cols[owner]
        if col:
            low = max(col)
            low_owner[low] = pos
            reduced_cols[pos] = col
            pairs.append((low, pos))
        else:
            positive.append(pos)

    info = {pos: cells[c] for pos, c in enumerate(order)}
    points = {dim: [] for dim in range(cx.r_max + 1)}
    essentials = {dim: [] for dim in range(cx.r_max + 1)}
    killed = set()
    for low, pos in pairs:
        killed.add(low)
        birth_cell, death_cell = info[low], info[pos]
        points[birth_cell[1]].append((birth_cell[0], death_cell[0]))
    for pos in positive:
        if pos not in killed:
            cell = info[pos]
            essentials[cell[1]].append(cell[0])
    return [PersistenceDiagram(finite_points=points[dim],
                               essential_births=essentials[dim])
            for dim in range(cx.r_max + 1)]


def index_r_to_score(diagrams, r: int) -> float:
    """Obstruction score in dimension r: distance to the obstruction-free ideal.

    For r = 0 the ideal keeps the single global-minimum essential class;
    for r >= 1 the ideal diagram is empty, so the score is half the
    longest dim-r bar.
    """
    if r < 0 or r >= len(diagrams):
        raise LossTopoError(f"no dimension-{r} diagram available")
    if r == 0:
        births = diagrams[0].essential_births
        ideal = PersistenceDiagram(essential_births=[min(births)] if births else [])
    else:
        ideal = PersistenceDiagram()
    return bottleneck_distance(diagrams[r], ideal)
