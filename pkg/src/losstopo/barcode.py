"""Barcodes of minima, bottleneck distance, and the obstruction score.

The barcode attaches to every local minimum the segment from its loss to
the lowest height a path must climb before reaching strictly lower loss;
the single global minimum carries the half-infinite bar. Deaths are read
off the connectivity structure of pairwise optimized paths: merging the
per-pair peak losses with a union-find sweep charges each non-global
minimum the min-max climb over concatenations of optimized paths, the
tightest upper estimate the sampled paths support.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, LossTopoError
from .landscape import ScalarField
from .pathopt import PathConfig, optimize_path, path_max_loss

EPS_TIE = 1e-9     # loss ties below this are broken by minimum id
EPS_ZERO = 1e-9    # finite segments at most this long are noise
DEDUP_EPS = 1e-6   # minima closer than this are the same basin


@dataclass(frozen=True)
class Segment:
    """One bar: [loss at the minimum, lowest escape height]."""

    birth: float
    death: float
    minimum_id: int = 0

    def __post_init__(self):
        if self.death < self.birth:
            raise ValueError(f"segment death {self.death} below birth {self.birth}")

    @property
    def length(self) -> float:
        return self.death - self.birth


@dataclass
class Barcode:
    """Finite segments plus the essential half-line of the global minimum."""

    essential: Segment
    segments: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not math.isinf(self.essential.death):
            raise ValueError("the essential segment must have infinite death")
        for s in self.segments:
            if math.isinf(s.death):
                raise ValueError("only the essential segment may be infinite")
            if s.birth < self.essential.birth - EPS_TIE:
                raise ValueError("a segment is born below the essential birth")


@dataclass
class PersistenceDiagram:
    """Finite (birth, death) points plus separately-kept essential births."""

    finite_points: list = field(default_factory=list)
    essential_births: list = field(default_factory=list)

    def __post_init__(self):
        cleaned = []
        for b, d in self.finite_points:
            b, d = float(b), float(d)
            if d > b:  # zero-length bars are dropped on construction
                cleaned.append((b, d))
        self.finite_points = cleaned
        self.essential_births = [float(b) for b in self.essential_births]


def to_diagram(b: Barcode) -> PersistenceDiagram:
    """Re-encode a barcode as a diagram, dropping noise-length segments."""
    pts = [(s.birth, s.death) for s in b.segments if s.length > EPS_ZERO]
    return PersistenceDiagram(finite_points=pts, essential_births=[b.essential.birth])


def ideal_barcode(global_min: float) -> Barcode:
    """Barcode of a single-minimum landscape at the given global level."""
    if not math.isfinite(global_min):
        raise ValueError("global minimum must be finite")
    return Barcode(essential=Segment(global_min, math.inf, 0), segments=[])


# -- bottleneck distance ----------------------------------------------------

def _pair_cost(p, q) -> float:
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]))


def _diag_cost(p) -> float:
    return 0.5 * (p[1] - p[0])


def _essential_cost(a, b) -> float:
    if len(a) != len(b):
        return math.inf
    if not a:
        return 0.0
    a, b = sorted(a), sorted(b)
    return max(abs(x - y) for x, y in zip(a, b))


def _matching_feasible(P, Q, diag_p, diag_q, c: float) -> bool:
    """Perfect matching check in the diagram-with-diagonal bipartite graph.

    Left side: points of P then one diagonal slot per point of Q; right
    side: points of Q then one diagonal slot per point of P. Diagonal
    slots pair with each other for free.
    """
    n, m = len(P), len(Q)
    size = n + m
    adj = []
    for i in range(n):
        row = [j for j in range(m) if _pair_cost(P[i], Q[j]) <= c]
        if diag_p[i] <= c:
            row.append(m + i)
        adj.append(row)
    for j in range(m):
        row = list(range(m, m + n))
        if diag_q[j] <= c:
            row.append(j)
        adj.append(row)

    match_right = [-1] * size

    def augment(u, seen):
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                if match_right[v] == -1 or augment(match_right[v], seen):
                    match_right[v] = u
                    return True
        return False

    matched = 0
    for u in range(size):
        if augment(u, [False] * size):
            matched += 1
    return matched == size


def bottleneck_distance(d1: PersistenceDiagram, d2: PersistenceDiagram) -> float:
    """Exact sup-norm bottleneck distance between two diagrams.

    Finite points match each other or their diagonal projection;
    essential births match only essential births, and a count mismatch
    makes the distance infinite. Computed by binary search over the
    candidate costs with bipartite feasibility checks.
    """
    ess = _essential_cost(d1.essential_births, d2.essential_births)
    if math.isinf(ess):
        return math.inf
    P, Q = d1.finite_points, d2.finite_points
    if not P and not Q:
        return ess
    diag_p = [_diag_cost(p) for p in P]
    diag_q = [_diag_cost(q) for q in Q]
    candidates = set(diag_p) | set(diag_q) | {0.0}
    for p in P:
        for q in Q:
            candidates.add(_pair_cost(p, q))
    candidates = sorted(candidates)
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if _matching_feasible(P, Q, diag_p, diag_q, candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return max(ess, candidates[lo])


def to_score(b: Barcode) -> float:
    """Bottleneck distance to the ideal single-minimum barcode at the same level."""
    ideal = ideal_barcode(b.essential.birth)
    return bottleneck_distance(to_diagram(b), to_diagram(ideal))


# -- Algorithm: barcode of minima from pairwise paths -----------------------

def _is_lower(loss_q: float, id_q: int, loss_p: float, id_p: int) -> bool:
    """Whether minimum q counts as strictly lower than p (ties by id)."""
    if loss_q < loss_p - EPS_TIE:
        return True
    return abs(loss_q - loss_p) <= EPS_TIE and id_q < id_p


def _dedup_minima(minima):
    """Drop rediscoveries of the same basin, keeping the first occurrence."""
    kept = []
    for idx, m in enumerate(minima):
        if all(np.linalg.norm(m.params - r.params) >= DEDUP_EPS for _, r in kept):
            kept.append((idx, m))
    return kept


def _union_find_deaths(order, edges):
    """Deaths via the elder rule over weighted edges between minima.

    ``order`` lists (id, loss) from eldest to youngest; ``edges`` maps
    (id_lo, id_hi) to a merge height. Returns {id: death} for every
    non-eldest minimum; the eldest survives with an infinite bar.
    """
    age = {mid: k for k, (mid, _) in enumerate(order)}
    parent = list(range(len(order)))
    eldest = list(range(len(order)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    deaths = {}
    for (u, v), w in sorted(edges.items(), key=lambda kv: (kv[1], kv[0])):
        ru, rv = find(age[u]), find(age[v])
        if ru == rv:
            continue
        if eldest[ru] > eldest[rv]:
            ru, rv = rv, ru
        # rv's component is the younger: its founding minimum dies here
        deaths[order[eldest[rv]][0]] = w
        parent[rv] = ru
    return deaths


def compute_barcode(minima, field_: ScalarField, config: PathConfig = PathConfig(),
                    prune_k: int | None = None, workers: int = 1) -> Barcode:
    """Assemble the barcode of minima from pairwise optimized paths.

    Minima are processed in increasing loss; for each one, a path is
    optimized to every strictly lower minimum (optionally only the
    ``prune_k`` nearest) and the peak losses of all paths feed the death
    computation. Diverging pairs are skipped and recorded in the metadata.
    Each returned death is an upper estimate of the true escape height:
    every optimized path (and concatenation of them) is a feasible escape.
    """
    if not minima:
        raise LossTopoError("cannot build a barcode from an empty minima list")
    for m in minima:
        if m.params.size != field_.dim:
            raise LossTopoError("minima and field dimensions differ")
    kept = _dedup_minima(minima)
    order = sorted(kept, key=lambda im: (im[1].loss, im[0]))

    pairs = []
    for pid, p in order:
        lowers = [(qid, q) for qid, q in kept
                  if qid != pid and _is_lower(q.loss, qid, p.loss, pid)]
        if prune_k is not None and len(lowers) > prune_k:
            lowers.sort(key=lambda qq: float(np.linalg.norm(qq[1].params - p.params)))
            lowers = lowers[:prune_k]
        pairs.extend((pid, p, qid, q) for qid, q in lowers)

    def run_pair(task):
        pid, p, qid, q = task
        path, _ = optimize_path(field_, p, q, config)
        val, _ = path_max_loss(field_, path, config.alpha_grid)
        return val

    edges, skipped = {}, []
    if workers > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda t: _safe_pair(run_pair, t), pairs))
    else:
        results = [_safe_pair(run_pair, t) for t in pairs]
    for (pid, p, qid, q), val in zip(pairs, results):
        key = (min(pid, qid), max(pid, qid))
        if val is None:
            skipped.append(key)
            continue
        edges[key] = min(val, edges.get(key, math.inf))

    deaths = _union_find_deaths([(pid, p.loss) for pid, p in order], edges)
    global_id, global_min = order[0][0], order[0][1]
    missing = [pid for pid, _ in order[1:] if pid not in deaths]
    if missing:
        raise LossTopoError(
            f"minima {missing} have no finite escape height (all paths skipped)")

    segments = [Segment(birth=p.loss, death=deaths[pid], minimum_id=pid)
                for pid, p in order[1:]]
    segments.sort(key=lambda s: (s.birth, s.minimum_id))
    meta = {"n_minima": len(kept), "n_paths": len(pairs) - len(skipped),
            "skipped_pairs": [list(k) for k in skipped]}
    essential = Segment(birth=global_min.loss, death=math.inf, minimum_id=global_id)
    return Barcode(essential=essential, segments=segments, meta=meta)


def _safe_pair(run, task):
    try:
        return run(task)
    except DivergenceError:
        return None


# -- serialization ----------------------------------------------------------

def _enc(x: float):
    return "inf" if math.isinf(x) else float(x)


def barcode_to_dict(b: Barcode) -> dict:
    return {
        "essential": {"birth": float(b.essential.birth)},
        "segments": [{"birth": float(s.birth), "death": _enc(s.death),
                      "minimum_id": s.minimum_id} for s in b.segments],
        "meta": b.meta,
    }


def barcode_from_dict(d: dict) -> Barcode:
    def dec(x):
        return math.inf if x == "inf" else float(x)

    essential = Segment(birth=float(d["essential"]["birth"]), death=math.inf)
    segments = [Segment(birth=float(s["birth"]), death=dec(s["death"]),
                        minimum_id=s.get("minimum_id", i))
                for i, s in enumerate(d.get("segments", []))]
    return Barcode(essential=essential, segments=segments, meta=d.get("meta", {}))


def save_barcode(b: Barcode, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(barcode_to_dict(b), fh, indent=2)
        fh.write("\n")


def load_barcode(path) -> Barcode:
    with open(path, "r", encoding="utf-8") as fh:
        return barcode_from_dict(json.load(fh))
