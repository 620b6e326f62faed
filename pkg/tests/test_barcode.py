"""Barcode assembly, diagrams, bottleneck distance, obstruction score."""

import json
import math

import numpy as np
import pytest

from losstopo.barcode import (Barcode, PersistenceDiagram, Segment,
                              barcode_to_dict, bottleneck_distance,
                              compute_barcode, ideal_barcode, load_barcode,
                              save_barcode, to_diagram, to_score)
from losstopo.landscape import make_builtin
from losstopo.oracle import brute_bottleneck
from losstopo.pathopt import PathConfig
from losstopo.trainer import Minimum, SchedulerSpec, find_minimum, fixed_lr


def dw_minima():
    dw = make_builtin("double_well_1d")
    mins = [find_minimum(dw, [x], fixed_lr(1e-2), momentum=0.0, max_steps=50000)
            for x in (0.3, -0.3)]
    return dw, mins


def fast_path_config(epochs=60):
    return PathConfig(epochs=epochs,
                      scheduler=SchedulerSpec(m1=0.8 * epochs, m2=epochs,
                                              lr_max=2e-3, lr_min=1.25e-4))


def random_diagram(rng, max_points=6):
    n = int(rng.integers(0, max_points + 1))
    pts = []
    for _ in range(n):
        b = rng.uniform(-1, 1)
        pts.append((b, b + rng.uniform(0.01, 2.0)))
    return PersistenceDiagram(finite_points=pts, essential_births=[rng.uniform(-1, 0)])


# -- types ------------------------------------------------------------------------

def test_segment_rejects_death_below_birth():
    with pytest.raises(ValueError):
        Segment(birth=1.0, death=0.5)


def test_barcode_requires_infinite_essential():
    with pytest.raises(ValueError):
        Barcode(essential=Segment(0.0, 1.0))


def test_diagram_drops_zero_length_points():
    d = PersistenceDiagram(finite_points=[(1.0, 1.0), (0.0, 2.0)])
    assert d.finite_points == [(0.0, 2.0)]


# -- to_diagram ----------------------------------------------------------------------

def test_to_diagram_single_essential():
    d = to_diagram(ideal_barcode(0.0))
    assert d.essential_births == [0.0]
    assert d.finite_points == []


def test_to_diagram_transcribes_segments():
    b = Barcode(essential=Segment(-0.25, math.inf),
                segments=[Segment(-0.25, 0.0)])
    d = to_diagram(b)
    assert d.finite_points == [(-0.25, 0.0)]
    assert d.essential_births == [-0.25]


def test_to_diagram_drops_noise_segments():
    b = Barcode(essential=Segment(0.0, math.inf),
                segments=[Segment(1.0, 1.0 + 1e-12)])
    assert to_diagram(b).finite_points == []


# -- bottleneck distance ----------------------------------------------------------------

def test_bottleneck_identity():
    d = PersistenceDiagram(finite_points=[(0.0, 1.0), (0.5, 2.0)],
                           essential_births=[0.0])
    assert bottleneck_distance(d, d) == 0.0


def test_bottleneck_single_point_to_empty():
    d1 = PersistenceDiagram(finite_points=[(0.0, 2.0)])
    d2 = PersistenceDiagram()
    assert bottleneck_distance(d1, d2) == pytest.approx(1.0)


def test_bottleneck_direct_match_vs_diagonal():
    d1 = PersistenceDiagram(finite_points=[(0.0, 1.0)])
    d2 = PersistenceDiagram(finite_points=[(0.5, 1.0)])
    assert bottleneck_distance(d1, d2) == pytest.approx(0.5)


def test_bottleneck_mismatched_essentials_is_infinite():
    d1 = PersistenceDiagram(essential_births=[0.0])
    d2 = PersistenceDiagram(essential_births=[0.0, 1.0])
    assert math.isinf(bottleneck_distance(d1, d2))


def test_bottleneck_matches_brute_force():
    rng = np.random.default_rng(2024)
    for _ in range(200):
        d1, d2 = random_diagram(rng), random_diagram(rng)
        fast = bottleneck_distance(d1, d2)
        brute = brute_bottleneck(d1, d2)
        assert abs(fast - brute) <= 1e-12


def test_bottleneck_is_pseudometric_on_random_diagrams():
    rng = np.random.default_rng(99)
    for _ in range(40):
        a, b, c = (random_diagram(rng, 4) for _ in range(3))
        dab = bottleneck_distance(a, b)
        dba = bottleneck_distance(b, a)
        assert dab == dba  # symmetry, exact
        assert bottleneck_distance(a, a) == 0.0
        dac = bottleneck_distance(a, c)
        dcb = bottleneck_distance(c, b)
        assert dab <= dac + dcb + 1e-12


# -- ideal barcode / score ------------------------------------------------------------------

def test_ideal_barcode_shape():
    b = ideal_barcode(0.0)
    assert b.essential.birth == 0.0
    assert math.isinf(b.essential.death)
    assert b.segments == []


def test_to_score_of_ideal_is_zero():
    assert to_score(ideal_barcode(0.3)) == 0.0


def test_to_score_double_well_value():
    b = Barcode(essential=Segment(-0.25, math.inf), segments=[Segment(-0.25, 0.0)])
    assert to_score(b) == pytest.approx(0.125)


def test_to_score_ignores_shorter_segments():
    base = Barcode(essential=Segment(0.0, math.inf), segments=[Segment(0.0, 1.0)])
    more = Barcode(essential=Segment(0.0, math.inf),
                   segments=[Segment(0.0, 1.0), Segment(0.2, 0.5)])
    assert to_score(more) == to_score(base)
    # cross-check both against brute enumeration
    for b in (base, more):
        ideal = to_diagram(ideal_barcode(b.essential.birth))
        assert to_score(b) == pytest.approx(brute_bottleneck(to_diagram(b), ideal))


def test_to_score_shift_invariance():
    rng = np.random.default_rng(5)

    def shifted_score(b, c):
        moved = Barcode(essential=Segment(b.essential.birth + c, math.inf),
                        segments=[Segment(s.birth + c, s.death + c)
                                  for s in b.segments])
        return to_score(moved)

    # dyadic coordinates and shift: float sums are exact, equality is exact
    for _ in range(20):
        births = rng.integers(-64, 64, size=3) / 64.0
        lens = rng.integers(1, 64, size=3) / 64.0
        lo = float(births.min() - 0.5)
        b = Barcode(essential=Segment(lo, math.inf),
                    segments=[Segment(bb, bb + ll) for bb, ll in zip(births, lens)])
        assert to_score(b) == shifted_score(b, 0.75)
    # arbitrary floats: invariance up to one rounding step
    for _ in range(20):
        births = rng.uniform(-1, 1, size=3)
        lens = rng.uniform(0.01, 1.0, size=3)
        lo = float(births.min() - 0.1)
        b = Barcode(essential=Segment(lo, math.inf),
                    segments=[Segment(bb, bb + ll) for bb, ll in zip(births, lens)])
        assert shifted_score(b, 0.7351) == pytest.approx(to_score(b), abs=1e-12)


def test_to_score_equals_half_longest_finite_segment():
    b = Barcode(essential=Segment(-1.0, math.inf),
                segments=[Segment(-0.8, -0.1), Segment(-0.5, -0.45)])
    assert to_score(b) == pytest.approx(0.35)


# -- compute_barcode ---------------------------------------------------------------------------

def test_single_minimum_barcode():
    bowl = make_builtin("quadratic_bowl")
    m = find_minimum(bowl, [1.0, 1.0], fixed_lr(0.1), momentum=0.0)
    code = compute_barcode([m], bowl, fast_path_config())
    assert code.segments == []
    assert code.essential.birth == pytest.approx(0.0, abs=1e-10)


def test_empty_minima_rejected():
    bowl = make_builtin("quadratic_bowl")
    from losstopo.errors import LossTopoError
    with pytest.raises(LossTopoError):
        compute_barcode([], bowl)


def test_double_well_barcode_analytic():
    dw, mins = dw_minima()
    code = compute_barcode(mins, dw, fast_path_config())
    assert abs(code.essential.birth - (-0.25)) < 1e-3
    assert len(code.segments) == 1
    seg = code.segments[0]
    assert abs(seg.birth - (-0.25)) < 1e-3
    assert abs(seg.death - 0.0) < 1e-3
    assert abs(to_score(code) - 0.125) < 1e-3


def test_tie_broken_by_id_exactly_one_essential():
    # the symmetric double well gives bit-equal losses; id order must decide
    dw, mins = dw_minima()
    assert mins[0].loss == mins[1].loss
    code = compute_barcode(mins, dw, fast_path_config())
    assert code.essential.minimum_id == 0
    assert code.segments[0].minimum_id == 1


def test_duplicate_minima_are_merged():
    dw, mins = dw_minima()
    dup = Minimum(params=mins[0].params.copy(), loss=mins[0].loss,
                  grad_norm=mins[0].grad_norm, seed=9, steps=0)
    code = compute_barcode([mins[0], mins[1], dup], dw, fast_path_config())
    assert code.meta["n_minima"] == 2
    assert len(code.segments) == 1


def test_workers_do_not_change_result():
    mix = make_builtin("gaussian_mixture_2d", seed=7)
    mins = [find_minimum(mix, c, fixed_lr(1e-2), max_steps=4000)
            for c in mix.centers[:4]]
    cfg = fast_path_config(40)
    seq = compute_barcode(mins, mix, cfg, workers=1)
    par = compute_barcode(mins, mix, cfg, workers=4)
    assert barcode_to_dict(seq) == barcode_to_dict(par)


def test_upper_estimate_more_epochs_never_higher():
    # doubling the optimization budget cannot raise any death beyond noise
    mix = make_builtin("gaussian_mixture_2d", seed=7)
    mins = [find_minimum(mix, c, fixed_lr(1e-2), max_steps=4000)
            for c in mix.centers]
    short = compute_barcode(mins, mix, fast_path_config(75))
    long = compute_barcode(mins, mix, fast_path_config(150))
    d_short = {s.minimum_id: s.death for s in short.segments}
    d_long = {s.minimum_id: s.death for s in long.segments}
    for mid, death in d_long.items():
        assert death <= d_short[mid] + 1e-6


def test_prune_k_keeps_connectivity_on_mixture():
    mix = make_builtin("gaussian_mixture_2d", seed=7)
    mins = [find_minimum(mix, c, fixed_lr(1e-2), max_steps=4000)
            for c in mix.centers]
    code = compute_barcode(mins, mix, fast_path_config(40), prune_k=2)
    assert len(code.segments) == len(mix.centers) - 1


# -- serialization ------------------------------------------------------------------------------

def test_barcode_json_roundtrip(tmp_path):
    b = Barcode(essential=Segment(-0.25, math.inf, 0),
                segments=[Segment(-0.25, 0.0, 1)], meta={"note": "dw"})
    p = tmp_path / "b.json"
    save_barcode(b, p)
    loaded = load_barcode(p)
    assert loaded.essential.birth == b.essential.birth
    assert loaded.segments[0].birth == -0.25
    assert loaded.segments[0].death == 0.0
    assert loaded.meta == {"note": "dw"}


def test_barcode_json_schema_key_order(tmp_path):
    b = Barcode(essential=Segment(0.0, math.inf), segments=[Segment(0.0, 1.0, 3)])
    p = tmp_path / "b.json"
    save_barcode(b, p)
    payload = json.loads(p.read_text())
    assert list(payload) == ["essential", "segments", "meta"]
    assert list(payload["segments"][0]) == ["birth", "death", "minimum_id"]


def test_barcode_json_encodes_infinity_as_string():
    d = barcode_to_dict(ideal_barcode(1.0))
    text = json.dumps(d)
    assert "Infinity" not in text
