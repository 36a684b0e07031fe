import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from credal_decal import (
    BoxCredalSet,
    ValidationError,
    eu_score,
    max_entropy,
    min_entropy,
    rank_by_uncertainty,
    shannon_entropy,
    uncertainty_report,
    zero_one_eu,
)
from credal_decal.uncertainty import _vertices

from oracles import (
    brute_vertices,
    entropy_rows,
    grid_in_box,
    grid_zero_one,
    lp_zero_one,
    random_box,
    slsqp_max_entropy,
)

H64 = -(0.6 * math.log(0.6) + 0.4 * math.log(0.4))


def test_entropy_hand_value():
    assert H64 == pytest.approx(0.6730116670092565, abs=1e-15)
    assert shannon_entropy([0.6, 0.4]) == pytest.approx(H64, abs=1e-15)
    assert shannon_entropy([1.0, 0.0, 0.0]) == 0.0


@pytest.mark.parametrize("K", [2, 3, 7])
def test_full_box_profile(K):
    full = BoxCredalSet.full(K)
    v, p = max_entropy(full)
    assert v == pytest.approx(math.log(K))
    np.testing.assert_allclose(p, np.full(K, 1 / K))
    v, p, heur = min_entropy(full)
    assert v == 0.0 and sorted(p.tolist())[-1] == 1.0 and not heur
    rep = uncertainty_report(full)
    assert rep.au == 0.0
    assert rep.tu == pytest.approx(math.log(K))
    assert rep.eu_entropy == pytest.approx(math.log(K))
    assert rep.eu_zero_one == 1.0


def test_two_class_examples():
    sym = BoxCredalSet([0.4, 0.4], [0.6, 0.6])
    v, p = max_entropy(sym)
    assert v == pytest.approx(math.log(2)) and p.tolist() == [0.5, 0.5]
    v, p, _ = min_entropy(sym)
    assert v == pytest.approx(H64, abs=1e-12)
    rep = uncertainty_report(sym)
    assert rep.eu_entropy == pytest.approx(math.log(2) - H64, abs=1e-12)
    assert rep.eu_entropy == pytest.approx(0.0201, abs=5e-5)
    assert zero_one_eu(sym) == pytest.approx(0.2, abs=1e-12)

    skew = BoxCredalSet([0.6, 0.3], [0.7, 0.4])
    v, p = max_entropy(skew)
    assert v == pytest.approx(H64, abs=1e-12)
    np.testing.assert_allclose(p, [0.6, 0.4], atol=1e-12)


def test_singleton_box():
    p = np.array([0.2, 0.5, 0.3])
    b = BoxCredalSet(p, p)
    assert max_entropy(b)[0] == pytest.approx(shannon_entropy(p))
    assert min_entropy(b)[0] == pytest.approx(shannon_entropy(p))
    rep = uncertainty_report(b)
    assert rep.eu_entropy == pytest.approx(0.0, abs=1e-12)
    assert rep.eu_zero_one == 0.0


def test_entropy_against_simplex_grid(rng):
    done = 0
    while done < 100:
        lo, hi = random_box(rng, 3, lattice=0.005)
        P = grid_in_box(lo, hi)
        if len(P) == 0:
            continue
        box = BoxCredalSet(lo, hi, reachable=True)
        H = entropy_rows(P)
        hmax, wmax = max_entropy(box)
        hmin, wmin, heur = min_entropy(box)
        assert not heur
        assert hmax >= H.max() - 1e-12
        assert hmax - H.max() <= 5e-4
        assert hmin <= H.min() + 1e-12
        for w in (wmax, wmin):
            assert w.sum() == pytest.approx(1.0, abs=1e-12)
            assert np.all(w >= lo - 1e-12) and np.all(w <= hi + 1e-12)
        done += 1


def test_zero_one_against_simplex_grid(rng):
    done = 0
    while done < 100:
        lo, hi = random_box(rng, 3, lattice=0.005)
        if len(grid_in_box(lo, hi)) < 10:
            continue
        v = zero_one_eu(BoxCredalSet(lo, hi, reachable=True))
        assert abs(v - grid_zero_one(lo, hi)) <= 1e-2
        done += 1


@pytest.mark.parametrize("K", [2, 3, 4, 6])
def test_zero_one_against_linear_programs(rng, K):
    for _ in range(25):
        lo, hi = random_box(rng, K)
        v = zero_one_eu(BoxCredalSet(lo, hi, reachable=True))
        assert v == pytest.approx(lp_zero_one(lo, hi), abs=1e-9)


@pytest.mark.filterwarnings("ignore:Values in x were outside bounds")
@pytest.mark.parametrize("K", [3, 5, 8])
def test_max_entropy_against_slsqp(rng, K):
    for _ in range(25):
        lo, hi = random_box(rng, K)
        v, _ = max_entropy(BoxCredalSet(lo, hi, reachable=True))
        ref = slsqp_max_entropy(lo, hi)
        assert v >= ref - 1e-9
        assert v - ref <= 1e-6


def test_vertices_match_brute_force(rng):
    for K in (2, 3, 4, 5):
        for _ in range(10):
            lo, hi = random_box(rng, K)
            fast = {tuple(np.round(v, 10)) for v in _vertices(lo, hi)}
            slow = {tuple(np.round(v, 10)) for v in brute_vertices(lo, hi)}
            assert fast == slow


@pytest.mark.parametrize("K", range(2, 9))
def test_greedy_never_below_exact(rng, K):
    for _ in range(30):
        lo, hi = random_box(rng, K)
        box = BoxCredalSet(lo, hi, reachable=True)
        exact, _, h1 = min_entropy(box, exact=True)
        greedy, w, h2 = min_entropy(box, exact=False)
        assert not h1 and h2
        assert greedy >= exact - 1e-12
        assert np.all(w >= lo - 1e-12) and np.all(w <= hi + 1e-12)


def test_large_k_flags_heuristic(rng):
    lo, hi = random_box(rng, 20, max_width=0.1)
    rep = uncertainty_report(BoxCredalSet(lo, hi))
    assert rep.heuristic


def test_rank_ties_and_order(rng):
    p = np.array([0.2, 0.3, 0.5])
    same = [BoxCredalSet(p, p) for _ in range(5)]
    assert rank_by_uncertainty(same, "eu_entropy", 3) == [0, 1, 2]
    mixed = same[:2] + [BoxCredalSet.full(3)] + same[2:]
    assert rank_by_uncertainty(mixed, "eu_zero_one", 1) == [2]
    with pytest.raises(ValidationError):
        rank_by_uncertainty(same, "eu_entropy", 6)
    with pytest.raises(ValidationError):
        eu_score(same[0], "variance")


def test_rank_matches_recomputation(rng):
    boxes = [BoxCredalSet(*random_box(rng, 3)) for _ in range(40)]
    for measure in ("eu_entropy", "eu_zero_one"):
        scores = []
        for b in boxes:
            rep = uncertainty_report(b)
            scores.append(rep.eu_entropy if measure == "eu_entropy" else rep.eu_zero_one)
        expected = sorted(range(40), key=lambda i: (-scores[i], i))[:10]
        assert rank_by_uncertainty(boxes, measure, 10) == expected


@settings(max_examples=80, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), K=st.integers(2, 6))
def test_report_properties(seed, K):
    rng = np.random.default_rng(seed)
    lo, hi = random_box(rng, K)
    rep = uncertainty_report(BoxCredalSet(lo, hi))
    assert 0.0 <= rep.au <= rep.tu <= math.log(K) + 1e-12
    assert rep.eu_entropy >= 0.0
    assert 0.0 <= rep.eu_zero_one <= 1.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_eu_monotone_under_inclusion(seed):
    rng = np.random.default_rng(seed)
    lo, hi = random_box(rng, 4)
    wide = BoxCredalSet(np.maximum(lo - 0.1, 0), np.minimum(hi + 0.1, 1))
    narrow = BoxCredalSet(lo, hi)
    assert eu_score(wide, "eu_zero_one") >= eu_score(narrow, "eu_zero_one") - 1e-12
    assert max_entropy(wide)[0] >= max_entropy(narrow)[0] - 1e-12
    assert min_entropy(wide)[0] <= min_entropy(narrow)[0] + 1e-12
