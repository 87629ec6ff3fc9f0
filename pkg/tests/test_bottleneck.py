import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from overlap_lab.ph import (
    PointCloud,
    bottleneck_distance,
    compute_persistence,
    rips_filtration,
    tsas,
)
from overlap_lab.ph.reduction import PersistenceDiagram

from oracles import naive_bottleneck


def diagram_of(pairs, dim=1):
    return PersistenceDiagram.from_features([(b, d, dim) for b, d in pairs])


def test_identical_diagrams_zero():
    d = diagram_of([(0.0, 2.0), (1.0, 3.0)])
    assert bottleneck_distance(d, d, dim=1) == 0.0


def test_single_point_vs_empty():
    d1 = diagram_of([(0.0, 2.0)])
    d2 = diagram_of([])
    assert bottleneck_distance(d1, d2, dim=1) == pytest.approx(1.0)


def test_two_singletons():
    d1 = diagram_of([(0.0, 2.0)])
    d2 = diagram_of([(0.0, 3.0)])
    assert bottleneck_distance(d1, d2, dim=1) == pytest.approx(1.0)


def test_diagonal_beats_matching():
    # far-apart short bars: cheaper to drop both to the diagonal
    d1 = diagram_of([(0.0, 0.2)])
    d2 = diagram_of([(10.0, 10.2)])
    assert bottleneck_distance(d1, d2, dim=1) == pytest.approx(0.1)


def test_infinite_count_mismatch_warns_inf():
    d1 = diagram_of([(0.0, np.inf)], dim=0)
    d2 = diagram_of([(0.0, np.inf), (0.0, np.inf)], dim=0)
    with pytest.warns(UserWarning):
        assert bottleneck_distance(d1, d2, dim=0) == np.inf


def test_infinite_features_matched_by_birth():
    d1 = diagram_of([(0.0, np.inf), (3.0, np.inf)], dim=0)
    d2 = diagram_of([(0.5, np.inf), (3.2, np.inf)], dim=0)
    assert bottleneck_distance(d1, d2, dim=0) == pytest.approx(0.5)


def interval_lists(max_n=5):
    pair = st.tuples(st.floats(0, 5), st.floats(0.01, 5)).map(
        lambda t: (t[0], t[0] + t[1]))
    return st.lists(pair, min_size=0, max_size=max_n)


@given(interval_lists(), interval_lists())
@settings(max_examples=60, deadline=None)
def test_matches_exhaustive_oracle(a, b):
    got = bottleneck_distance(diagram_of(a), diagram_of(b), dim=1)
    want = naive_bottleneck(a, b)
    assert got == pytest.approx(want, abs=1e-12)


@given(interval_lists(4), interval_lists(4), interval_lists(4))
@settings(max_examples=40, deadline=None)
def test_metric_axioms(a, b, c):
    da, db, dc = diagram_of(a), diagram_of(b), diagram_of(c)
    dab = bottleneck_distance(da, db, dim=1)
    dba = bottleneck_distance(db, da, dim=1)
    assert dab == pytest.approx(dba, abs=1e-9)
    assert bottleneck_distance(da, da, dim=1) <= 1e-12
    dac = bottleneck_distance(da, dc, dim=1)
    dcb = bottleneck_distance(dc, db, dim=1)
    assert dab <= dac + dcb + 1e-9


@pytest.mark.parametrize("delta", [1e-3, 1e-2])
def test_rips_stability(delta):
    # moving every point by <= delta moves each pairwise distance by at
    # most 2*delta, and the diagram is 1-Lipschitz in the distance matrix
    from overlap_lab.ph.filtration import pairwise_distances

    rng = np.random.default_rng(17)
    pts = rng.normal(size=(50, 2))
    pd0 = compute_persistence(rips_filtration(PointCloud(pts), max_dim=1))
    for trial in range(3):
        noise = rng.normal(size=pts.shape)
        norms = np.linalg.norm(noise, axis=1, keepdims=True)
        noise *= delta / norms.max()
        moved = pts + noise
        matrix_change = np.abs(
            pairwise_distances(pts) - pairwise_distances(moved)).max()
        assert matrix_change <= 2 * delta + 1e-15
        pd1 = compute_persistence(rips_filtration(PointCloud(moved), max_dim=1))
        for dim in (0, 1):
            w = bottleneck_distance(pd0, pd1, dim=dim)
            assert w <= matrix_change + 1e-12
            assert w <= 2 * delta + 1e-12


# -- TSAS --------------------------------------------------------------

def circle(n=24, r=1.0, center=(0.0, 0.0), seed=None):
    theta = np.linspace(0, 2 * np.pi, n, endpoint=False)
    pts = r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return pts + np.asarray(center)


def test_tsas_identical_zero():
    pts = circle()
    assert tsas(pts, pts.copy()) == 0.0


def test_tsas_scaled_circle_matches_direct_computation():
    a = circle(r=1.0)
    b = circle(r=2.0)
    pd_a = compute_persistence(rips_filtration(PointCloud(a), max_dim=1))
    pd_b = compute_persistence(rips_filtration(PointCloud(b), max_dim=1))
    w = bottleneck_distance(pd_a, pd_b, dim=1)
    la = pd_a.lifetimes(1).max()
    lb = pd_b.lifetimes(1).max()
    want = w / max(la, lb)
    assert tsas(a, b) == pytest.approx(want)
    iv_a = [tuple(r) for r in pd_a.intervals(1)]
    iv_b = [tuple(r) for r in pd_b.intervals(1)]
    assert w == pytest.approx(naive_bottleneck(iv_a, iv_b), abs=1e-12)


def test_tsas_circle_vs_segment_is_one():
    a = circle(n=30)
    t = np.linspace(0, 1, 30)
    b = np.stack([t, np.zeros_like(t)], axis=1)
    assert tsas(a, b) == 1.0


def test_tsas_two_segments_zero():
    t = np.linspace(0, 1, 20)
    a = np.stack([t, np.zeros_like(t)], axis=1)
    b = np.stack([np.zeros_like(t), t], axis=1)
    assert tsas(a, b) == 0.0


def test_tsas_symmetric():
    a = circle(n=20, r=1.0)
    b = circle(n=26, r=1.5, center=(3.0, 0.0))
    assert tsas(a, b) == pytest.approx(tsas(b, a))
