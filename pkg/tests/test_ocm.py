import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import PITCH, fig_fringe, self_convolve
from noon_ocm import ArrayGeometry, CentroidHistogram, SourceModel
from noon_ocm.fringe import _outer, joint_distribution, singles_distribution
from noon_ocm.ocm import (
    DetectionEvent,
    EventBatch,
    absorber_select,
    joint_map_2d,
    joint_map_theory,
    n_bins,
    project_distribution,
    project_events,
)


def test_binomial_two_pixels():
    h = project_distribution(np.full((2, 2), 0.25), 2, 2)
    np.testing.assert_allclose(h.counts, [0.25, 0.5, 0.25], atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(1, 4), p=arrays(np.float64, 11, elements=st.floats(0.01, 1.0)))
def test_classical_projection_is_self_convolution(n, p):
    p = p / p.sum()
    h = project_distribution(_outer([p] * n), n, 11)
    np.testing.assert_allclose(h.counts, self_convolve(p, n), atol=1e-12)


def test_projection_of_model_tensor_matches_convolution(geom):
    cfg = fig_fringe(visibility=0.8)
    p1 = singles_distribution(cfg, geom)
    P = joint_distribution(SourceModel("classical", 3), cfg, geom)
    np.testing.assert_allclose(project_distribution(P, 3, 11).counts, self_convolve(p1, 3), atol=1e-12)


def test_pair_3_4_centroid():
    h = project_events([DetectionEvent(0, (4, 3))], 2, 11, pitch=1.0)
    assert h.counts[7] == 1 and h.total == 1
    assert h.centroids[7] == pytest.approx(3.5)


def test_direct_binning():
    events = [DetectionEvent(0, (0, 0)), DetectionEvent(1, (0, 1)), DetectionEvent(2, (1, 1))]
    h = project_events(events, 2, 2)
    np.testing.assert_array_equal(h.counts, [1, 1, 1])


def test_empty_events():
    h = project_events([], 3, 11)
    assert h.n_bins == 31 and h.total == 0


def test_conservation_uniform_million():
    rng = np.random.default_rng(5)
    pix = rng.integers(0, 11, size=(10**6, 2))
    h = project_events(EventBatch(np.arange(10**6), pix), 2, 11)
    assert h.total == 10**6


def test_wrong_photon_number_diagnostic():
    with pytest.raises(ValueError, match="pulse 9"):
        project_events([DetectionEvent(9, (1, 2, 3))], 2, 11)
    with pytest.raises(ValueError):
        project_events([DetectionEvent(0, (1, 11))], 2, 11)


def test_four_photon_bins():
    h = CentroidHistogram(4, 11, np.zeros(41), pitch=PITCH)
    assert n_bins(4, 11) == 41
    np.testing.assert_allclose(np.diff(h.centroids), PITCH / 4)
    assert h.centroids[0] == 0 and h.centroids[-1] == pytest.approx(10 * PITCH)
    with pytest.raises(ValueError):
        CentroidHistogram(4, 11, np.zeros(44))


def _hist(seed):
    rng = np.random.default_rng(seed)
    c = rng.poisson(50, 21).astype(float)
    return CentroidHistogram(2, 11, c)


def test_merge_commutative_associative():
    a, b, c = _hist(1), _hist(2), _hist(3)
    ab, ba = a.merge(b), b.merge(a)
    np.testing.assert_array_equal(ab.counts, ba.counts)
    np.testing.assert_allclose(ab.errors, ba.errors)
    l, r = a.merge(b).merge(c), a.merge(b.merge(c))
    np.testing.assert_array_equal(l.counts, r.counts)
    np.testing.assert_allclose(l.errors, r.errors, rtol=1e-14)
    np.testing.assert_allclose(l.errors**2, a.counts + b.counts + c.counts, rtol=1e-12)
    with pytest.raises(ValueError):
        a.merge(CentroidHistogram(3, 11, np.zeros(31)))


@pytest.mark.parametrize("n, expected", [(2, 1 / 11), (3, 11.0**-2), (4, 11.0**-3)])
def test_absorber_uniform_oracle(n, expected):
    # oracle: diagonal mass of the analytic uniform tensor
    P = np.full((11,) * n, 11.0**-n)
    diag = sum(P[(i,) * n] for i in range(11))
    assert diag == pytest.approx(expected)
    rng = np.random.default_rng(n)
    m = 400_000
    kept, eff = absorber_select(EventBatch(np.arange(m), rng.integers(0, 11, (m, n))), n)
    sigma = np.sqrt(expected * (1 - expected) / m)
    assert abs(eff - expected) < 4 * sigma
    assert np.all(kept.pixels[:, 0] == kept.pixels[:, -1])


def test_absorber_no_constant_multiset():
    _, eff = absorber_select([DetectionEvent(0, (1, 2)), DetectionEvent(1, (3, 5))], 2)
    assert eff == 0.0
    assert absorber_select([], 2)[1] == 0.0


def test_joint_map_rules():
    m = joint_map_2d([DetectionEvent(0, (2, 5))], 11)
    assert m[2, 5] == 1 and m[5, 2] == 1 and m.sum() == 2
    m = joint_map_2d([DetectionEvent(0, (3, 3))], 11)
    assert m[3, 3] == 1 and m.sum() == 1
    assert not joint_map_2d([], 11).any()
    with pytest.raises(ValueError):
        joint_map_theory(np.zeros((3, 3, 3)))


def test_event_batch_roundtrip():
    events = [DetectionEvent(4, (3, 1)), DetectionEvent(7, (2, 2))]
    b = EventBatch.from_events(events, 2)
    assert list(b) == [DetectionEvent(4, (1, 3)), DetectionEvent(7, (2, 2))]
    assert b[1] == events[1]
    assert len(EventBatch.concatenate([b, b])) == 4
    with pytest.raises(ValueError):
        DetectionEvent(-1, (0,))


def test_scaled_and_poisson_floor():
    h = CentroidHistogram(1, 3, [0.0, 4.0, 9.0])
    np.testing.assert_array_equal(h.poisson_errors, [1, 2, 3])
    s = h.scaled(2)
    np.testing.assert_array_equal(s.counts, [0, 8, 18])
    np.testing.assert_array_equal(s.errors, [0, 4, 6])


def test_geometry_with_cores():
    geom = ArrayGeometry(11, PITCH, 62.5e-6)
    assert geom.fill_factor == pytest.approx(0.25)
