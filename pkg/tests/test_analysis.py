import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spatial_hom.analysis import delta_profile, fit, fringe_metrics, similarity
from spatial_hom.detection import (
    DetectionGrid,
    JointDistribution,
    dip_distribution,
    resolved_scan,
    sample_counts,
    tandem_scan,
)
from spatial_hom.errors import DomainError, FitError, RankError, ShapeError, StructureError
from spatial_hom.interference import InterferenceModel, delta_density
from spatial_hom.modes import PhotonPairConfig

W0 = 0.666
POINT = DetectionGrid(aperture="point")
FINE = DetectionGrid(step=0.01, aperture="point")


def model(Q=0.0, d=0.0, V=1.0):
    return InterferenceModel(PhotonPairConfig(Q=Q, d=d, w0=W0), visibility_V=V)


def delta_dist(Q, d, V, amplitude=1.0, n=201):
    x = np.linspace(-2.5, 2.5, n)
    return JointDistribution((x,), amplitude * delta_density(x, Q, d, W0, V), "analytic", ("delta",))


def grid1d(values):
    return JointDistribution((np.arange(len(values), dtype=float),), np.asarray(values),
                             "analytic", ("delta",))


# --- similarity -------------------------------------------------------------

def test_similarity_proportional_is_one():
    p = resolved_scan(model(Q=5.44, V=0.7), POINT)
    q = JointDistribution(p.axes, 3.7 * p.values, "analytic", p.axis_names)
    assert similarity(p, q) == pytest.approx(1.0, abs=1e-12)


def test_similarity_disjoint_support_is_zero():
    assert similarity(grid1d([1, 2, 0, 0]), grid1d([0, 0, 5, 1])) == 0.0


def test_similarity_errors():
    with pytest.raises(ShapeError):
        similarity(grid1d([1, 2, 3]), grid1d([1, 2, 3, 4]))
    with pytest.raises(DomainError):
        similarity(grid1d([0, 0, 0]), grid1d([1, 2, 3]))


positive_vectors = arrays(np.float64, 12, elements=st.floats(0, 1e3)).filter(lambda a: a.sum() > 0)


@settings(max_examples=60, deadline=None)
@given(a=positive_vectors, b=positive_vectors, c=st.floats(1e-3, 1e3))
def test_similarity_symmetric_scale_invariant_bounded(a, b, c):
    pa, pb = grid1d(a), grid1d(b)
    s = similarity(pa, pb)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(similarity(pb, pa), abs=1e-12)
    assert s == pytest.approx(similarity(grid1d(c * a), pb), abs=1e-12)


def test_similarity_distinguishes_theory_panels():
    a = resolved_scan(model(Q=2.09), POINT)
    b = resolved_scan(model(Q=17.28), POINT)
    # Regression value computed once by this implementation.
    assert similarity(a, b) == pytest.approx(0.5728709401561907, abs=1e-12)


# --- fringe metrics ---------------------------------------------------------

def test_fringe_period_q15_from_raster():
    prof = delta_profile(resolved_scan(model(Q=15.0), POINT))
    fm = fringe_metrics(prof)
    assert abs(fm.period - 2 * math.pi / 15.0) <= 0.05
    assert 0.0 in np.round(fm.zero_positions, 12)


def test_fringe_period_q15_from_tandem_scan():
    fm = fringe_metrics(tandem_scan(model(Q=15.0), FINE))
    assert fm.period == pytest.approx(0.419, abs=0.02)


def test_no_fringes_without_momentum_mismatch():
    with pytest.raises(StructureError):
        fringe_metrics(tandem_scan(model(Q=0.0), FINE))
    with pytest.raises(StructureError):
        fringe_metrics(tandem_scan(model(Q=0.0, d=0.3), FINE))


def test_envelope_half_width_matches_gaussian_envelope():
    # exp(-delta^2 / w0^2) drops to one half at delta = w0 sqrt(ln 2) = 0.5545 mm.
    fm = fringe_metrics(tandem_scan(model(Q=15.0), FINE))
    assert fm.envelope_width == pytest.approx(W0 * math.sqrt(math.log(2)), rel=0.02)


def test_envelope_widens_and_drops_with_displacement():
    widths, peaks = [], []
    for d in (0.0, 0.2, 0.4):
        fm = fringe_metrics(tandem_scan(model(Q=16.28, d=d), FINE))
        widths.append(fm.envelope_width)
        peaks.append(fm.envelope_peak)
    assert widths[0] < widths[1] < widths[2]
    assert peaks[0] > peaks[1] > peaks[2]


def test_delta_profile_axis():
    prof = delta_profile(resolved_scan(model(Q=5.0), POINT))
    assert prof.axes[0][0] == pytest.approx(-2.5)
    assert prof.axes[0].size == 101


# --- fitting ----------------------------------------------------------------

def test_fit_recovers_noiseless_delta_data():
    data = delta_dist(Q=5.0, d=0.0, V=0.81, amplitude=2.0)
    res = fit(data, "delta")
    assert res.converged
    assert res.params["V"] == pytest.approx(0.81, rel=1e-6)
    assert res.params["Q"] == pytest.approx(5.0, rel=1e-6)
    assert res.params["amplitude"] == pytest.approx(2.0, rel=1e-6)
    assert res.fixed == {"d": 0.0, "w0": 0.666}
    assert set(res.params) | set(res.fixed) == {"amplitude", "V", "Q", "d", "w0"}


LATTICE = [(Q, d, V) for Q in (2.09, 5.44, 17.28) for d in (0.0, 0.2, 0.4) for V in (0.6, 0.95)]


@pytest.mark.parametrize("Q,d,V", LATTICE)
def test_fit_fixed_point_delta(Q, d, V):
    res = fit(delta_dist(Q, d, V, amplitude=1.5), "delta", fixed={"d": d, "w0": W0})
    assert res.params["V"] == pytest.approx(V, rel=1e-6)
    assert res.params["Q"] == pytest.approx(Q, rel=1e-6)
    assert res.params["amplitude"] == pytest.approx(1.5, rel=1e-6)


@pytest.mark.parametrize("Q,d,V", LATTICE)
def test_fit_fixed_point_joint2d(Q, d, V):
    data = resolved_scan(model(Q, d, V), POINT)
    res = fit(data, "joint2d", fixed={"d": d, "w0": W0})
    assert res.params["V"] == pytest.approx(V, rel=1e-6)
    assert res.params["Q"] == pytest.approx(Q, rel=1e-6)
    assert res.params["amplitude"] == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("Q,d,V", LATTICE)
def test_fit_fixed_point_dip(Q, d, V):
    # The dip axis is Q itself; the lattice Q sets the scan half-range instead.
    q_axis = np.linspace(-Q - 10.0, Q + 10.0, 61)
    data = dip_distribution(PhotonPairConfig(d=d, w0=W0), V, q_axis)
    res = fit(data, "dip", fixed={"d": d})
    assert res.params["V"] == pytest.approx(V, rel=1e-6)
    assert res.params["w0"] == pytest.approx(W0, rel=1e-6)
    assert res.params["amplitude"] == pytest.approx(1.0, rel=1e-6)


def test_fit_free_displacement():
    res = fit(delta_dist(16.28, 0.2, 0.8), "delta", fixed={"w0": W0})
    assert res.params["d"] == pytest.approx(0.2, rel=1e-6)
    assert res.params["V"] == pytest.approx(0.8, rel=1e-6)


def test_fit_is_deterministic():
    data = sample_counts(tandem_scan(model(Q=16.28, V=0.8), POINT), 1e5, 11)
    a = fit(data, "delta", weighting="poisson")
    b = fit(data, "delta", weighting="poisson")
    assert a == b


def test_fitted_visibility_tracks_fringe_contrast():
    vs = [fit(delta_dist(5.44, 0.0, v), "delta").params["V"] for v in (0.9, 0.7, 0.5, 0.3, 0.1)]
    assert all(a > b for a, b in zip(vs, vs[1:]))


def test_fit_on_poisson_dip_data():
    dip = dip_distribution(PhotonPairConfig(w0=W0), 0.81, np.linspace(-18, 18, 73))
    fitted = [fit(sample_counts(dip, 1e4, s), "dip").params["V"] for s in range(20)]
    assert max(abs(v - 0.81) for v in fitted) < 0.02


def test_fit_rejects_all_zero_data():
    data = resolved_scan(model(), POINT)
    with pytest.raises(FitError):
        fit(data, "joint2d")


def test_fit_rejects_too_few_points():
    x = np.linspace(-1, 1, 5)
    data = JointDistribution((x,), delta_density(x, 5.0, 0.0, W0, 0.8), "analytic", ("delta",))
    with pytest.raises(FitError):
        fit(data, "delta")


def test_fit_flags_degenerate_parameters():
    dip = dip_distribution(PhotonPairConfig(d=0.2, w0=W0), 0.8, np.linspace(-18, 18, 73))
    # V and d enter the dip law only through V exp(-4 d^2 / w0^2).
    with pytest.raises(RankError):
        fit(dip, "dip", fixed={"w0": W0})


def test_fit_checks_dimensionality():
    with pytest.raises(ShapeError):
        fit(delta_dist(5.0, 0.0, 0.8), "joint2d")
    with pytest.raises(DomainError):
        fit(delta_dist(5.0, 0.0, 0.8), "delta", fixed={"bogus": 1.0})


def test_visibility_clamped_to_allowed_range():
    # Data with contrast above the ideal law pushes V to its upper bound.
    x = np.linspace(-2.5, 2.5, 201)
    y = delta_density(x, 5.0, 0.0, W0, 1.0) + 0.3 * np.abs(np.sin(2.5 * x)) * np.exp(-x * x)
    res = fit(JointDistribution((x,), y, "analytic", ("delta",)), "delta")
    assert 0.0 <= res.params["V"] <= 1.05
