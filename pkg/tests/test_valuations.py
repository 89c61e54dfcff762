import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holonomy_valuations import groups
from holonomy_valuations import grassmann as gm
from holonomy_valuations import valuations as val
from holonomy_valuations.polytope import Polytope, intrinsic_volumes

NU3, NU4, ETA = val.ValuationId(val.NU3), val.ValuationId(val.NU4), val.ValuationId(val.ETA)


def test_ids_parse_and_validate():
    assert val.ValuationId.parse("MU(3)") == val.mu(3)
    t = val.ValuationId.parse("TASAKI(4,1)")
    assert (t.kind, t.k, t.q, t.context) == (val.TASAKI, 4, 1, "SU")
    assert str(t) == "TASAKI(4,1)"
    assert NU3.degree == 3 and NU3.ambient_dim == 7 and ETA.ambient_dim == 8
    with pytest.raises(val.ValuationError):
        val.ValuationId(val.TASAKI, 4, 3)
    with pytest.raises(val.ValuationError):
        val.ValuationId.parse("BOGUS(1)")
    assert val.ValuationId(val.PHI_N1, 4).complex_valued


def test_model_boxes_have_unit_values():
    assert val.evaluate(NU3, Polytope.axis_box(7, (0, 1, 2))).real == pytest.approx(1.0)
    assert val.evaluate(NU4, Polytope.axis_box(7, (3, 4, 5, 6))).real == pytest.approx(1.0)
    assert val.evaluate(ETA, Polytope.axis_box(8, (0, 2, 4, 6))).real == pytest.approx(1.0)
    assert val.evaluate(NU3, Polytope.axis_box(7, (0, 1, 3))).real == pytest.approx(0.0)


def test_primes_are_five_weight_minus_one():
    P = Polytope.axis_box(7, (0, 1, 2))
    assert val.evaluate(val.ValuationId(val.NU3_PRIME), P).real == pytest.approx(4.0)
    Q = Polytope.axis_box(7, (2, 4, 5, 6))
    assert val.evaluate(val.ValuationId(val.NU4_PRIME), Q).real == pytest.approx(-1.0)


def test_mu_matches_intrinsic_volumes(rng):
    P = Polytope.box(rng.standard_normal(5), groups.sample_so_batch(5, 1, rng)[0], rng.uniform(0.3, 1, 5))
    mu = intrinsic_volumes(P)
    for k in range(6):
        assert val.evaluate(val.mu(k), P).real == pytest.approx(mu[k])


def test_degree_above_dimension_vanishes():
    assert val.evaluate(ETA, Polytope.axis_box(8, (0, 1, 2))).value == 0.0


def test_klain_weight_single_plane():
    W = gm.Subspace.coordinate(7, [0, 1, 2])
    assert val.klain_weight(NU3, W) == pytest.approx(1.0)
    assert val.klain_weight(val.mu(3), W) == 1.0


def test_eta_equals_su4_combination(rng):
    P = Polytope.box(rng.standard_normal(8), groups.sample_so_batch(8, 1, rng)[0], rng.uniform(0.5, 1, 8))
    assert val.eta_decomposition_residual(P) < 1e-10


def test_fourier_pairs():
    assert val.fourier_residual(NU3, NU4, 2000) < 1e-12
    assert val.fourier_residual(ETA, ETA, 2000) < 1e-12
    with pytest.raises(val.ValuationError):
        val.fourier_residual(NU3, ETA)


def test_disk_bundle_on_associative_box():
    v = val.nu3_disk_bundle(Polytope.axis_box(7, (0, 1, 2)))
    assert v.real == pytest.approx(1.0) and v.std_error == 0.0


def test_disk_bundle_agrees_on_cube():
    P = Polytope.cube(7).transformed(groups.sample_so_batch(7, 1, np.random.default_rng(2))[0])
    a, b = val.evaluate(NU3, P), val.nu3_disk_bundle(P, 20_000, seed=3)
    assert abs(a.real - b.real) < 4 * math.hypot(a.std_error, b.std_error)


def test_rank_reports():
    assert val.hadwiger_rank_check("G2") == 10
    assert val.hadwiger_rank_check("SPIN7") == 10
    rep = val.hadwiger_rank_details("G2", 60)
    assert tuple(rep.ranks) == (1, 1, 1, 2, 2, 1, 1, 1)
    assert min(rep.gaps) > 1e6
    assert rep.to_json()["rank"] == 10


def test_value_json():
    v = val.evaluate(val.ValuationId(val.PHI_N1, 4), Polytope.axis_box(8, (0, 2, 4, 6)))
    d = v.to_json()
    assert set(d) >= {"valuation", "value", "std_error"}


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_nu3_invariant_under_g2(seed):
    rng = np.random.default_rng(seed)
    P = Polytope.box(rng.standard_normal(7), groups.sample_so_batch(7, 1, rng)[0][:, :4], rng.uniform(0.3, 1, 4))
    g = groups.HaarSampler("G2", seed=seed % 997, n_chains=1).sample_batch(1)[0]
    for vid in (NU3, NU4):
        assert val.evaluate(vid, P.transformed(g, rng.standard_normal(7))).real == pytest.approx(
            val.evaluate(vid, P).real, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s=st.floats(0.1, 5.0))
def test_homogeneity_and_evenness(seed, s):
    rng = np.random.default_rng(seed)
    P = Polytope.box(rng.standard_normal(8), groups.sample_so_batch(8, 1, rng)[0][:, :5], rng.uniform(0.3, 1, 5))
    e = val.evaluate(ETA, P).real
    assert val.evaluate(ETA, P.scaled(s)).real == pytest.approx(s**4 * e, rel=1e-9, abs=1e-12)
    assert val.evaluate(ETA, P.transformed(-np.eye(8))).real == pytest.approx(e, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), frac=st.floats(0.05, 0.95))
def test_additivity_under_box_split(seed, frac):
    rng = np.random.default_rng(seed)
    Q = groups.sample_so_batch(7, 1, rng)[0]
    F, h, c = Q[:, :5], rng.uniform(0.3, 1.5, 5), rng.standard_normal(7)
    t = (2 * frac - 1) * h[0]
    whole = Polytope.box(c, F, h)
    lo = Polytope.box(c + F[:, 0] * (t - h[0]) / 2, F, np.r_[(t + h[0]) / 2, h[1:]])
    hi = Polytope.box(c + F[:, 0] * (t + h[0]) / 2, F, np.r_[(h[0] - t) / 2, h[1:]])
    cut = Polytope.box(c + F[:, 0] * t, F[:, 1:], h[1:])
    ev = lambda P: val.evaluate(NU3, P).real  # noqa: E731
    assert abs(ev(whole) - ev(lo) - ev(hi) + ev(cut)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_klain_weights_are_bounded(seed):
    W = gm.random_frames(8, 4, 50, np.random.default_rng(seed))
    w = val.klain_weight_frames(ETA, W)
    assert np.all((w > -1e-12) & (w < 1 + 1e-12))
    for q in range(3):
        t = val.klain_weight_frames(val.ValuationId(val.TASAKI, 4, q), W)
        assert np.all((t > -1e-12) & (t < math.comb(2, q) + 1e-12))
