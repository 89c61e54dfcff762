import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from holonomy_valuations import forms
from holonomy_valuations.groups import sample_so_batch


def random_form(rng, n, k):
    return forms.AlternatingForm(n, k, rng.standard_normal(len(forms.index_sets(n, k))))


def test_standard_phi_terms():
    phi = forms.standard_phi()
    assert phi[(0, 1, 2)] == 1 and phi[(1, 4, 6)] == -1 and phi[(2, 3, 6)] == -1 and phi[(2, 4, 5)] == -1
    assert phi[(1, 0, 2)] == -1
    assert len(phi.terms()) == 7


def test_cayley_form_values():
    Phi = forms.standard_Phi()
    assert forms.evaluate(Phi, np.eye(8)[:, [0, 2, 4, 6]]) == pytest.approx(1.0)
    assert forms.evaluate(Phi, np.eye(8)[:, [0, 1, 2, 3]]) == pytest.approx(1.0)
    # Phi is self-dual
    assert forms.hodge_star(Phi).allclose(Phi)


def test_wedge_graded_commutativity(rng):
    a, b = random_form(rng, 6, 2), random_form(rng, 6, 3)
    assert forms.wedge(a, b).allclose(forms.wedge(b, a))
    c = random_form(rng, 6, 1)
    assert forms.wedge(c, c).norm() < 1e-12


def test_hodge_star_involution(rng):
    for n, k in ((7, 3), (8, 4), (5, 2)):
        a = random_form(rng, n, k)
        sign = (-1) ** (k * (n - k))
        assert forms.hodge_star(forms.hodge_star(a)).allclose(a * sign)


def test_phi_wedge_star_phi_is_seven_volumes():
    phi = forms.standard_phi()
    top = forms.wedge(phi, forms.hodge_star(phi))
    assert forms.top_form_value(top) == pytest.approx(7.0)


def test_interior_and_evaluate(rng):
    phi = forms.standard_phi()
    x, y, z = rng.standard_normal((3, 7))
    assert forms.evaluate(forms.interior(x, phi), [y, z]) == pytest.approx(forms.evaluate(phi, [x, y, z]))


def test_pullback_agrees_with_split_matrix(rng):
    gs = sample_so_batch(8, 5, rng)
    Phi = forms.standard_Phi()
    A = forms.split_matrix(Phi)
    batched = forms.pullback_split(Phi, gs, A)
    for g, B in zip(gs, batched):
        assert np.allclose(forms.split_matrix(forms.pullback(Phi, g)), B, atol=1e-12)


def test_minors_match_determinants(rng):
    g = rng.standard_normal((4, 6, 6))
    for k in (1, 2, 3, 4):
        rows = list(itertools.combinations(range(6), k))[:5]
        cols = list(itertools.combinations(range(6), k))[-5:]
        m = forms.minors(g, rows, cols)
        for i, r in enumerate(rows):
            for j, c in enumerate(cols):
                assert np.allclose(m[:, i, j], np.linalg.det(g[:, list(r)][:, :, list(c)]))


def test_normalize_metric_standard():
    G, tau = forms.normalize_metric(forms.standard_phi())
    assert np.abs(G.entries - np.eye(7)).max() < 1e-12
    assert G.is_positive_definite()


def test_normalize_metric_scaled_form():
    # 8 phi has metric 4 * identity; the fixed point is unique
    G, _ = forms.normalize_metric(forms.standard_phi() * 8.0)
    assert np.allclose(G.entries, 4 * np.eye(7))


def test_annihilator_dimensions():
    assert len(forms.annihilator_algebra(forms.standard_phi())) == 14
    assert len(forms.annihilator_algebra(forms.standard_Phi())) == 21
    assert len(forms.annihilator_algebra(forms.kaehler_form(4))) == 16  # u(4)


def test_form_validation():
    with pytest.raises(forms.FormError):
        forms.AlternatingForm(3, 2, np.ones(4))
    with pytest.raises(forms.FormError):
        forms.GramForm(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_json_roundtrip(rng):
    a = random_form(rng, 7, 3)
    assert forms.AlternatingForm.from_json(a.to_json()).allclose(a, 0.0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_pullback_is_functorial(seed):
    rng = np.random.default_rng(seed)
    a = random_form(rng, 5, 2)
    g, h = rng.standard_normal((2, 5, 5))
    assert forms.pullback(forms.pullback(a, g), h).allclose(forms.pullback(a, g @ h), 1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_pullback_commutes_with_wedge(seed):
    rng = np.random.default_rng(seed)
    a, b = random_form(rng, 6, 2), random_form(rng, 6, 2)
    g = rng.standard_normal((6, 6))
    lhs = forms.pullback(forms.wedge(a, b), g)
    rhs = forms.wedge(forms.pullback(a, g), forms.pullback(b, g))
    assert lhs.allclose(rhs, 1e-8 * max(1.0, lhs.norm()))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_phi_invariant_under_its_algebra(seed):
    rng = np.random.default_rng(seed)
    basis = forms.annihilator_algebra(forms.standard_phi())
    X = sum(c * B for c, B in zip(rng.standard_normal(len(basis)), basis))
    assert forms.derivation(X, forms.standard_phi()).norm() < 1e-10
