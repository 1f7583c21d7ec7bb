import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiabat.errors import UnsupportedOperationError
from adiabat.model import (
    ConstantGap,
    GapAnsatz,
    build_grover_linear,
    build_grover_quadratic,
    build_qubit_product,
    build_two_level_ansatz,
    hamiltonian_at,
)
from adiabat.spectrum import (
    berry_phase,
    coupling_profile,
    criterion_integral,
    eigensystem_at,
    eigensystem_path,
    fast_limit_integral,
    gap,
    gap_eigensolver,
    gap_singularities,
    matrix_element,
)


def grover_gap_oracle(n, s):
    return np.sqrt(1 - 4 * (1 - 1 / n) * s * (1 - s))


# ---------------------------------------------------------------- eigensystems


def test_grover_eigensystem_examples():
    model = build_grover_linear(100, 0)
    np.testing.assert_allclose(eigensystem_at(model, 0.0).energies, [0, 1], atol=1e-14)
    assert eigensystem_at(model, 0.5).gap == pytest.approx(0.1, abs=1e-12)


def test_qubit_eigensystem_gap():
    assert eigensystem_at(build_qubit_product(1), 0.5).gap == pytest.approx(np.sqrt(0.5), abs=1e-12)


@pytest.mark.parametrize(
    "model", [build_grover_linear(100, 0), build_grover_quadratic(50, 1), build_qubit_product(2), build_two_level_ansatz(GapAnsatz(2, 2, 0.01, 0.3))]
)
def test_eigensystem_residual_and_gauge(model):
    s_vals = np.linspace(0, 1, 201)
    path = eigensystem_path(model, s_vals)
    for es in path:
        h = hamiltonian_at(model, es.s)
        assert np.all(np.diff(es.energies) >= 0)
        resid = h @ es.states - es.states * es.energies
        assert np.linalg.norm(resid) < 1e-12 * max(np.linalg.norm(h), 1.0)
        np.testing.assert_allclose(es.states.conj().T @ es.states, np.eye(2), atol=1e-13)
    for a, b in zip(path[:-1], path[1:]):
        assert np.all(np.real(np.sum(a.states.conj() * b.states, axis=0)) > 0)


def test_full_space_eigensystem():
    es = eigensystem_at(build_grover_linear(8, 1), 0.5, full=True)
    assert es.energies.shape == (8,)
    assert es.energies[1] - es.energies[0] == pytest.approx(grover_gap_oracle(8, 0.5), abs=1e-12)


# ---------------------------------------------------------------- gap


def test_gap_examples():
    assert float(gap(build_grover_linear(100, 0), 0.0)) == pytest.approx(1.0)
    assert float(gap(build_grover_linear(4, 0), 0.5)) == pytest.approx(0.5, abs=1e-14)
    assert abs(gap(GapAnsatz(1, 2, 0.1, 0.5), 0.5 - 0.1j)) < 1e-12


def test_complex_gap_of_matrix_model_unsupported():
    with pytest.raises(UnsupportedOperationError):
        gap(build_grover_linear(10, 0), 0.5 + 0.1j)


@pytest.mark.parametrize("n", [4, 100, 10_000])
def test_grover_closed_form_vs_eigensolver(n):
    model = build_grover_linear(n, 0)
    s = np.linspace(0, 1, 101)
    np.testing.assert_allclose(gap(model, s), grover_gap_oracle(n, s), atol=1e-13)
    assert np.max(np.abs(gap(model, s) - gap_eigensolver(model, s))) < 1e-12


# ---------------------------------------------------------------- matrix elements


def test_grover_coupling_peaks_mid_path():
    model = build_grover_linear(100, 0)
    f = np.array([abs(matrix_element(model, s)) for s in np.linspace(0, 1, 21)])
    k = int(np.argmax(f))
    assert k == 10
    assert np.all(np.diff(f[: k + 1]) > 0) and np.all(np.diff(f[k:]) < 0)


def test_qubit_coupling_at_start():
    assert abs(matrix_element(build_qubit_product(1), 0.0)) == pytest.approx(0.5, abs=1e-14)


def test_coupling_vanishes_without_derivative():
    # a model whose H(s) does not change has F_01 = 0 everywhere
    frozen = dataclasses.replace(build_qubit_product(1), coeffs=build_qubit_product(1).coeffs[:1].copy())
    assert abs(matrix_element(frozen, 0.4)) == 0.0


def test_matrix_element_rejects_same_level():
    with pytest.raises(ValueError):
        matrix_element(build_qubit_product(1), 0.3, 0, 0)


def test_coupling_profile_matches_pointwise():
    model = build_grover_quadratic(64, 0)
    s = np.linspace(0, 1, 33)
    g, f = coupling_profile(model, s)
    np.testing.assert_allclose(g, gap_eigensolver(model, s), atol=1e-13)
    np.testing.assert_allclose(f, [matrix_element(model, x) for x in s], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(s=st.floats(0, 1), flips=st.tuples(st.sampled_from([-1, 1]), st.sampled_from([-1, 1])), idx=st.integers(0, 2))
def test_coupling_gauge_invariance(s, flips, idx):
    model = [build_grover_linear(100, 0), build_qubit_product(1), build_two_level_ansatz(GapAnsatz(1, 2, 0.1, 0.5))][idx]
    es = eigensystem_at(model, s)
    flipped = dataclasses.replace(es, states=es.states * np.array(flips))
    assert abs(matrix_element(model, s, eig=flipped)) == pytest.approx(abs(matrix_element(model, s)), abs=1e-12)


# ---------------------------------------------------------------- singularities


def test_singularities_quadratic():
    sing = gap_singularities(GapAnsatz(1, 2, 0.1, 0.5))
    assert len(sing.all_roots) == 2
    assert sorted(sing.all_roots, key=lambda z: z.imag) == pytest.approx([0.5 - 0.1j, 0.5 + 0.1j], abs=1e-14)
    assert sing.dominant == pytest.approx(0.5 - 0.1j, abs=1e-14)
    assert all(r.imag < 0 for r in sing.roots)


def test_singularities_quartic():
    sing = gap_singularities(GapAnsatz(2, 2, 0.01, 0.5))
    assert len(sing.all_roots) == 4
    angles = sorted(np.degrees(np.angle(np.array(sing.all_roots) - 0.5)))
    np.testing.assert_allclose(angles, [-135, -45, 45, 135], atol=1e-10)
    np.testing.assert_allclose(np.abs(np.array(sing.all_roots) - 0.5), 0.1, atol=1e-14)


def test_singularity_radius_near_one():
    sing = gap_singularities(GapAnsatz(1, 2, 0.999999, 0.5))
    assert abs(sing.dominant - 0.5) == pytest.approx(0.999999, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(a=st.integers(1, 6), b=st.floats(0.5, 4), g=st.floats(1e-4, 0.99), smin=st.floats(0.05, 0.95))
def test_singularity_radius_law(a, b, g, smin):
    ans = GapAnsatz(a, b, g, smin)
    sing = gap_singularities(ans)
    radius = g ** (b / (2 * a))
    assert len(sing.all_roots) == 2 * a
    for r in sing.all_roots:
        assert abs(abs(r - smin) - radius) < 1e-12
        assert abs(gap(GapAnsatz(a, 2, g ** (b / 2), smin), r)) < 1e-6
    assert abs(sing.dominant.imag) == pytest.approx(min(abs(r.imag) for r in sing.roots), abs=1e-15)


# ---------------------------------------------------------------- criterion


def test_criterion_constant_gap_closed_form():
    val = criterion_integral(ConstantGap(1.0), 0, 0.01, singularity=0.5 - 0.1j)
    assert val.endpoint == pytest.approx(0.5 - 0.05j)
    # Re(i * z / alpha) for z = 0.5 - 0.05i
    assert val.value == pytest.approx(0.05 / 0.01, rel=1e-12)
    assert val.endpoint_sum == pytest.approx(0.02)


def test_criterion_suppressed_regime():
    ans = GapAnsatz(1, 2, 0.1, 0.5)
    assert criterion_integral(ans, 0, 1e-3).value > 10
    assert criterion_integral(ans, 0, 1.0).value < 1


@pytest.mark.parametrize("d", [-1, 0, 1, 2, 3])
@pytest.mark.parametrize("a", [1, 2])
def test_criterion_monotone_in_alpha(a, d):
    ans = GapAnsatz(a, 2, 0.01, 0.5)
    vals = [criterion_integral(ans, d, alpha).value for alpha in np.geomspace(1e-4, 1, 9)]
    assert np.all(np.diff(vals) < 0)


def test_criterion_requires_singularity_for_constant_gap():
    with pytest.raises(ValueError):
        criterion_integral(ConstantGap(), 0, 1.0)
    with pytest.raises(ValueError):
        criterion_integral(GapAnsatz(1, 2, 0.1, 0.5), 0, -1.0)


# ---------------------------------------------------------------- fast limit and Berry phase


@pytest.mark.parametrize("model", [build_grover_linear(100, 0), build_grover_linear(10_000, 0), build_qubit_product(1)])
def test_fast_limit_order_unity(model):
    assert 0.1 <= fast_limit_integral(model) <= 10


def test_qubit_fast_limit_oracle():
    # F01/gap for the single qubit is 1/(2 gap**2) up to sign
    from scipy.integrate import quad

    ref = quad(lambda s: 0.5 / (1 - 2 * s * (1 - s)), 0, 1)[0]
    assert fast_limit_integral(build_qubit_product(1)) == pytest.approx(ref, rel=1e-8)


@pytest.mark.parametrize("model", [build_grover_linear(100, 0), build_qubit_product(4)])
def test_berry_phase_vanishes(model):
    np.testing.assert_allclose(berry_phase(model, np.linspace(0, 1, 201)), 0.0, atol=1e-10)
    np.testing.assert_allclose(berry_phase(model, np.array([0.3])), 0.0, atol=0)
