import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adiabat.errors import NumericalError
from adiabat.evolve import evolve
from adiabat.experiments import (
    LinearFit,
    ScheduleSpec,
    SustainedScan,
    criterion_runtime,
    decade_slopes,
    envelope_crossing,
    envelope_exponential_fit,
    envelope_power_fit,
    error_vs_runtime,
    find_runtime,
    fit_power_law,
    scaling_sweep,
    size_model,
    table_one_exponents,
    upper_envelope,
)
from adiabat.model import GapAnsatz, ModelKind, build_grover_linear, build_qubit_product
from adiabat.schedule import Smoothness, normalization_constant
from adiabat.spectrum import criterion_integral

# ---------------------------------------------------------------- fits


def test_power_law_exact():
    x = np.array([1, 2, 4, 8, 16.0])
    fit = fit_power_law(x, 3 * x**0.5)
    assert fit.success
    assert fit.exponent == pytest.approx(0.5, abs=1e-12)
    assert fit.intercept == pytest.approx(math.log(3), abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.stderr == pytest.approx(0.0, abs=1e-7)
    assert fit.within(0.5, 0.01)


def test_power_law_refuses_few_points():
    fit = fit_power_law([1, 2, 3, 4], [1, 2, 3, 4])
    assert not fit.success and math.isnan(fit.exponent)
    assert len(fit.points) == 4


def test_power_law_refuses_nonpositive():
    assert not fit_power_law([1, 2, 3, 4, 5], [1, 2, 0, 4, 5]).success


def test_fit_stderr_matches_numpy():
    rng = np.random.default_rng(1)
    x = np.linspace(0, 1, 20)
    y = 2 * x + rng.normal(0, 0.1, x.size)
    fit = LinearFit.from_data(x, y)
    coef, cov = np.polyfit(x, y, 1, cov="unscaled")
    resid = y - np.polyval(coef, x)
    sigma2 = resid @ resid / (x.size - 2)
    assert fit.slope == pytest.approx(coef[0])
    assert fit.stderr == pytest.approx(math.sqrt(sigma2 * cov[0, 0]))


def test_upper_envelope_picks_crests():
    y = np.array([5, 1, 4, 0.5, 3, 0.2, 2, 0.1])
    np.testing.assert_array_equal(upper_envelope(y), [0, 2, 4, 6, 7])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(1e-12, 1.0), min_size=1, max_size=60))
def test_upper_envelope_property(values):
    y = np.array(values)
    k = upper_envelope(y)
    assert k[-1] == len(y) - 1
    assert np.all(np.diff(y[k]) <= 0)
    for i in range(len(y)):
        assert (i in k) == bool(y[i] >= y[i:].max())


def test_envelope_fits_recover_rates():
    T = np.linspace(10, 100, 200)
    err = np.exp(-0.05 * T) * (1 + np.cos(T)) / 2 + 1e-300
    assert envelope_exponential_fit(T, err).slope == pytest.approx(-0.05, rel=0.02)
    err_p = T**-2.0 * np.cos(T) ** 2 + 1e-300
    assert envelope_power_fit(T, err_p).slope == pytest.approx(-2.0, rel=0.05)
    slopes = decade_slopes(np.geomspace(1, 1e4, 400), np.geomspace(1, 1e4, 400) ** -3.0, 1.0, 3)
    np.testing.assert_allclose(slopes, -3.0, atol=1e-10)


def test_envelope_fit_needs_points():
    with pytest.raises(NumericalError):
        envelope_power_fit([1.0, 2.0], [1.0, 0.5])


def test_envelope_crossing_interpolates():
    T = np.array([1.0, 2.0, 3.0, 4.0])
    err = np.array([1e-1, 1e-2, 1e-3, 1e-4])
    assert envelope_crossing(T, err, 10**-2.5) == pytest.approx(2.5)
    assert math.isnan(envelope_crossing(T, err, 1e-6))
    assert envelope_crossing(T, err, 1.0) == 1.0


def test_sustained_runtime_uses_lifted_threshold():
    T = np.geomspace(1, 1000, 301)
    scan = SustainedScan(T, 1.0 / T**2)
    # single-qubit error below 1 - 0.99**(1/M) is needed
    for m in (1, 16, 256):
        eps = -math.expm1(math.log(0.99) / m)
        assert scan.runtime(m, 0.99) == pytest.approx(eps**-0.5, rel=1e-3)


# ---------------------------------------------------------------- runtime search


def test_find_runtime_zero_target_returns_floor():
    res = find_runtime(build_grover_linear(100, 0), ScheduleSpec(1), 0.0, T_floor=3.0)
    assert res.success and res.T_star == 3.0 and res.bracket == (3.0, 3.0)


def test_find_runtime_bracket_and_confirmation():
    model = build_grover_linear(100, 0)
    spec = ScheduleSpec(1)
    res = find_runtime(model, spec, 0.75)
    lo, hi = res.bracket
    assert res.success and hi == res.T_star
    assert hi / lo - 1 <= 0.02
    # confirmation run on a fresh schedule built directly at T_star
    fresh = evolve(model, spec.build(model, res.T_star))
    assert fresh.fidelity >= 0.75
    assert 3 <= res.T_star <= 30


@pytest.mark.parametrize("d, ratio", [(1, 2.0), (-1, 4.0)])
def test_find_runtime_size_ratio(d, ratio):
    spec = ScheduleSpec(d)
    t100 = find_runtime(build_grover_linear(100, 0), spec, 0.75).T_star
    t400 = find_runtime(build_grover_linear(400, 0), spec, 0.75).T_star
    assert t400 / t100 == pytest.approx(ratio, rel=0.25)


def test_find_runtime_cap_failure():
    res = find_runtime(build_grover_linear(1000, 0), ScheduleSpec(-1), 0.99, T_cap=8.0)
    assert not res.success and math.isnan(res.T_star)
    assert "T_cap" in res.message


def test_find_runtime_rejects_bad_target():
    with pytest.raises(ValueError):
        find_runtime(build_grover_linear(100, 0), ScheduleSpec(1), 1.0)


def test_schedule_spec_validation():
    with pytest.raises(ValueError):
        ScheduleSpec(4)
    with pytest.raises(ValueError):
        ScheduleSpec(1, Smoothness.C1, (0.9, 0.1))


# ---------------------------------------------------------------- sweeps


def test_sweep_refuses_on_failure():
    fit, results = scaling_sweep(ModelKind.GROVER_LINEAR, ScheduleSpec(-1), 0.75, [16, 32, 64, 128, 4096], T_cap=1000.0, jobs=1)
    assert not fit.success and math.isnan(fit.exponent)
    assert not results[-1].success and results[0].success
    assert "4096" in fit.message


def test_sweep_is_deterministic_across_workers():
    args = (ModelKind.GROVER_LINEAR, ScheduleSpec(1), 0.75, [16, 32, 64, 128, 256])
    a, ra = scaling_sweep(*args, jobs=1)
    b, rb = scaling_sweep(*args, jobs=2)
    assert a.points == b.points and a.exponent == b.exponent
    assert [r.T_star for r in ra] == [r.T_star for r in rb]


def test_sweep_log_correction_for_d0():
    fit, _ = scaling_sweep(ModelKind.GROVER_LINEAR, ScheduleSpec(0), 0.75, [64, 128, 256, 512, 1024], jobs=1)
    assert fit.corrected is not None
    xs, ts = zip(*fit.points)
    np.testing.assert_allclose([p[1] for p in fit.corrected.points], np.array(ts) / np.log(4 * np.array(xs)))


def test_size_model():
    assert size_model("qubit_product", 16).factors == 16
    assert size_model(ModelKind.GROVER_QUADRATIC, 64).params["n"] == 64
    with pytest.raises(ValueError):
        size_model(ModelKind.TWO_LEVEL_ANSATZ, 4)


# ---------------------------------------------------------------- criterion path


def test_criterion_runtime_threshold_definition():
    ans = GapAnsatz(1, 2, 0.01, 0.5)
    T = criterion_runtime(ans, 1, threshold=10.0)
    alpha = normalization_constant(ans, 1) / T
    assert criterion_integral(ans, 1, alpha).value == pytest.approx(10.0, rel=1e-9)


def test_table_one_log_removal():
    gaps = np.geomspace(1e-3, 1e-1, 9)
    raw = table_one_exponents(2, 2.0, 0, gaps, remove_log=False)
    fixed = table_one_exponents(2, 2.0, 0, gaps)
    assert raw.exponent > fixed.exponent
    assert fixed.exponent == pytest.approx(1.0, abs=0.1)


# ---------------------------------------------------------------- decay table


def test_error_vs_runtime_sorted_and_parallel_identical():
    model = build_qubit_product(2)
    spec = ScheduleSpec(-1, Smoothness.C1)
    grid = [30.0, 10.0, 20.0, 15.0]
    a = error_vs_runtime(model, spec, grid, jobs=1)
    b = error_vs_runtime(model, spec, grid, jobs=2)
    np.testing.assert_array_equal(a.T, sorted(grid))
    np.testing.assert_array_equal(a.final_error, b.final_error)
    np.testing.assert_array_equal(a.max_intermediate_error, b.max_intermediate_error)
    assert len(list(a.rows())) == 4
