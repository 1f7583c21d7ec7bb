import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from adiabat.model import ConstantGap, GapAnsatz, build_grover_linear, build_qubit_product
from adiabat.schedule import (
    Smoothness,
    blend,
    frozen_schedule,
    make_schedule,
    normalization_constant,
    runtime_from_h,
    sample,
    smooth,
    with_runtime,
)
from adiabat.spectrum import gap

GROVER = build_grover_linear(100, 0)


def grover_d1_integral(n):
    # int_0^1 ds / (c (s - 1/2)**2 + 1/N) with c = 4 (1 - 1/N)
    c = 4 * (1 - 1 / n)
    k = math.sqrt(c * n)
    return 2 * n / k * math.atan(k / 2)


# ---------------------------------------------------------------- runtime integral


@pytest.mark.parametrize("d", [-1, 0, 1, 2, 3])
def test_constant_gap_integral(d):
    assert normalization_constant(ConstantGap(), d) == pytest.approx(1.0, rel=1e-12)


def test_grover_d1_closed_form():
    assert normalization_constant(GROVER, 1) == pytest.approx(grover_d1_integral(100), rel=1e-8)


def test_grover_d0_grows_like_log_n():
    vals = [normalization_constant(build_grover_linear(n, 0), 0) for n in (100, 1000, 10_000)]
    # int ds/gap = ln(...)/sqrt(c): successive decades add about ln(sqrt(10)) each
    steps = np.diff(vals)
    np.testing.assert_allclose(steps, 0.5 * math.log(10), rtol=0.02)


def test_vanishing_gap_rejected():
    with pytest.raises(ValueError):
        normalization_constant(ConstantGap(0.0), 1)


# ---------------------------------------------------------------- raw schedules


def test_constant_gap_schedule():
    sched = make_schedule(ConstantGap(), 0, 10.0)
    assert sample(sched, 5.0)[0] == pytest.approx(0.5, abs=1e-12)
    s, v = sample(sched, 5.0)
    assert v == pytest.approx(0.1)


def test_grover_d1_velocity_ratio():
    sched = make_schedule(GROVER, 1, 40.0)
    ratio = sched.raw_velocity(0.5) / sched.raw_velocity(0.0)
    assert float(ratio) == pytest.approx(0.01, rel=1e-12)
    t = np.linspace(0, 40, 4001)
    s, v = sample(sched, t)
    k = np.argmin(np.abs(s - 0.5))
    assert v[k] / v[0] == pytest.approx(0.01, rel=1e-3)


def test_grover_linear_ramp():
    sched = make_schedule(GROVER, -1, 30.0)
    t = np.linspace(0, 30, 301)
    s, v = sample(sched, t)
    np.testing.assert_allclose(s, t / 30, atol=1e-12)
    np.testing.assert_allclose(v, 1 / 30, rtol=1e-12)


@pytest.mark.parametrize("d", [-1, 0, 1, 2, 3])
def test_raw_endpoints_and_defining_relation(d):
    sched = make_schedule(GROVER, d, 50.0)
    t = np.linspace(0, 50, 2001)
    s, v = sample(sched, t)
    assert s[0] == pytest.approx(0.0, abs=1e-9) and s[-1] == pytest.approx(1.0, abs=1e-9)
    assert np.all(np.diff(s) >= 0)
    np.testing.assert_allclose(v, sched.alpha * gap(GROVER, s) ** (d + 1), rtol=1e-8)
    # independent oracle: t(s) = int_0^s gap**-(d+1) / alpha by adaptive quadrature
    for s_k in (0.1, 0.45, 0.5, 0.52, 0.9):
        t_k = quad(lambda x: float(gap(GROVER, x)) ** (-(d + 1)), 0, s_k, points=[0.5] if s_k > 0.5 else None)[0] / sched.alpha
        assert sample(sched, t_k)[0] == pytest.approx(s_k, abs=1e-8)


@pytest.mark.parametrize("d", [-1, 0, 1, 2, 3])
def test_runtime_identity(d):
    for gapfn in (GROVER, GapAnsatz(2, 2, 0.01, 0.4)):
        sched = make_schedule(gapfn, d, 123.0)
        assert runtime_from_h(sched) == pytest.approx(123.0, rel=1e-6)


def test_make_schedule_rejects_bad_input():
    with pytest.raises(ValueError):
        make_schedule(GROVER, 1, 0.0)
    with pytest.raises(ValueError):
        make_schedule(GROVER, 1.5, 10.0)


# ---------------------------------------------------------------- smoothing


def test_cinf_endpoints_and_interior():
    raw = make_schedule(GROVER, 1, 40.0)
    sm = smooth(raw, "Cinf")
    assert sample(sm, 0.0)[1] == pytest.approx(0.0, abs=1e-10)
    assert sample(sm, 40.0) == pytest.approx((1.0, 0.0), abs=1e-10)
    t = np.linspace(sm.t1, sm.t2, 501)
    np.testing.assert_array_equal(sample(sm, t)[0], sample(raw, t)[0])
    # effective h at the ends, (ds/dt) / gap, sums to zero
    h_ends = sample(sm, 0.0)[1] / float(gap(GROVER, 0.0)) + sample(sm, 40.0)[1] / float(gap(GROVER, 1.0))
    assert h_ends == pytest.approx(0.0, abs=1e-10)


def test_cinf_higher_differences_vanish_at_ends():
    sm = smooth(make_schedule(ConstantGap(), -1, 1.0), "Cinf")
    step = 5e-4
    s = sample(sm, step * np.arange(6))[0]
    for order in range(1, 5):
        diff = np.diff(s, order)[0] / step**order
        assert abs(diff) < 1e-9


def test_blend_is_smooth_step():
    w, dw = blend(np.array([-1.0, 0.0, 0.5, 1.0, 2.0]))
    np.testing.assert_allclose(w, [0, 0, 0.5, 1, 1])
    assert dw[0] == dw[1] == dw[3] == 0.0


def test_c1_of_linear_ramp():
    raw = make_schedule(ConstantGap(), -1, 10.0)
    sm = smooth(raw, "C1")
    t1 = sm.t1
    assert sample(sm, t1)[0] == pytest.approx(t1 / 10.0, abs=1e-15)
    assert sample(sm, 0.0)[1] == 0.0 and sample(sm, 10.0)[1] == 0.0
    # value and slope continuous at the match points
    for tm in (sm.t1, sm.t2):
        lo, hi = sample(sm, np.array([tm - 1e-9, tm + 1e-9]))[1]
        assert lo == pytest.approx(hi, abs=1e-7)


def test_c0_is_identity():
    raw = make_schedule(GROVER, -1, 10.0)
    sm = smooth(raw, Smoothness.C0)
    t = np.linspace(-1, 11, 121)
    np.testing.assert_array_equal(sample(sm, t)[0], sample(raw, t)[0])


def test_bad_match_fracs():
    with pytest.raises(ValueError):
        smooth(make_schedule(GROVER, 0, 10.0), "C1", (0.6, 0.4))


@pytest.mark.parametrize("cls", ["raw", "C0", "C1", "Cinf"])
@pytest.mark.parametrize("d", [-1, 0, 1, 3])
def test_monotone_and_boundary_layer(cls, d):
    raw = make_schedule(GROVER, d, 60.0)
    sm = smooth(raw, cls) if cls != "raw" else raw
    t = np.linspace(0, 60, 6001)
    s, v = sample(sm, t)
    assert np.all(np.diff(s) >= -1e-15)
    assert s[0] == pytest.approx(0, abs=1e-9) and s[-1] == pytest.approx(1, abs=1e-9)
    s_raw, v_raw = sample(raw, t)
    bound = (sm.match_fracs[0] + 1 - sm.match_fracs[1]) * v_raw.max() * 60.0
    assert np.max(np.abs(s - s_raw)) < bound


# ---------------------------------------------------------------- sampling


def test_sample_holds_outside():
    sched = smooth(make_schedule(GROVER, 1, 10.0), "Cinf")
    assert sample(sched, -1.0) == (0.0, 0.0)
    assert sample(sched, 11.0) == (1.0, 0.0)
    assert sample(sched, 10.0) == pytest.approx((1.0, 0.0))


def test_sample_constant_gap_midpoint():
    sched = make_schedule(ConstantGap(), 2, 8.0)
    assert sample(sched, 4.0) == pytest.approx((0.5, 1 / 8.0))


def test_frozen_schedule():
    sched = frozen_schedule(5.0, 0.3)
    s, v = sample(sched, np.linspace(0, 5, 11))
    np.testing.assert_array_equal(s, 0.3)
    np.testing.assert_array_equal(v, 0.0)


@settings(max_examples=25, deadline=None)
@given(T=st.floats(1.0, 1e4), d=st.integers(-1, 3), cls=st.sampled_from(["raw", "C1", "Cinf"]))
def test_with_runtime_rescales(T, d, cls):
    base = make_schedule(build_qubit_product(1), d, 1.0)
    base = smooth(base, cls) if cls != "raw" else base
    stretched = with_runtime(base, T)
    direct = make_schedule(build_qubit_product(1), d, T)
    direct = smooth(direct, cls) if cls != "raw" else direct
    u = np.linspace(0, 1, 51)
    np.testing.assert_allclose(sample(stretched, u * T)[0], sample(direct, u * T)[0], atol=1e-9)
    np.testing.assert_allclose(sample(stretched, u * T)[1] * T, sample(direct, u * T)[1] * T, atol=1e-8)
