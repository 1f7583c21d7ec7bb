"""
Interpolation schedules ``s(t)`` from ``ds/dt = alpha * gap(s)**(d+1)``.

A raw schedule with exponent ``d`` spends time in proportion to
``gap(s)**-(d+1)``: ``d = -1`` is the constant-velocity ramp, ``d = 1`` the
locally adiabatic sweep.  Endpoint smoothing classes replace the first and
last stretches of the schedule so that the velocity (C1) or every derivative
(Cinf) vanishes at ``t = 0`` and ``t = T``.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicHermiteSpline

from . import _kernel as K
from .model import ConstantGap, GapAnsatz, GapLike, HamiltonianModel
from .spectrum import gap, gap_profile


class Smoothness(str, enum.Enum):
    RAW = "raw"
    C0 = "C0"
    C1 = "C1"
    CINF = "Cinf"


DEFAULT_MATCH = (0.1, 0.9)
POINTS_PER_WIDTH = 200


def blend(x):
    """Vectorized smooth step built from ``exp(-1/x)``; returns ``(w, dw/dx)``."""
    x = np.asarray(x, dtype=float)
    w = np.where(x >= 1.0, 1.0, 0.0)
    dw = np.zeros_like(x)
    inside = (x > 0.0) & (x < 1.0)
    xi = x[inside]
    with np.errstate(over="ignore"):
        arg = 1.0 / xi - 1.0 / (1.0 - xi)
        wi = 1.0 / (1.0 + np.exp(np.clip(arg, -700, 700)))
    w[inside] = wi
    dw[inside] = wi * (1.0 - wi) * (1.0 / xi**2 + 1.0 / (1.0 - xi) ** 2)
    return w, dw


@dataclass(frozen=True, eq=False)
class Schedule:
    """Monotone map ``t -> s`` on ``[0, T]``; immutable.

    ``t_grid``/``s_grid``/``v_grid`` tabulate the raw schedule; the smoothed
    classes only modify ``[0, t1]`` and ``[t2, T]``.
    """

    T: float
    d: int
    alpha: float
    gapfn: GapLike | None
    smoothness: Smoothness = Smoothness.RAW
    match_fracs: tuple[float, float] = DEFAULT_MATCH
    t_grid: np.ndarray = field(default=None, repr=False)
    s_grid: np.ndarray = field(default=None, repr=False)
    v_grid: np.ndarray = field(default=None, repr=False)
    cubic: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    hold: float | None = None
    _spline: CubicHermiteSpline = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_spline", CubicHermiteSpline(self.t_grid, self.s_grid, self.v_grid))

    @property
    def t1(self) -> float:
        return self.match_fracs[0] * self.T

    @property
    def t2(self) -> float:
        return self.match_fracs[1] * self.T

    def raw_velocity(self, s):
        """``alpha * gap(s)**(d+1)`` evaluated from the defining relation."""
        s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
        if self.d == -1:
            return np.full(s.shape, self.alpha)
        return self.alpha * np.real(gap(self.gapfn, s)) ** (self.d + 1)

    def raw(self, t):
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.T)
        s = np.clip(self._spline(t), 0.0, 1.0)
        return s, self.raw_velocity(s)

    def h(self, s):
        """``h(s) = (ds/dt) / gap(s)`` of the raw relation."""
        s = np.asarray(s, dtype=float)
        return self.raw_velocity(s) / np.real(gap(self.gapfn, s))

    def kernel_params(self) -> tuple[np.ndarray, np.ndarray]:
        p = np.zeros(K.N_PARAMS)
        gco = np.zeros((1, 2, 2), dtype=complex)
        if self.hold is not None:
            p[K.P_KIND] = K.KIND_FROZEN
            p[K.P_HOLD] = self.hold
            return p, gco
        p[K.P_KIND] = K.KIND_PROFILE
        p[K.P_T] = self.T
        p[K.P_ALPHA] = self.alpha
        p[K.P_D] = self.d
        p[K.P_SMOOTH] = {
            Smoothness.RAW: K.SMOOTH_NONE,
            Smoothness.C0: K.SMOOTH_NONE,
            Smoothness.C1: K.SMOOTH_C1,
            Smoothness.CINF: K.SMOOTH_CINF,
        }[self.smoothness]
        p[K.P_T1], p[K.P_T2] = self.t1, self.t2
        p[K.P_A0], p[K.P_B0], p[K.P_A1], p[K.P_B1] = self.cubic
        g = self.gapfn
        if isinstance(g, ConstantGap) or g is None:
            p[K.P_GAPMODE] = K.GAP_CONST
            p[K.P_GAPCONST] = 1.0 if g is None else g.value
        elif isinstance(g, GapAnsatz):
            p[K.P_GAPMODE] = K.GAP_ANSATZ
            p[K.P_ANS_A], p[K.P_ANS_B], p[K.P_ANS_G], p[K.P_ANS_SMIN] = g.a, g.b, g.gap_min, g.s_min
        else:
            p[K.P_GAPMODE] = K.GAP_POLY
            gco = np.ascontiguousarray(g.coeffs)
        return p, gco


def _inverse_power(gapfn: GapLike, d: int):
    def f(s):
        return np.real(gap(gapfn, s)) ** (-(d + 1))

    return f


def normalization_constant(gapfn: GapLike, d: int) -> float:
    """``int_0^1 gap(s)**-(d+1) ds``; the runtime is this integral over ``alpha``."""
    if d == -1:
        return 1.0
    s_min, width = gap_profile(gapfn)
    if float(np.min(np.real(gap(gapfn, np.array([0.0, s_min, 1.0]))))) <= 0.0:
        raise ValueError("gap vanishes on [0, 1]; runtime integral diverges")
    f = _inverse_power(gapfn, d)
    pts = [s_min] if 0 < s_min < 1 else None
    value, err = integrate.quad(lambda s: float(f(s)), 0.0, 1.0, points=pts, epsabs=0.0, epsrel=1e-11, limit=1000)
    if err > 1e-8 * abs(value):
        warnings.warn(f"runtime integral relative error {err / value:.1e}", RuntimeWarning, stacklevel=2)
    return value


def _s_grid(gapfn: GapLike) -> np.ndarray:
    base = np.linspace(0.0, 1.0, 2001)
    s_min, width = gap_profile(gapfn)
    if not math.isfinite(width):
        return base
    half = 25
    local = s_min + width * np.linspace(-half, half, 2 * half * POINTS_PER_WIDTH + 1)
    grid = np.unique(np.concatenate([base, local[(local > 0.0) & (local < 1.0)]]))
    # the two grids can coincide up to rounding; drop the near-duplicates
    keep = np.concatenate([[True], np.diff(grid) > 1e-12])
    keep[-1] = True
    grid = grid[keep]
    if grid[-2] >= 1.0 - 1e-12:
        grid = np.delete(grid, -2)
    return grid


def make_schedule(gapfn: GapLike, d: int, T: float) -> Schedule:
    """Raw schedule ``ds/dt = alpha * gap(s)**(d+1)`` with ``s(0) = 0``, ``s(T) = 1``."""
    if not T > 0:
        raise ValueError(f"runtime must be positive, got {T}")
    if int(d) != d:
        raise ValueError(f"exponent d must be an integer, got {d}")
    d = int(d)
    if d == -1:
        t_grid = np.array([0.0, T])
        s_grid = np.array([0.0, 1.0])
        return Schedule(T, d, 1.0 / T, gapfn, t_grid=t_grid, s_grid=s_grid, v_grid=np.full(2, 1.0 / T))
    s_grid = _s_grid(gapfn)
    f = _inverse_power(gapfn, d)
    gx, gw = np.polynomial.legendre.leggauss(6)
    lo, hi = s_grid[:-1, None], s_grid[1:, None]
    nodes = 0.5 * (hi - lo) * gx + 0.5 * (hi + lo)
    seg = np.sum(0.5 * (hi - lo) * gw * f(nodes), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if np.any(np.diff(cum) <= 0):
        raise RuntimeError("non-monotonic t(s); the gap must stay positive")
    alpha = cum[-1] / T
    t_grid = cum / alpha
    t_grid[-1] = T
    v_grid = alpha * np.real(gap(gapfn, s_grid)) ** (d + 1)
    return Schedule(T, d, alpha, gapfn, t_grid=t_grid, s_grid=s_grid, v_grid=v_grid)


def frozen_schedule(T: float, s: float = 0.0) -> Schedule:
    """Schedule that holds ``H(s)`` fixed for the whole runtime."""
    return Schedule(T, -1, 0.0, None, t_grid=np.array([0.0, T]), s_grid=np.array([s, s]), v_grid=np.zeros(2), hold=float(s))


def with_runtime(sched: Schedule, T: float) -> Schedule:
    """Same shape of schedule stretched to runtime ``T``."""
    scale = T / sched.T
    out = replace(
        sched,
        T=T,
        alpha=sched.alpha / scale,
        t_grid=sched.t_grid * scale,
        v_grid=sched.v_grid / scale,
        smoothness=Smoothness.RAW,
        cubic=(0.0, 0.0, 0.0, 0.0),
    )
    if sched.hold is not None:
        return out
    return smooth(out, sched.smoothness, sched.match_fracs) if sched.smoothness is not Smoothness.RAW else out


def _cubic_coeffs(value: float, slope: float, span: float) -> tuple[float, float]:
    # p(u) = a u^2 + b u^3 with p(span) = value, p'(span) = slope, p(0) = p'(0) = 0
    a = (3.0 * value - slope * span) / span**2
    b = (slope * span - 2.0 * value) / span**3
    return a, b


def smooth(sched: Schedule, cls: Smoothness | str, match_fracs: tuple[float, float] | None = None) -> Schedule:
    """Apply an endpoint smoothing class; the interior ``[t1, t2]`` is untouched."""
    cls = Smoothness(cls)
    if sched.hold is not None:
        return sched
    fracs = tuple(float(x) for x in (match_fracs if match_fracs is not None else sched.match_fracs))
    if not 0.0 < fracs[0] < fracs[1] < 1.0:
        raise ValueError(f"match fractions must satisfy 0 < t1/T < t2/T < 1, got {fracs}")
    base = replace(sched, smoothness=Smoothness.RAW, cubic=(0.0, 0.0, 0.0, 0.0))
    if cls in (Smoothness.RAW, Smoothness.C0):
        return replace(base, smoothness=cls, match_fracs=fracs)
    if cls is Smoothness.CINF:
        return replace(base, smoothness=cls, match_fracs=fracs)
    T = sched.T
    for _ in range(40):
        t1, t2 = fracs[0] * T, fracs[1] * T
        (s1, s2), (v1, v2) = base.raw(np.array([t1, t2]))
        # cubic segments are monotone iff the slope condition below holds
        ok_start = v1 * t1 <= 3.0 * s1
        ok_end = v2 * (T - t2) <= 3.0 * (1.0 - s2)
        if ok_start and ok_end:
            a0, b0 = _cubic_coeffs(s1, v1, t1)
            a1, b1 = _cubic_coeffs(1.0 - s2, v2, T - t2)
            return replace(base, smoothness=cls, match_fracs=fracs, cubic=(a0, b0, a1, b1))
        warnings.warn(f"C1 segment would overshoot at match fractions {fracs}; shrinking", RuntimeWarning, stacklevel=2)
        fracs = (fracs[0] / 2 if not ok_start else fracs[0], 1.0 - (1.0 - fracs[1]) / 2 if not ok_end else fracs[1])
    raise RuntimeError("could not find monotone C1 matching points")


def sample(sched: Schedule, t):
    """``(s, ds/dt)`` at times ``t``; endpoints are held outside ``[0, T]``."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if sched.hold is not None:
        s = np.full(t_arr.shape, sched.hold)
        v = np.zeros(t_arr.shape)
    else:
        s, v = _sample_profile(sched, t_arr)
    if np.ndim(t) == 0:
        return float(s[0]), float(v[0])
    return s, v


def _sample_profile(sched: Schedule, t: np.ndarray):
    T = sched.T
    sig, rate = sched.raw(t)
    s = sig.copy()
    v = rate.copy()
    t1, t2 = sched.t1, sched.t2
    start = (t >= 0) & (t < t1)
    end = (t > t2) & (t <= T)
    if sched.smoothness is Smoothness.C1:
        a0, b0, a1, b1 = sched.cubic
        ts = t[start]
        s[start] = a0 * ts**2 + b0 * ts**3
        v[start] = 2 * a0 * ts + 3 * b0 * ts**2
        u = T - t[end]
        s[end] = 1.0 - (a1 * u**2 + b1 * u**3)
        v[end] = 2 * a1 * u + 3 * b1 * u**2
    elif sched.smoothness is Smoothness.CINF:
        w, dw = blend(t[start] / t1)
        s[start] = w * sig[start]
        v[start] = dw / t1 * sig[start] + w * rate[start]
        span = T - t2
        w, dw = blend((T - t[end]) / span)
        s[end] = 1.0 - w * (1.0 - sig[end])
        v[end] = dw / span * (1.0 - sig[end]) + w * rate[end]
    s[t < 0] = 0.0
    v[t < 0] = 0.0
    s[t > T] = 1.0
    v[t > T] = 0.0
    return s, v


def runtime_from_h(sched: Schedule) -> float:
    """Recompute ``T = int_0^1 ds / (gap(s) h(s))`` by adaptive quadrature."""
    if sched.d == -1:
        return 1.0 / sched.alpha
    return normalization_constant(sched.gapfn, sched.d) / sched.alpha
