"""
Runtime searches, scaling fits and error-decay studies built on ``evolve``.

Sweeps are embarrassingly parallel: each point builds its own model and
schedule inside a worker and results are re-ordered by the sweep parameter,
so sequential and parallel runs produce identical tables.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import NumericalError
from .evolve import DEFAULT_TOL, evolve, evolve_factorized, first_order_error, perturbative_error
from .model import GapAnsatz, HamiltonianModel, ModelKind, build_model, build_two_level_ansatz
from .schedule import DEFAULT_MATCH, Schedule, Smoothness, make_schedule, normalization_constant, smooth, with_runtime
from .spectrum import criterion_integral

MIN_FIT_POINTS = 5
CONFIRM_FACTOR = 1.05


@dataclass(frozen=True)
class ScheduleSpec:
    """Exponent ``d`` of ``h = alpha * gap**d`` plus an endpoint smoothing class."""

    d: int = -1
    smoothness: Smoothness = Smoothness.RAW
    match_fracs: tuple[float, float] = DEFAULT_MATCH

    def __post_init__(self):
        object.__setattr__(self, "smoothness", Smoothness(self.smoothness))
        object.__setattr__(self, "match_fracs", tuple(float(x) for x in self.match_fracs))
        if int(self.d) != self.d or not -1 <= self.d <= 3:
            raise ValueError(f"d must be an integer in [-1, 3], got {self.d}")
        lo, hi = self.match_fracs
        if not 0.0 < lo < hi < 1.0:
            raise ValueError(f"match fractions must satisfy 0 < t1/T < t2/T < 1, got {self.match_fracs}")

    def build(self, model: HamiltonianModel, T: float) -> Schedule:
        sched = make_schedule(model, self.d, T)
        if self.smoothness is Smoothness.RAW:
            return sched
        return smooth(sched, self.smoothness, self.match_fracs)


# ---------------------------------------------------------------- fits


@dataclass(frozen=True)
class LinearFit:
    """Least-squares line ``y = slope * x + intercept``."""

    slope: float
    intercept: float
    stderr: float
    r_squared: float

    @classmethod
    def from_data(cls, x, y) -> "LinearFit":
        res = stats.linregress(np.asarray(x, float), np.asarray(y, float))
        return cls(float(res.slope), float(res.intercept), float(res.stderr), float(res.rvalue**2))


@dataclass(frozen=True)
class ScalingFit:
    """Power law ``T* ~ x**exponent`` fitted in log-log space.

    When the fit is refused (too few points or a failed size) ``exponent`` and
    the statistics are NaN, ``success`` is False and ``points`` holds whatever
    was measured.  ``corrected`` carries the fit after dividing out a
    logarithmic factor, when requested.
    """

    exponent: float
    intercept: float
    stderr: float
    r_squared: float
    points: tuple[tuple[float, float], ...]
    success: bool = True
    message: str = ""
    corrected: "ScalingFit | None" = None

    def within(self, expected: float, tolerance: float) -> bool:
        return self.success and abs(self.exponent - expected) <= tolerance

    def as_dict(self) -> dict:
        out = {
            "exponent": self.exponent,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "r_squared": self.r_squared,
            "success": self.success,
            "message": self.message,
            "points": [list(p) for p in self.points],
        }
        if self.corrected is not None:
            out["corrected"] = self.corrected.as_dict()
        return out


def _refused(points, message) -> ScalingFit:
    nan = float("nan")
    return ScalingFit(nan, nan, nan, nan, tuple(points), success=False, message=message)


def fit_power_law(x, y) -> ScalingFit:
    """Fit ``log y = exponent * log x + intercept``; needs at least five points."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    points = tuple((float(a), float(b)) for a, b in zip(x, y))
    if len(x) < MIN_FIT_POINTS:
        return _refused(points, f"need at least {MIN_FIT_POINTS} points, got {len(x)}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        return _refused(points, "power-law fit needs positive finite data")
    lf = LinearFit.from_data(np.log(x), np.log(y))
    return ScalingFit(lf.slope, lf.intercept, lf.stderr, lf.r_squared, points)


def upper_envelope(y) -> np.ndarray:
    """Indices of samples not exceeded by any later sample.

    For a decaying oscillation this picks out the crests, which is what the
    envelope fits use.
    """
    y = np.asarray(y, float)
    later = np.maximum.accumulate(y[::-1])[::-1]
    return np.flatnonzero(y >= later)


def envelope_exponential_fit(T, err, window: tuple[float, float] | None = None) -> LinearFit:
    """Fit ``log err`` of the envelope crests linearly in ``T``."""
    T, err = _window(T, err, window)
    k = upper_envelope(err)
    k = k[err[k] > 0]
    if len(k) < 3:
        raise NumericalError("too few envelope points for an exponential fit")
    return LinearFit.from_data(T[k], np.log(err[k]))


def envelope_power_fit(T, err, window: tuple[float, float] | None = None) -> LinearFit:
    """Log-log fit of the envelope crests of ``err`` against ``T``."""
    T, err = _window(T, err, window)
    k = upper_envelope(err)
    k = k[err[k] > 0]
    if len(k) < 3:
        raise NumericalError("too few envelope points for a power-law fit")
    return LinearFit.from_data(np.log(T[k]), np.log(err[k]))


def decade_slopes(T, err, start: float, decades: int = 3) -> list[float]:
    """Envelope log-log slope over consecutive decades ``[start 10**k, start 10**(k+1)]``."""
    return [envelope_power_fit(T, err, (start * 10**k, start * 10 ** (k + 1))).slope for k in range(decades)]


def _window(T, err, window):
    T = np.asarray(T, float)
    err = np.asarray(err, float)
    if window is None:
        return T, err
    keep = (T >= window[0]) & (T <= window[1])
    return T[keep], err[keep]


# ---------------------------------------------------------------- parallel map


def default_jobs() -> int:
    return os.cpu_count() or 1


def _pmap(fn, tasks: list, jobs: int | None) -> list:
    jobs = default_jobs() if jobs is None else int(jobs)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(fn, tasks))


def size_model(kind: ModelKind | str, size: int) -> HamiltonianModel:
    """Model of the given family at problem size ``size`` (``N`` or ``M``)."""
    kind = ModelKind(kind)
    if kind is ModelKind.QUBIT_PRODUCT:
        return build_model(kind, m=int(size))
    if kind is ModelKind.TWO_LEVEL_ANSATZ:
        raise ValueError("two-level models are parametrized by gap_min, not a size")
    return build_model(kind, n=int(size))


# ---------------------------------------------------------------- runtime search


@dataclass(frozen=True)
class RuntimeSearchResult:
    """Outcome of the runtime-to-fidelity search.

    On success ``bracket = (T_low, T_high)`` with ``T_high / T_low - 1 <=
    rel_tol`` and ``T_star = T_high``, whose measured ``fidelity`` meets the
    target (also at ``1.05 T_high``).
    """

    T_star: float
    target_fidelity: float
    evals: int
    bracket: tuple[float, float]
    success: bool = True
    fidelity: float = float("nan")
    message: str = ""


class _FidelityProbe:
    """Cached fidelity evaluations of one model and schedule shape."""

    def __init__(self, model: HamiltonianModel, spec: ScheduleSpec, tol: float):
        self.model = model
        self.spec = spec
        self.tol = tol
        self.base = spec.build(model, 1.0)
        self.cache: dict[float, float] = {}

    def __call__(self, T: float) -> float:
        if T not in self.cache:
            sched = with_runtime(self.base, T)
            if self.model.kind is ModelKind.QUBIT_PRODUCT:
                res = evolve_factorized(self.model, sched, tol=self.tol, samples=2)
            else:
                res = evolve(self.model, sched, tol=self.tol, samples=2)
            self.cache[T] = res.fidelity
        return self.cache[T]

    def met(self, T: float, target: float) -> bool:
        return self(T) >= target and self(CONFIRM_FACTOR * T) >= target


def find_runtime(
    model: HamiltonianModel,
    spec: ScheduleSpec,
    target: float,
    rel_tol: float = 0.02,
    T_floor: float = 1.0,
    T_cap: float = 1e7,
    tol: float = DEFAULT_TOL,
) -> RuntimeSearchResult:
    """Smallest runtime whose final fidelity meets ``target``.

    Doubles ``T`` from ``T_floor`` until the target is met at both ``T`` and
    ``1.05 T`` (oscillation guard), then bisects geometrically until the
    bracket is tighter than ``rel_tol``.
    """
    if not 0.0 <= target < 1.0:
        raise ValueError(f"target fidelity must lie in [0, 1), got {target}")
    probe = _FidelityProbe(model, spec, tol)
    T = float(T_floor)
    if probe.met(T, target):
        return RuntimeSearchResult(T, target, len(probe.cache), (T, T), fidelity=probe(T))
    while True:
        lo, T = T, 2.0 * T
        if T > T_cap:
            return RuntimeSearchResult(
                float("nan"), target, len(probe.cache), (lo, T), success=False,
                fidelity=probe(lo), message=f"target {target} not met below T_cap = {T_cap:g}",
            )
        if probe.met(T, target):
            break
    hi = T
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        if probe.met(mid, target):
            hi = mid
        else:
            lo = mid
    return RuntimeSearchResult(hi, target, len(probe.cache), (lo, hi), fidelity=probe(hi))


def _search_task(args):
    kind, size, spec, target, tol, T_cap = args
    return find_runtime(size_model(kind, size), spec, target, tol=tol, T_cap=T_cap)


def scaling_sweep(
    family: ModelKind | str,
    spec: ScheduleSpec,
    target: float,
    sizes,
    log_correction: bool | None = None,
    tol: float = DEFAULT_TOL,
    T_cap: float = 1e7,
    jobs: int | None = None,
) -> tuple[ScalingFit, list[RuntimeSearchResult]]:
    """Runtime search at every size and a log-log fit of ``T*`` against size.

    ``log_correction`` (default: on for ``d = 0``) adds a second fit of
    ``T* / ln(4 size)``.  If any search fails the fit is refused and the
    partial table returned.
    """
    sizes = [int(n) for n in sizes]
    results = _pmap(_search_task, [(ModelKind(family), n, spec, target, tol, T_cap) for n in sizes], jobs)
    good = [(n, r.T_star) for n, r in zip(sizes, results) if r.success]
    failed = [n for n, r in zip(sizes, results) if not r.success]
    if failed:
        return _refused(good, f"runtime search failed for sizes {failed}"), results
    x = np.array([n for n, _ in good], float)
    y = np.array([t for _, t in good])
    fit = fit_power_law(x, y)
    if log_correction is None:
        log_correction = spec.d == 0
    if log_correction and fit.success:
        corr = fit_power_law(x, y / np.log(4.0 * x))
        fit = ScalingFit(fit.exponent, fit.intercept, fit.stderr, fit.r_squared, fit.points, corrected=corr)
    return fit, results


# ---------------------------------------------------------------- gap-exponent table


def criterion_runtime(ansatz: GapAnsatz, d: int, threshold: float = 10.0) -> float:
    """Runtime at which the suppression criterion reaches ``threshold``.

    The criterion is exactly proportional to ``1 / alpha``, so the critical
    normalization is ``value(alpha = 1) / threshold`` and the runtime follows
    from the runtime integral.
    """
    value = criterion_integral(ansatz, d, 1.0).value
    if not value > 0:
        raise NumericalError(f"criterion integral is not positive ({value}) for {ansatz}")
    alpha = value / threshold
    return normalization_constant(ansatz, d) / alpha


def table_one_exponents(
    two_a: int,
    b: float,
    d: int,
    gap_mins,
    threshold: float = 10.0,
    remove_log: bool | None = None,
    s_min: float = 0.5,
) -> ScalingFit:
    """Exponent of ``T`` against ``1/gap_min`` from the criterion quadrature.

    ``remove_log`` (default: on for ``2a = 2, d = 0``) divides ``T`` by
    ``ln(gap_min**-2)`` before fitting.
    """
    if two_a % 2:
        raise ValueError(f"2a must be even, got {two_a}")
    gaps = np.asarray(gap_mins, float)
    T = np.array([criterion_runtime(GapAnsatz(two_a // 2, b, g, s_min), d, threshold) for g in gaps])
    if remove_log is None:
        remove_log = two_a == 2 and d == 0
    if remove_log:
        T = T / np.log(gaps**-2)
    return fit_power_law(1.0 / gaps, T)


def _ansatz_task(args):
    a, g, s_min, spec, target, tol, T_cap = args
    model = build_two_level_ansatz(GapAnsatz(a, 2, g, s_min))
    return find_runtime(model, spec, target, tol=tol, T_cap=T_cap)


def table_one_dynamical(
    two_a: int,
    d: int,
    gap_mins,
    target: float = 0.75,
    s_min: float = 0.5,
    tol: float = DEFAULT_TOL,
    T_cap: float = 1e7,
    jobs: int | None = None,
) -> tuple[ScalingFit, list[RuntimeSearchResult]]:
    """Dynamical cross-check: runtime search on the two-level realization."""
    gaps = [float(g) for g in gap_mins]
    spec = ScheduleSpec(d)
    tasks = [(two_a // 2, g, s_min, spec, target, tol, T_cap) for g in gaps]
    results = _pmap(_ansatz_task, tasks, jobs)
    failed = [g for g, r in zip(gaps, results) if not r.success]
    pts = [(1.0 / g, r.T_star) for g, r in zip(gaps, results) if r.success]
    if failed:
        return _refused(pts, f"runtime search failed for gap_min {failed}"), results
    return fit_power_law([p[0] for p in pts], [p[1] for p in pts]), results


# ---------------------------------------------------------------- error decay


@dataclass(frozen=True)
class DecayTable:
    """Final and maximum intermediate error per runtime, sorted by ``T``."""

    T: np.ndarray
    final_error: np.ndarray
    max_intermediate_error: np.ndarray
    norm_drift: np.ndarray = field(default=None, repr=False)

    def rows(self):
        return list(zip(self.T.tolist(), self.final_error.tolist(), self.max_intermediate_error.tolist()))


def _decay_task(args):
    model, spec, T, tol = args
    sched = spec.build(model, T)
    if model.kind is ModelKind.QUBIT_PRODUCT:
        res = evolve_factorized(model, sched, tol=tol)
    else:
        res = evolve(model, sched, tol=tol)
    return T, res.final_error, res.max_intermediate_error, res.norm_drift


def error_vs_runtime(
    model: HamiltonianModel,
    spec: ScheduleSpec,
    T_grid,
    tol: float = DEFAULT_TOL,
    jobs: int | None = None,
) -> DecayTable:
    """Evolve at every runtime in ``T_grid`` (parallel) and tabulate both error measures."""
    grid = sorted(float(T) for T in T_grid)
    out = _pmap(_decay_task, [(model, spec, T, tol) for T in grid], jobs)
    out.sort(key=lambda row: row[0])
    arr = np.array(out, dtype=float).reshape(-1, 4)
    return DecayTable(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3])


def perturbative_curve(model: HamiltonianModel, spec: ScheduleSpec, T_values, order: int = 2) -> np.ndarray:
    """``|a1(T)|**2`` from the perturbative estimator at each runtime."""
    return np.array([abs(perturbative_error(model, spec.build(model, float(T)), order=order)) ** 2 for T in T_values])


# ---------------------------------------------------------------- degeneracy


def envelope_crossing(T, err, threshold: float) -> float:
    """Runtime at which the crest envelope of ``err`` falls to ``threshold``.

    The envelope is the set of samples not exceeded later on; the crossing is
    log-interpolated between the last crest above and the first one below the
    threshold.  Returns NaN if the scan never gets below it.
    """
    T = np.asarray(T, float)
    err = np.asarray(err, float)
    k = upper_envelope(err)
    Tk, ek = T[k], err[k]
    above = np.flatnonzero(ek > threshold)
    if len(above) == 0:
        return float(T[0])
    j = above[-1]
    if j + 1 >= len(k):
        return float("nan")
    if ek[j + 1] <= 0.0:
        return float(Tk[j + 1])
    la, lb = math.log(ek[j]), math.log(ek[j + 1])
    return float(Tk[j] + (math.log(threshold) - la) / (lb - la) * (Tk[j + 1] - Tk[j]))


@dataclass(frozen=True)
class SustainedScan:
    """Single-qubit final error on a geometric runtime grid."""

    T: np.ndarray
    error: np.ndarray

    def runtime(self, m: int, target: float) -> float:
        """Sustained runtime for ``m`` qubits: beyond it the target holds for good."""
        thr = -math.expm1(math.log(target) / m)
        return envelope_crossing(self.T, self.error, thr)


def sustained_scan(
    spec: ScheduleSpec,
    eps_min: float,
    ratio: float = 1.005,
    T_start: float = 1.0,
    T_cap: float = 1e5,
    settle: float = 1.25,
    tol: float = DEFAULT_TOL,
) -> SustainedScan:
    """Scan the single-qubit error until it stays below ``eps_min`` over a factor ``settle`` in ``T``."""
    model = size_model(ModelKind.QUBIT_PRODUCT, 1)
    base = spec.build(model, 1.0)
    Ts, errs = [], []
    T = float(T_start)
    below_since = None
    while T <= T_cap:
        e = evolve(model, with_runtime(base, T), tol=tol, samples=2).final_error
        Ts.append(T)
        errs.append(e)
        if e > eps_min:
            below_since = None
        elif below_since is None:
            below_since = T
        if below_since is not None and T >= settle * below_since:
            break
        T *= ratio
    return SustainedScan(np.array(Ts), np.array(errs))


@dataclass(frozen=True)
class DegeneracyScaling:
    """Runtime-to-fidelity against qubit count for one smoothing class.

    ``power`` is the log-log fit, ``vs_log`` and ``vs_sqrt`` linear fits of
    ``T*`` against ``ln M`` and ``sqrt M``.  ``first_order`` lists the runtime
    the running-maximum first-order estimate would demand at each ``M``.
    """

    smoothness: Smoothness
    target: float
    points: tuple[tuple[int, float], ...]
    power: ScalingFit
    vs_log: LinearFit | None
    vs_sqrt: LinearFit | None
    first_order: tuple[float, ...]
    success: bool = True
    message: str = ""

    @property
    def preferred(self) -> str:
        if self.vs_log is None or self.vs_sqrt is None:
            return "none"
        return "log" if self.vs_log.r_squared > self.vs_sqrt.r_squared else "sqrt"


def first_order_runtime(model: HamiltonianModel, spec: ScheduleSpec, target: float, T_ref: float = 100.0) -> float:
    """Runtime at which the running-max first-order estimate equals ``1 - target``.

    The estimate scales exactly as ``1 / T**2`` for a fixed schedule shape, so
    one evaluation at ``T_ref`` suffices.
    """
    est = first_order_error(model, spec.build(model, T_ref)).running_max
    return T_ref * math.sqrt(est / (1.0 - target))


def degeneracy_runtime_scaling(
    M_list,
    smoothness: Smoothness | str,
    target: float = 0.99,
    d: int = -1,
    match_fracs: tuple[float, float] = DEFAULT_MATCH,
    method: str = "sustained",
    ratio: float = 1.005,
    tol: float = DEFAULT_TOL,
    T_cap: float = 1e5,
    jobs: int | None = None,
) -> DegeneracyScaling:
    """Runtime to reach ``target`` for qubit-product models over ``M_list``.

    ``method="sustained"`` scans the single-qubit error once on a geometric
    grid (ratio ``ratio``) and takes, for each ``M``, the runtime beyond which
    the lifted error stays below ``1 - target``.  The final error oscillates
    in ``T`` with lobes whose crests decay slowly, so this is the stable
    notion of the runtime.  ``method="search"`` uses ``find_runtime`` at every
    ``M`` instead.
    """
    spec = ScheduleSpec(d, Smoothness(smoothness), match_fracs)
    ms = [int(m) for m in M_list]
    if method == "search":
        fit, results = scaling_sweep(ModelKind.QUBIT_PRODUCT, spec, target, ms, log_correction=False, tol=tol, T_cap=T_cap, jobs=jobs)
        runtimes = [r.T_star if r.success else float("nan") for r in results]
    elif method == "sustained":
        eps_min = -math.expm1(math.log(target) / max(ms))
        scan = sustained_scan(spec, eps_min, ratio=ratio, T_cap=T_cap, tol=tol)
        runtimes = [scan.runtime(m, target) for m in ms]
    else:
        raise ValueError(f"unknown method {method!r}; use 'sustained' or 'search'")
    fo = tuple(first_order_runtime(size_model(ModelKind.QUBIT_PRODUCT, m), spec, target) for m in ms)
    points = tuple((m, float(T)) for m, T in zip(ms, runtimes))
    failed = [m for m, T in points if not math.isfinite(T)]
    if failed:
        fit = _refused([p for p in points if math.isfinite(p[1])], f"no runtime found below T_cap for M = {failed}")
        return DegeneracyScaling(spec.smoothness, target, points, fit, None, None, fo, False, fit.message)
    x = np.array(ms, float)
    y = np.array(runtimes)
    return DegeneracyScaling(
        spec.smoothness,
        target,
        points,
        fit_power_law(x, y),
        LinearFit.from_data(np.log(x), y),
        LinearFit.from_data(np.sqrt(x), y),
        fo,
    )
