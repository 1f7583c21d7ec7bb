"""
Schrodinger dynamics under a model and schedule, plus perturbative estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from . import _kernel as K
from .errors import NumericalError
from .model import HamiltonianModel, ModelKind, full_coefficients
from .schedule import Schedule, sample
from .spectrum import coupling_profile, eigensystem_at, gap, matrix_element

DEFAULT_TOL = 1e-9
DEFAULT_SAMPLES = 401
STEP_CAP = 0.1
MAX_STEPS = 200_000_000


@dataclass(frozen=True, eq=False)
class EvolutionResult:
    """Time series of instantaneous ground-state occupation and error summaries.

    ``excitation`` is the summed occupation of the excited levels (``1 - p0``
    computed without cancellation).  ``final_error`` is its value at ``T`` and
    ``max_intermediate_error`` the largest value seen over all accepted steps
    and output samples.
    """

    times: np.ndarray
    s: np.ndarray
    ground_occupation: np.ndarray
    excitation: np.ndarray
    final_error: float
    max_intermediate_error: float
    accepted_steps: int
    rejected_steps: int
    final_state: np.ndarray
    norm_drift: float
    states: np.ndarray | None = None

    @property
    def fidelity(self) -> float:
        return 1.0 - self.final_error


def occupations(state: np.ndarray, model: HamiltonianModel, s: float, full: bool = False) -> np.ndarray:
    """Probabilities of the instantaneous eigenstates at ``s``.

    Normalized by ``|state|**2`` so a small integrator norm drift is not
    mistaken for excitation.
    """
    eig = eigensystem_at(model, s, full=full)
    state = np.asarray(state)
    return np.abs(eig.states.conj().T @ state) ** 2 / np.vdot(state, state).real


def ground_state(model: HamiltonianModel, s: float = 0.0, full: bool = False) -> np.ndarray:
    return eigensystem_at(model, s, full=full).states[:, 0]


def _excitations(model, s_vals, states, full):
    # sum over excited levels rather than 1 - p0, which cancels below 1e-16
    out = np.empty(len(s_vals))
    for i, (s, psi) in enumerate(zip(s_vals, states)):
        out[i] = occupations(psi, model, float(s), full)[1:].sum()
    return out


def evolve(
    model: HamiltonianModel,
    schedule: Schedule,
    tol: float = DEFAULT_TOL,
    samples: int = DEFAULT_SAMPLES,
    psi0: np.ndarray | None = None,
    reverse: bool = False,
    full: bool = False,
    keep_states: bool = False,
    step_cap: float = STEP_CAP,
) -> EvolutionResult:
    """Integrate the Schrodinger equation from the ground state of ``H(0)``.

    Parameters
    ----------
    tol:
        Local error bound per step, ``tol * (1 + |psi|)``.
    samples:
        Number of uniformly spaced output times (at least 2).
    psi0:
        Initial state; defaults to the exact ground state at the start of the
        schedule (``s = 1`` when ``reverse`` is set).
    reverse:
        Run the schedule backwards in time, ``s(T - t)``.
    full:
        Evolve in the full Hilbert space instead of the reduced block.
    step_cap:
        Upper bound on ``dt * |H(s)|_F``, which keeps the phase resolved.
    """
    coeffs = np.ascontiguousarray(full_coefficients(model) if full else model.coeffs, dtype=complex)
    s_start = 1.0 if reverse else 0.0
    if schedule.hold is not None:
        s_start = schedule.hold
    if psi0 is None:
        psi0 = ground_state(model, s_start, full)
    psi0 = np.ascontiguousarray(psi0, dtype=complex)
    p, gco = schedule.kernel_params()
    T = schedule.T
    t_out = np.linspace(0.0, T, max(int(samples), 2))
    sigma0 = 1.0 if reverse else 0.0
    psi_out, s_out, theta, n_acc, n_rej, min_p0, status, t_reached = K.integrate(
        coeffs, gco, p, psi0, sigma0, t_out, float(tol), MAX_STEPS, bool(reverse), float(step_cap)
    )
    if status == K.STATUS_UNDERFLOW:
        raise NumericalError(f"step size underflow at t = {t_reached:.6g} of T = {T:.6g}")
    if status == K.STATUS_MAXSTEPS:
        raise NumericalError(f"step budget exhausted at t = {t_reached:.6g} of T = {T:.6g}")
    psi_out = psi_out * np.exp(-1j * theta)[:, None]
    excited = np.clip(_excitations(model, s_out, psi_out, full), 0.0, 1.0)
    max_int = max(float(excited.max()), 1.0 - min_p0 if model.dim == 2 and not full else 0.0)
    final = psi_out[-1]
    return EvolutionResult(
        times=t_out,
        s=s_out,
        ground_occupation=1.0 - excited,
        excitation=excited,
        final_error=float(excited[-1]),
        max_intermediate_error=float(min(max(max_int, 0.0), 1.0)),
        accepted_steps=int(n_acc),
        rejected_steps=int(n_rej),
        final_state=final,
        norm_drift=float(abs(np.linalg.norm(final) - 1.0)),
        states=psi_out if keep_states else None,
    )


def _power_minus_one(eps: np.ndarray, m: int) -> np.ndarray:
    # 1 - (1 - eps)**m without cancellation, valid for m up to 2**30
    eps = np.clip(np.asarray(eps, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        return -np.expm1(m * np.log1p(-eps))


def evolve_factorized(
    model: HamiltonianModel,
    schedule: Schedule,
    tol: float = DEFAULT_TOL,
    samples: int = DEFAULT_SAMPLES,
) -> EvolutionResult:
    """Evolve one qubit of a product model and lift occupations to M factors."""
    if model.kind is not ModelKind.QUBIT_PRODUCT:
        raise ValueError("factorized evolution needs a qubit-product model")
    single = evolve(model, schedule, tol=tol, samples=samples)
    m = model.factors
    excited = _power_minus_one(single.excitation, m)
    return EvolutionResult(
        times=single.times,
        s=single.s,
        ground_occupation=1.0 - excited,
        excitation=excited,
        final_error=float(excited[-1]),
        max_intermediate_error=float(max(_power_minus_one(single.max_intermediate_error, m), excited.max())),
        accepted_steps=single.accepted_steps,
        rejected_steps=single.rejected_steps,
        final_state=single.final_state,
        norm_drift=single.norm_drift,
    )


@dataclass(frozen=True)
class FirstOrderEstimate:
    """Boundary-term and running-maximum first-order excitation estimates."""

    boundary: float
    running_max: float
    t_at_max: float


def _first_order_amplitude(model: HamiltonianModel, s: np.ndarray, sdot: np.ndarray) -> np.ndarray:
    out = np.zeros(len(s))
    for i, (si, vi) in enumerate(zip(s, sdot)):
        if vi == 0.0:
            continue
        f = abs(matrix_element(model, float(si)))
        out[i] = vi * f / float(gap(model, float(si))) ** 2
    return out


def first_order_error(model: HamiltonianModel, schedule: Schedule, samples: int = 2001) -> FirstOrderEstimate:
    """First-order estimates from ``|<1|dH/dt|0>| / gap**2``.

    ``boundary`` bounds the final error by the end-point terms
    ``(|b(0)| + |b(T)|)**2``; ``running_max`` is the largest instantaneous
    ``|b(t)|**2`` over the run.  Both are summed over the ``M`` degenerate
    excitations of a qubit-product model.
    """
    t = np.linspace(0.0, schedule.T, samples)
    s, sdot = sample(schedule, t)
    b = _first_order_amplitude(model, s, sdot)
    levels = model.factors if model.kind is ModelKind.QUBIT_PRODUCT else 1
    boundary = levels * (b[0] + b[-1]) ** 2
    k = int(np.argmax(b))
    return FirstOrderEstimate(float(boundary), float(levels * b[k] ** 2), float(t[k]))


def _cumsimpson(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    # scipy's cumulative Simpson rule is real-only
    if np.iscomplexobj(y):
        return cumulative_simpson(y.real, x=t, initial=0.0) + 1j * cumulative_simpson(y.imag, x=t, initial=0.0)
    return cumulative_simpson(y, x=t, initial=0.0)


def perturbative_error(
    model: HamiltonianModel,
    schedule: Schedule,
    order: int = 2,
    points_per_cycle: int = 64,
    node_budget: int = 20_000_000,
    f_scale: float = 1.0,
) -> complex:
    """Perturbative excitation amplitude ``a1(T)`` of a two-level model.

    Order 1 integrates ``da1/dt = sdot F01 / gap * exp(i Phi)`` with
    ``a0 = 1``; order 2 feeds that ``a1`` back into
    ``da0/dt = -a1 sdot conj(F01) / gap * exp(-i Phi)`` and integrates ``a1``
    again with the corrected ``a0``.  ``Phi`` is the accumulated dynamical
    phase ``int gap dt``.  All integrals are cumulative Simpson sums on a
    uniform grid with ``points_per_cycle`` nodes per ``2 pi`` of phase (at
    least 20).  ``f_scale`` multiplies ``F01`` (used for linearity checks).
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if model.dim != 2:
        raise ValueError("perturbative estimator needs a two-level reduced model")
    if points_per_cycle < 20:
        raise ValueError("at least 20 points per cycle are needed to resolve the phase")
    if schedule.hold is not None:
        return 0j
    T = schedule.T
    gmax = float(np.max(coupling_profile(model, np.linspace(0.0, 1.0, 401))[0]))
    nodes = int(math.ceil(T * gmax / (2.0 * math.pi) * points_per_cycle)) + 1
    if nodes > node_budget:
        raise NumericalError(f"phase resolution needs {nodes} nodes, budget is {node_budget}")
    nodes = max(nodes, 2001)
    nodes += 1 - nodes % 2
    t = np.linspace(0.0, T, nodes)
    s, sdot = sample(schedule, t)
    g, f01 = coupling_profile(model, s)
    phi = _cumsimpson(g, t)
    drive = sdot * f_scale * f01 / g * np.exp(1j * phi)
    a1 = _cumsimpson(drive, t)
    if order == 1:
        return complex(a1[-1])
    a0 = 1.0 - _cumsimpson(a1 * np.conj(drive), t)
    return complex(simpson(a0 * drive, x=t))
