"""
Instantaneous spectra, gaps, matrix elements and complex-plane gap analysis.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import UnsupportedOperationError
from .model import (
    ConstantGap,
    GapAnsatz,
    GapLike,
    HamiltonianModel,
    ModelKind,
    derivative_at,
    full_coefficients,
    full_hamiltonian,
    hamiltonian_at,
    polyder,
    polyval,
)

DEGENERACY_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending energies and gauge-fixed eigenvectors (columns of ``states``)."""

    s: float
    energies: np.ndarray
    states: np.ndarray
    degenerate: bool = False

    @property
    def gap(self) -> float:
        return float(self.energies[1] - self.energies[0])


@dataclass(frozen=True)
class SingularitySet:
    roots: tuple[complex, ...]
    all_roots: tuple[complex, ...]
    dominant: complex


@dataclass(frozen=True)
class CriterionValue:
    """Suppression indicator and the companion endpoint sum ``h(0) + h(1)``."""

    value: float
    endpoint_sum: float
    endpoint: complex


def _pauli_components(h: np.ndarray):
    c = 0.5 * (h[0, 0] + h[1, 1]).real
    z = (h[0, 0] - h[1, 1]).real
    off = h[0, 1]
    return c, z, off


def _gauge_phase(model: HamiltonianModel) -> complex:
    # phase of the off-diagonal element inside the path; used where it vanishes
    off = hamiltonian_at(model, 0.5)[0, 1]
    return off / abs(off) if abs(off) > 0 else 1.0


def _eig2(h: np.ndarray, phase_hint: complex, s: float) -> EigenSystem:
    c, z, off = _pauli_components(h)
    rho = 2.0 * abs(off)
    r = math.hypot(z, rho)
    phase = off / abs(off) if abs(off) > 0 else phase_hint
    theta = math.atan2(rho, z)
    ch, sh = math.cos(0.5 * theta), math.sin(0.5 * theta)
    ground = np.array([-phase * sh, ch], dtype=complex)
    excited = np.array([ch, np.conj(phase) * sh], dtype=complex)
    degenerate = r < DEGENERACY_TOL
    if degenerate:
        warnings.warn(f"degenerate levels at s = {s!r}", RuntimeWarning, stacklevel=3)
    return EigenSystem(s, np.array([c - 0.5 * r, c + 0.5 * r]), np.column_stack([ground, excited]), degenerate)


def _fix_sign(vecs: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vecs) > 1e-8, axis=0)
    ph = vecs[idx, np.arange(vecs.shape[1])]
    return vecs * (np.abs(ph) / ph)


def eigensystem_at(model: HamiltonianModel, s: float, full: bool = False) -> EigenSystem:
    """Instantaneous eigensystem of ``H(s)``.

    The reduced 2x2 form is diagonalized in closed form with a gauge that is
    continuous in ``s`` for every family here.  ``full=True`` diagonalizes the
    full-space matrix (validation only) with a first-nonzero-component gauge.
    """
    if not full:
        return _eig2(hamiltonian_at(model, s), _gauge_phase(model), s)
    energies, vecs = np.linalg.eigh(full_hamiltonian(model, s))
    gaps = np.diff(energies)
    degenerate = bool(gaps.size and gaps[0] < DEGENERACY_TOL)
    if degenerate:
        warnings.warn(f"degenerate ground level at s = {s!r}", RuntimeWarning, stacklevel=2)
    return EigenSystem(s, energies, _fix_sign(vecs), degenerate)


def eigensystem_path(model: HamiltonianModel, s_values, full: bool = False) -> list[EigenSystem]:
    """Eigensystems along a path with consecutive overlaps made real positive."""
    out = []
    prev = None
    for s in np.asarray(s_values, dtype=float):
        eig = eigensystem_at(model, float(s), full=full)
        if prev is not None:
            ov = np.einsum("ij,ij->j", prev.states.conj(), eig.states)
            ph = np.where(np.abs(ov) > 0, ov / np.where(np.abs(ov) > 0, np.abs(ov), 1.0), 1.0)
            eig = EigenSystem(eig.s, eig.energies, eig.states / ph, eig.degenerate)
        out.append(eig)
        prev = eig
    return out


def _grover_gap(n: int, s):
    return np.sqrt(1.0 - 4.0 * (1.0 - 1.0 / n) * s * (1.0 - s))


def gap(obj: GapLike, s):
    """Fundamental gap ``E1 - E0``.

    Closed forms are used for every family; complex ``s`` is accepted only for
    pure gap functions (``GapAnsatz``/``ConstantGap``).
    """
    if isinstance(obj, (GapAnsatz, ConstantGap)):
        return obj(s)
    if np.iscomplexobj(s):
        raise UnsupportedOperationError("complex s is only supported for closed-form gap functions")
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    if obj.kind in (ModelKind.GROVER_LINEAR, ModelKind.GROVER_QUADRATIC):
        return _grover_gap(obj.params["n"], s)
    if obj.kind is ModelKind.QUBIT_PRODUCT:
        return np.sqrt(1.0 - 2.0 * s * (1.0 - s))
    return obj.ansatz(s)


def gap_eigensolver(model: HamiltonianModel, s, full: bool = False):
    """Gap from a numerical eigensolver, for cross-checking ``gap``."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.empty(s_arr.shape)
    for i, si in enumerate(s_arr):
        h = full_hamiltonian(model, si) if full else hamiltonian_at(model, si)
        ev = np.linalg.eigvalsh(h)
        out[i] = ev[1] - ev[0]
    return out if np.ndim(s) else float(out[0])


def gap_profile(obj: GapLike) -> tuple[float, float]:
    """Location of the gap minimum and the distance of its nearest complex zero."""
    if isinstance(obj, ConstantGap):
        return 0.5, math.inf
    if isinstance(obj, GapAnsatz):
        return obj.s_min, abs(gap_singularities(obj).dominant.imag)
    if obj.kind in (ModelKind.GROVER_LINEAR, ModelKind.GROVER_QUADRATIC):
        return 0.5, 0.5 / math.sqrt(obj.params["n"] - 1)
    if obj.kind is ModelKind.QUBIT_PRODUCT:
        return 0.5, 0.5
    return gap_profile(obj.ansatz)


def matrix_element(model: HamiltonianModel, s: float, n: int = 0, m: int = 1, eig: EigenSystem | None = None) -> complex:
    """``F_nm(s) = <m(s)|H'(s)|n(s)>`` in the gauge of ``eig`` (default: ``eigensystem_at``)."""
    if n == m:
        raise ValueError("matrix_element needs distinct levels")
    if eig is None:
        eig = eigensystem_at(model, s)
    if eig.degenerate:
        warnings.warn("degenerate levels: F_nm depends on the basis choice", RuntimeWarning, stacklevel=2)
    if eig.states.shape[0] == model.dim:
        dh = derivative_at(model, s)
    else:
        dh = polyval(polyder(full_coefficients(model)), s)
    return complex(eig.states[:, m].conj() @ dh @ eig.states[:, n])


def coupling_profile(model: HamiltonianModel, s) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``(gap(s), F_01(s))`` of the reduced two-level form.

    Uses the same closed-form gauge as ``eigensystem_at``.
    """
    if model.dim != 2:
        raise ValueError("coupling_profile needs a two-level reduced model")
    s = np.clip(np.atleast_1d(np.asarray(s, dtype=float)), 0.0, 1.0)
    powers = s[:, None] ** np.arange(len(model.coeffs))
    h = np.einsum("nk,kij->nij", powers, model.coeffs)
    dco = polyder(model.coeffs)
    dh = np.einsum("nk,kij->nij", powers[:, : len(dco)], dco)
    z = (h[:, 0, 0] - h[:, 1, 1]).real
    off = h[:, 0, 1]
    rho = 2.0 * np.abs(off)
    hint = _gauge_phase(model)
    phase = np.where(rho > 0, off / np.where(rho > 0, np.abs(off), 1.0), hint)
    theta = np.arctan2(rho, z)
    ch, sh = np.cos(0.5 * theta), np.sin(0.5 * theta)
    ground = np.stack([-phase * sh, ch + 0j], axis=1)
    excited = np.stack([ch + 0j, np.conj(phase) * sh], axis=1)
    f01 = np.einsum("ni,nij,nj->n", excited.conj(), dh, ground)
    return np.hypot(z, rho), f01


def gap_singularities(ansatz: GapAnsatz) -> SingularitySet:
    """Complex zeros of the ansatz gap.

    All ``2a`` roots sit on a circle of radius ``gap_min**(b/2a)`` around
    ``s_min``; the lower half-plane subset limits the contour deformation.
    """
    two_a = 2 * ansatz.a
    radius = ansatz.gap_min ** (ansatz.b / two_a)
    k = np.arange(two_a)
    angles = np.pi * (2 * k + 1) / two_a
    # exact real/imaginary parts avoid cos(pi/2) ~ 6e-17 noise
    roots = np.array([complex(ansatz.s_min + radius * _cos(a), radius * _sin(a)) for a in angles])
    lower = tuple(r for r in roots if r.imag < 0)
    dominant = min(lower, key=lambda r: (abs(r.imag), r.real))
    return SingularitySet(lower, tuple(roots), dominant)


def _cos(x: float) -> float:
    c = math.cos(x)
    return 0.0 if abs(c) < 1e-15 else c


def _sin(x: float) -> float:
    v = math.sin(x)
    return 0.0 if abs(v) < 1e-15 else v


def _continued_power(gapfn, z: np.ndarray, power: float) -> np.ndarray:
    """``gap(z)**power`` continued along the ordered path ``z`` from a real start."""
    if isinstance(gapfn, ConstantGap):
        return np.full(z.shape, complex(gapfn.value) ** power)
    if isinstance(gapfn, GapAnsatz):
        base = (z - gapfn.s_min) ** (2 * gapfn.a) + gapfn.gap_min**gapfn.b
        logb = np.log(np.abs(base)) + 1j * np.unwrap(np.angle(base))
        return np.exp(logb * (power / gapfn.b))
    vals = np.asarray(gapfn(z), dtype=complex)
    logv = np.log(np.abs(vals)) + 1j * np.unwrap(np.angle(vals))
    return np.exp(logv * power)


def criterion_integral(
    gapfn: GapAnsatz | ConstantGap,
    d: int,
    alpha: float,
    singularity: complex | None = None,
    nodes: int = 4001,
) -> CriterionValue:
    """Suppression indicator ``Re(i * int_0^z ds / h(s))`` with ``h = alpha * gap**d``.

    The path is the straight segment from 0 to ``z = Re(st) + i Im(st)/2``.
    For an ansatz every lower-half-plane zero is checked and the smallest
    indicator returned; ``singularity`` overrides the endpoint target.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if singularity is None:
        if not isinstance(gapfn, GapAnsatz):
            raise ValueError("a singularity location is required for gap functions without zeros")
        targets = gap_singularities(gapfn).roots
    else:
        targets = (complex(singularity),)
    endpoint_sum = float(alpha * (np.real(gapfn(0.0)) ** d + np.real(gapfn(1.0)) ** d))
    best = None
    for st in targets:
        endpoint = complex(st.real, st.imag / 2.0)
        value = _criterion_on_segment(gapfn, d, endpoint, nodes) / alpha
        if best is None or value < best.value:
            best = CriterionValue(float(value), endpoint_sum, endpoint)
    return best


def _criterion_on_segment(gapfn, d, endpoint: complex, nodes: int) -> float:
    # Gauss-Legendre panels; panels cluster toward the endpoint where the
    # integrand varies on the scale of |Im st|.
    width = abs(endpoint.imag) if endpoint.imag else 1.0
    scale = min(1.0, 4.0 * width / max(abs(endpoint), 1e-300))
    inner = np.linspace(0.0, 1.0, max(nodes // 8, 16))
    edges = np.unique(np.concatenate([np.linspace(0.0, 1.0 - scale, 64), 1.0 - scale + scale * inner]))
    gx, gw = np.polynomial.legendre.leggauss(8)
    lo, hi = edges[:-1, None], edges[1:, None]
    u = (0.5 * (hi - lo) * gx + 0.5 * (hi + lo)).ravel()
    w = (0.5 * (hi - lo) * gw).ravel()
    z = u * endpoint
    if d != 0 and isinstance(gapfn, GapAnsatz):
        roots = np.array(gap_singularities(gapfn).all_roots)
        dist = np.min(np.abs(z[:, None] - roots[None, :]))
        if dist < 1e-6:
            warnings.warn("criterion contour passes close to a gap zero; nudging", RuntimeWarning, stacklevel=3)
            z = z - 1e-6j * np.sin(np.pi * u)
    inv_h = _continued_power(gapfn, z, -d)
    integral = np.sum(w * inv_h) * endpoint
    return float((1j * integral).real)


def fast_limit_integral(model: HamiltonianModel) -> float:
    """``|int_0^1 F_01(s) / gap(s) ds|`` by adaptive quadrature."""
    s_min, _ = gap_profile(model)

    def integrand(s):
        return matrix_element(model, s).real / float(gap(model, s))

    value, err = integrate.quad(integrand, 0.0, 1.0, points=[s_min], epsabs=1e-10, epsrel=1e-10, limit=500)
    if err > 1e-6:
        warnings.warn(f"fast-limit quadrature error estimate {err:.2e}", RuntimeWarning, stacklevel=2)
    return abs(value)


def berry_phase(model: HamiltonianModel, s_path, step: float = 1e-4) -> np.ndarray:
    """Discretized ``i * int <n|d_s n> ds`` for each level along ``s_path``."""
    s_path = np.asarray(s_path, dtype=float)
    levels = model.dim
    if s_path.size < 2:
        return np.zeros(levels)
    conn = np.empty((s_path.size, levels), dtype=complex)
    for k, s in enumerate(s_path):
        lo, hi = max(s - step, 0.0), min(s + step, 1.0)
        e_mid, e_lo, e_hi = eigensystem_path(model, [s, lo, hi])
        lo_states = _align(e_mid.states, e_lo.states)
        hi_states = _align(e_mid.states, e_hi.states)
        deriv = (hi_states - lo_states) / (hi - lo)
        conn[k] = np.einsum("ij,ij->j", e_mid.states.conj(), deriv)
    gamma = 1j * integrate.trapezoid(conn, s_path, axis=0)
    return gamma.real


def _align(ref: np.ndarray, states: np.ndarray) -> np.ndarray:
    ov = np.einsum("ij,ij->j", ref.conj(), states)
    ph = np.where(np.abs(ov) > 0, ov / np.where(np.abs(ov) > 0, np.abs(ov), 1.0), 1.0)
    return states / ph
