"""
Hamiltonian families for adiabatic interpolation.

Every family is represented by polynomial coefficients in the interpolation
parameter s, i.e. ``H(s) = sum_k s**k C_k``.  The reduced representation is a
2x2 block for all families; full-space coefficients are available for small
systems and are used only for validation.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping, Union

import numpy as np

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

MAX_FULL_DIM = 4096


class ModelKind(str, enum.Enum):
    GROVER_LINEAR = "grover_linear"
    GROVER_QUADRATIC = "grover_quadratic"
    QUBIT_PRODUCT = "qubit_product"
    TWO_LEVEL_ANSATZ = "two_level_ansatz"


@dataclass(frozen=True)
class GapAnsatz:
    """Gap profile ``[(s - s_min)**(2a) + gap_min**b]**(1/b)``.

    Accepts complex ``s`` (principal branch), which is what the singularity
    and criterion analysis rely on.
    """

    a: int
    b: float
    gap_min: float
    s_min: float = 0.5

    def __post_init__(self):
        if int(self.a) != self.a or self.a < 1:
            raise ValueError(f"a must be a positive integer, got {self.a}")
        if not self.b > 0:
            raise ValueError(f"b must be positive, got {self.b}")
        if not 0 < self.gap_min < 1:
            raise ValueError(f"gap_min must lie in (0, 1), got {self.gap_min}")
        if not 0 < self.s_min < 1:
            raise ValueError(f"s_min must lie in (0, 1), got {self.s_min}")

    def __call__(self, s):
        s = np.asarray(s)
        base = (s - self.s_min) ** (2 * self.a) + self.gap_min**self.b
        if np.iscomplexobj(base):
            return base ** (1.0 / self.b)
        return np.power(base, 1.0 / self.b)


@dataclass(frozen=True)
class ConstantGap:
    """Flat gap profile; used for constant-velocity fixtures."""

    value: float = 1.0

    def __call__(self, s):
        s = np.asarray(s)
        return np.full(s.shape, self.value, dtype=complex if np.iscomplexobj(s) else float)


@dataclass(frozen=True, eq=False)
class HamiltonianModel:
    """Immutable Hamiltonian family with its reduced polynomial representation.

    Attributes
    ----------
    kind:
        Family tag.
    params:
        Family parameters (``n``/``marked`` for Grover, ``m`` for the qubit
        product, the ansatz fields for the two-level realization).
    coeffs:
        Array of shape ``(K, 2, 2)`` with ``H(s) = sum_k s**k coeffs[k]``.
    overlap:
        ``<in|w>`` used in the Grover reduction, ``None`` otherwise.
    """

    kind: ModelKind
    params: Mapping[str, object]
    coeffs: np.ndarray = field(repr=False)
    overlap: float | None = None

    @property
    def dim(self) -> int:
        return self.coeffs.shape[-1]

    @property
    def factors(self) -> int:
        return int(self.params.get("m", 1))

    @property
    def full_dim(self) -> int:
        if self.kind in (ModelKind.GROVER_LINEAR, ModelKind.GROVER_QUADRATIC):
            return int(self.params["n"])
        if self.kind is ModelKind.QUBIT_PRODUCT:
            return 2 ** self.factors
        return 2

    @property
    def ansatz(self) -> GapAnsatz | None:
        return self.params.get("ansatz")

    def __reduce__(self):
        # params is a read-only mapping proxy; rebuild from the plain description
        return (_rebuild, (self.describe(),))

    def describe(self) -> dict:
        out = {"kind": self.kind.value}
        for key, value in self.params.items():
            if isinstance(value, GapAnsatz):
                out.update(a=value.a, b=value.b, gap_min=value.gap_min, s_min=value.s_min)
            else:
                out[key] = value
        return out


GapLike = Union[HamiltonianModel, GapAnsatz, ConstantGap]


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=complex)
    arr.setflags(write=False)
    return arr


def _grover_vectors(n: int):
    q = 1.0 / math.sqrt(n)
    p = math.sqrt(1.0 - 1.0 / n)
    # basis {|w>, |w_perp>}, |in> = q|w> + p|w_perp>
    v_in = np.array([q, p], dtype=complex)
    v_w = np.array([1.0, 0.0], dtype=complex)
    return v_in, v_w, q


def _check_grover(n, w):
    if int(n) != n or n < 2:
        raise ValueError(f"database size N must be an integer >= 2, got {n}")
    if int(w) != w or not 0 <= w < n:
        raise ValueError(f"marked index must satisfy 0 <= w < N, got {w}")


def build_grover_linear(n: int, w: int = 0) -> HamiltonianModel:
    """Grover search with ``H(s) = (1-s)(1 - |in><in|) + s(1 - |w><w|)``."""
    _check_grover(n, w)
    v_in, v_w, q = _grover_vectors(n)
    h_i = IDENTITY - np.outer(v_in, v_in.conj())
    h_f = IDENTITY - np.outer(v_w, v_w.conj())
    coeffs = np.stack([h_i, h_f - h_i])
    return HamiltonianModel(
        ModelKind.GROVER_LINEAR, MappingProxyType({"n": int(n), "marked": int(w)}), _freeze(coeffs), q
    )


def _quadratic_shift(n: int) -> float:
    return (2.0 * n - 2.0) / n**2


def build_grover_quadratic(n: int, w: int = 0) -> HamiltonianModel:
    """Grover search with the squared interpolation plus a trace-fixing shift."""
    _check_grover(n, w)
    lin = build_grover_linear(n, w)
    c0, c1 = lin.coeffs
    shift = _quadratic_shift(n) * IDENTITY
    coeffs = np.stack([c0 @ c0, c0 @ c1 + c1 @ c0 + shift, c1 @ c1 - shift])
    return HamiltonianModel(
        ModelKind.GROVER_QUADRATIC, MappingProxyType(dict(lin.params)), _freeze(coeffs), lin.overlap
    )


def build_qubit_product(m: int) -> HamiltonianModel:
    """M independent qubits; the stored block is ``(1 - s sz - (1-s) sx)/2``."""
    if int(m) != m or m < 1:
        raise ValueError(f"qubit count must be an integer >= 1, got {m}")
    coeffs = np.stack([0.5 * (IDENTITY - SIGMA_X), 0.5 * (SIGMA_X - SIGMA_Z)])
    return HamiltonianModel(ModelKind.QUBIT_PRODUCT, MappingProxyType({"m": int(m)}), _freeze(coeffs))


def build_two_level_ansatz(ansatz: GapAnsatz) -> HamiltonianModel:
    """Minimal Landau-Zener type realization of a ``b = 2`` gap ansatz.

    ``H(s) = 1/2 + [(s - s_min)**a sz + gap_min sx] / 2`` has trace 1 and
    gap ``[(s - s_min)**(2a) + gap_min**2]**(1/2)``.
    """
    if ansatz.b != 2:
        raise ValueError("two-level realization needs b = 2; use the ansatz directly for general b")
    if ansatz.a not in (1, 2, 3):
        raise ValueError(f"two-level realization supports a in {{1, 2, 3}}, got {ansatz.a}")
    a = ansatz.a
    coeffs = np.zeros((a + 1, 2, 2), dtype=complex)
    coeffs[0] += 0.5 * IDENTITY + 0.5 * ansatz.gap_min * SIGMA_X
    for k in range(a + 1):
        coeffs[k] += 0.5 * math.comb(a, k) * (-ansatz.s_min) ** (a - k) * SIGMA_Z
    return HamiltonianModel(
        ModelKind.TWO_LEVEL_ANSATZ, MappingProxyType({"ansatz": ansatz}), _freeze(coeffs)
    )


def build_model(kind: str | ModelKind, **params) -> HamiltonianModel:
    """Dispatch on a family name; used by the config layer."""
    kind = ModelKind(kind)
    if kind is ModelKind.GROVER_LINEAR:
        return build_grover_linear(params["n"], params.get("marked", 0))
    if kind is ModelKind.GROVER_QUADRATIC:
        return build_grover_quadratic(params["n"], params.get("marked", 0))
    if kind is ModelKind.QUBIT_PRODUCT:
        return build_qubit_product(params["m"])
    return build_two_level_ansatz(
        GapAnsatz(params.get("a", 1), 2, params["gap_min"], params.get("s_min", 0.5))
    )


def _rebuild(desc: dict) -> HamiltonianModel:
    desc = dict(desc)
    return build_model(desc.pop("kind"), **desc)


def polyval(coeffs: np.ndarray, s: float) -> np.ndarray:
    out = np.array(coeffs[-1])
    for c in coeffs[-2::-1]:
        out = out * s + c
    return out


def polyder(coeffs: np.ndarray) -> np.ndarray:
    if len(coeffs) == 1:
        return np.zeros_like(coeffs)
    k = np.arange(1, len(coeffs)).reshape(-1, 1, 1)
    return coeffs[1:] * k


def _clamp(s: float) -> float:
    if s < 0.0 or s > 1.0:
        warnings.warn(f"s = {s!r} outside [0, 1]; holding the endpoint value", RuntimeWarning, stacklevel=3)
        return min(max(s, 0.0), 1.0)
    return float(s)


def hamiltonian_at(model: HamiltonianModel, s: float) -> np.ndarray:
    """Reduced Hamiltonian ``H(s)``; ``s`` outside [0, 1] is clamped."""
    return polyval(model.coeffs, _clamp(s))


def derivative_at(model: HamiltonianModel, s: float) -> np.ndarray:
    """Exact ``dH/ds`` in the reduced representation."""
    return polyval(polyder(model.coeffs), _clamp(s))


def full_coefficients(model: HamiltonianModel) -> np.ndarray:
    """Polynomial coefficients in the full Hilbert space.

    Only intended for validation of the reduced forms; dimension is capped at
    ``MAX_FULL_DIM``.
    """
    dim = model.full_dim
    if dim > MAX_FULL_DIM:
        raise ValueError(f"full representation of dimension {dim} exceeds {MAX_FULL_DIM}")
    if model.kind in (ModelKind.GROVER_LINEAR, ModelKind.GROVER_QUADRATIC):
        n, w = model.params["n"], model.params["marked"]
        v_in = np.full(n, 1.0 / math.sqrt(n), dtype=complex)
        v_w = np.zeros(n, dtype=complex)
        v_w[w] = 1.0
        eye = np.eye(n, dtype=complex)
        h_i = eye - np.outer(v_in, v_in)
        h_f = eye - np.outer(v_w, v_w)
        c0, c1 = h_i, h_f - h_i
        if model.kind is ModelKind.GROVER_LINEAR:
            return np.stack([c0, c1])
        shift = _quadratic_shift(n) * eye
        return np.stack([c0 @ c0, c0 @ c1 + c1 @ c0 + shift, c1 @ c1 - shift])
    if model.kind is ModelKind.QUBIT_PRODUCT:
        m = model.factors
        out = np.zeros((2, dim, dim), dtype=complex)
        for j in range(m):
            left = np.eye(2**j)
            right = np.eye(2 ** (m - j - 1))
            for k in range(2):
                out[k] += np.kron(np.kron(left, model.coeffs[k]), right)
        return out
    return np.array(model.coeffs)


def full_hamiltonian(model: HamiltonianModel, s: float) -> np.ndarray:
    return polyval(full_coefficients(model), _clamp(s))


def full_trace(model: HamiltonianModel, s: float) -> float:
    """Trace over the full Hilbert space, evaluated analytically.

    For Grover the complement of span{|in>, |w>} carries a constant diagonal
    contribution (shifted by the identity term in the quadratic family).
    """
    s = _clamp(s)
    tr = float(np.trace(polyval(model.coeffs, s)).real)
    if model.kind is ModelKind.GROVER_LINEAR:
        return tr + (model.params["n"] - 2)
    if model.kind is ModelKind.GROVER_QUADRATIC:
        n = model.params["n"]
        return tr + (n - 2) * (1.0 + s * (1.0 - s) * _quadratic_shift(n))
    if model.kind is ModelKind.QUBIT_PRODUCT:
        return tr * model.factors
    return tr
