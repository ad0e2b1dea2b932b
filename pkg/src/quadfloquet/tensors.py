"""Spin-3/2 operator algebra.

Irreducible spherical tensors, single-transition ("fictitious") operators and
their symmetric/antisymmetric combinations, all as dense 4x4 complex arrays
over the Zeeman basis ordered m = +3/2, +1/2, -1/2, -3/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

SPIN = 1.5
DIM = 4
ATOL = 1e-12

# Magnetic quantum numbers in basis order.
M_VALUES = np.array([1.5, 0.5, -0.5, -1.5])


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    a.setflags(write=False)
    return a


@lru_cache(maxsize=None)
def spin_operators() -> dict[str, np.ndarray]:
    """Cartesian and ladder spin operators for I = 3/2."""
    m = M_VALUES
    ip = np.zeros((DIM, DIM), complex)
    for a in range(1, DIM):
        ip[a - 1, a] = np.sqrt(SPIN * (SPIN + 1) - m[a] * (m[a] + 1))
    im = ip.conj().T
    ops = {
        "Iz": np.diag(m).astype(complex),
        "Ip": ip,
        "Im": im,
        "Ix": (ip + im) / 2,
        "Iy": (ip - im) / 2j,
        "E": np.eye(DIM, dtype=complex),
    }
    return {k: _freeze(v) for k, v in ops.items()}


def Iz() -> np.ndarray:
    return spin_operators()["Iz"]


def Ix() -> np.ndarray:
    return spin_operators()["Ix"]


def Iy() -> np.ndarray:
    return spin_operators()["Iy"]


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt product Tr(a^dagger b)."""
    return complex(np.vdot(a, b))


def is_hermitian(a: np.ndarray, atol: float = ATOL) -> bool:
    return bool(np.max(np.abs(a - a.conj().T)) < atol)


@dataclass(frozen=True)
class TensorOp:
    """Unit-norm irreducible tensor component T^(k)_q (Condon-Shortley phases)."""

    k: int
    q: int
    matrix: np.ndarray

    def __post_init__(self):
        if not (0 <= self.k <= 3 and -self.k <= self.q <= self.k):
            raise ValueError(f"invalid tensor index k={self.k}, q={self.q}")


@lru_cache(maxsize=None)
def _tensor_table() -> dict[tuple[int, int], np.ndarray]:
    # Top component from powers of I+, then step down with I-:
    # [I-, T(k,q)] = sqrt((k+q)(k-q+1)) T(k,q-1).
    ops = spin_operators()
    ip, im = ops["Ip"], ops["Im"]
    table = {}
    for k in range(4):
        top = np.linalg.matrix_power(ip, k) * (-1) ** k
        top = top / np.linalg.norm(top)
        table[(k, k)] = top
        cur = top
        for q in range(k, -k, -1):
            cur = commutator(im, cur) / np.sqrt((k + q) * (k - q + 1))
            table[(k, q - 1)] = cur
    return {key: _freeze(v) for key, v in table.items()}


def build_tensor_basis() -> list[TensorOp]:
    """All 16 components T^(k)_q, k = 0..3, ordered by k then descending q."""
    table = _tensor_table()
    return [TensorOp(k, q, table[(k, q)]) for k in range(4) for q in range(k, -k - 1, -1)]


def tensor(k: int, q: int) -> np.ndarray:
    """Condon-Shortley T^(k)_q."""
    try:
        return _tensor_table()[(k, q)]
    except KeyError:
        raise ValueError(f"invalid tensor index k={k}, q={q}") from None


# Phase attached to each rank in the transition-operator tables. With these
# factors every Table-style combination collapses onto single matrix elements
# and the triple-quantum detection signal comes out real.
RANK_PHASE = {0: 1.0 + 0j, 1: 1j, 2: 1.0 + 0j, 3: -1j}


def phased_tensor(k: int, q: int) -> np.ndarray:
    """Tensor component in the phase convention of the transition-operator tables."""
    return _freeze(RANK_PHASE[k] * tensor(k, q))


def expand_in_basis(a: np.ndarray) -> dict[tuple[int, int], complex]:
    """Hilbert-Schmidt coefficients of ``a`` on the Condon-Shortley basis."""
    return {(t.k, t.q): hs_inner(t.matrix, a) for t in build_tensor_basis()}


def reconstruct(coeffs: dict[tuple[int, int], complex]) -> np.ndarray:
    out = np.zeros((DIM, DIM), complex)
    for (k, q), c in coeffs.items():
        out += c * tensor(k, q)
    return out


class Frequency(Enum):
    """Nominal transition frequency of a fictitious operator in the lab frame."""

    ZERO = "0"
    LARMOR = "w0"
    LARMOR_MINUS_Q = "w0-wQ"
    LARMOR_PLUS_Q = "w0+wQ"
    DOUBLE_PLUS_Q = "2w0+wQ"
    DOUBLE_MINUS_Q = "2w0-wQ"
    TRIPLE = "3w0"


_S = np.sqrt
# label -> (coherence order, frequency tag, [(coefficient, k, q), ...]) over phased tensors
_FICTITIOUS = {
    "ZQ_A": (0, Frequency.ZERO, [(1j / _S(5), 1, 0), (-2j / _S(5), 3, 0)]),
    "ZQ_B": (0, Frequency.ZERO, [(2j / _S(5), 1, 0), (1j / _S(5), 3, 0)]),
    "ZQ_C": (0, Frequency.ZERO, [(1j / _S(5), 1, 0), (3j / _S(5), 3, 0)]),
    "ZQ_D": (0, Frequency.ZERO, [(3j / _S(5), 1, 0), (-1j / _S(5), 3, 0)]),
    "RF_A+": (1, Frequency.LARMOR_MINUS_Q, [(3j / _S(10), 1, 1), (_S(1.5), 2, 1), (-1j * _S(0.6), 3, 1)]),
    "RF_B+": (1, Frequency.LARMOR_PLUS_Q, [(3j / _S(10), 1, 1), (-_S(1.5), 2, 1), (-1j * _S(0.6), 3, 1)]),
    "RF_C+": (1, Frequency.LARMOR, [(1j * _S(0.4), 1, 1), (1j * _S(0.6), 3, 1)]),
    "RF_A-": (-1, Frequency.LARMOR_MINUS_Q, [(-3j / _S(10), 1, -1), (-_S(1.5), 2, -1), (1j * _S(0.6), 3, -1)]),
    "RF_B-": (-1, Frequency.LARMOR_PLUS_Q, [(-3j / _S(10), 1, -1), (_S(1.5), 2, -1), (1j * _S(0.6), 3, -1)]),
    "RF_C-": (-1, Frequency.LARMOR, [(-1j * _S(0.4), 1, -1), (-1j * _S(0.6), 3, -1)]),
    "D_1+": (2, Frequency.DOUBLE_PLUS_Q, [(1, 2, 2), (1j, 3, 2)]),
    "D_2+": (2, Frequency.DOUBLE_MINUS_Q, [(1, 2, 2), (-1j, 3, 2)]),
    "D_1-": (-2, Frequency.DOUBLE_MINUS_Q, [(1, 2, -2), (-1j, 3, -2)]),
    "D_2-": (-2, Frequency.DOUBLE_PLUS_Q, [(1, 2, -2), (1j, 3, -2)]),
    "T+": (3, Frequency.TRIPLE, [(1, 3, 3)]),
    "T-": (-3, Frequency.TRIPLE, [(1, 3, -3)]),
}

FICTITIOUS_LABELS = tuple(_FICTITIOUS)


@dataclass(frozen=True)
class FictitiousOp:
    label: str
    order: int
    frequency: Frequency
    matrix: np.ndarray


@lru_cache(maxsize=None)
def build_fictitious(label: str) -> FictitiousOp:
    """Single-transition operator assembled from its tensor combination."""
    try:
        order, freq, terms = _FICTITIOUS[label]
    except KeyError:
        raise ValueError(f"unknown fictitious operator {label!r}") from None
    mat = sum(c * phased_tensor(k, q) for c, k, q in terms)
    return FictitiousOp(label, order, freq, _freeze(mat))


def fictitious_terms(label: str) -> list[tuple[complex, int, int]]:
    """The (coefficient, k, q) recipe behind ``build_fictitious(label)``."""
    if label not in _FICTITIOUS:
        raise ValueError(f"unknown fictitious operator {label!r}")
    return list(_FICTITIOUS[label][2])


# stem -> ((phase power, operator), (phase power, operator))
_COMBOS = {
    "CT": ((1, "RF_C+"), (-1, "RF_C-")),
    "ST^(r)": ((-1, "RF_A-"), (1, "RF_B+")),
    "ST^(cr)": ((1, "RF_A+"), (-1, "RF_B-")),
    "D^(r)": ((2, "D_1+"), (-2, "D_1-")),
    "D^(cr)": ((2, "D_2+"), (-2, "D_2-")),
    "T": ((3, "T+"), (-3, "T-")),
}


def _combo_parts(label: str) -> tuple[str, int]:
    for stem in _COMBOS:
        for kind, sign in (("_S", 1), ("_AS", -1)):
            base, _, sup = stem.partition("^")
            name = base + kind + (("^" + sup) if sup else "")
            if name == label:
                return stem, sign
    raise ValueError(f"unknown combination {label!r}")


COMBO_LABELS = tuple(
    stem.partition("^")[0] + kind + (("^" + stem.partition("^")[2]) if "^" in stem else "")
    for stem in _COMBOS
    for kind in ("_S", "_AS")
)


@dataclass(frozen=True)
class ComboOp:
    label: str
    phase: float
    matrix: np.ndarray


def build_combo(label: str, phase: float = 0.0) -> ComboOp:
    """Symmetric (``_S``) or antisymmetric (``_AS``) pair of transition operators.

    Labels look like ``CT_S``, ``ST_AS^(r)``, ``D_S^(cr)`` or ``T_AS``. Each
    member carries the RF phase factor exp(-i n phase) for its coherence power n.
    """
    stem, sign = _combo_parts(label)
    (p1, a), (p2, b) = _COMBOS[stem]
    phi = np.exp(-1j * phase)
    mat = phi**p1 * build_fictitious(a).matrix + sign * phi**p2 * build_fictitious(b).matrix
    return ComboOp(label, float(phase), _freeze(mat))


def combo(label: str, phase: float = 0.0) -> np.ndarray:
    return build_combo(label, phase).matrix


def phase_rotation(phase: float) -> np.ndarray:
    """exp(-i phase Iz); conjugating with it shifts every RF phase by ``phase``."""
    return np.diag(np.exp(-1j * phase * M_VALUES))


def rf_operator(phase: float = 0.0) -> np.ndarray:
    """Ix cos(phase) + Iy sin(phase)."""
    return np.cos(phase) * Ix() + np.sin(phase) * Iy()


def grouped_rf_hamiltonian(omega1: float, phase: float, omega_q: float, t: float) -> np.ndarray:
    """RF term in the Zeeman-quadrupolar frame written through transition operators."""
    phi = np.exp(-1j * phase)
    f = {lab: build_fictitious(lab).matrix for lab in ("RF_A+", "RF_A-", "RF_B+", "RF_B-", "RF_C+", "RF_C-")}
    central = phi * f["RF_C+"] + f["RF_C-"] / phi
    cr = (phi * f["RF_A+"] + f["RF_B-"] / phi) * np.exp(1j * omega_q * t)
    r = (f["RF_A-"] / phi + phi * f["RF_B+"]) * np.exp(-1j * omega_q * t)
    return -omega1 * central - omega1 / 2 * (cr + r)


def verify_frame_reduction(omega1: float, phase: float, omega_q: float, times=None) -> float:
    """Largest deviation between the frame-transformed RF term and its grouped form.

    The on-resonance Zeeman-frame RF Hamiltonian -omega1 Ix(phase) is moved into
    the quadrupolar interaction frame by U = exp(-i omega_q t T20) at each sampled
    time and compared with :func:`grouped_rf_hamiltonian`. The result is in units
    of omega1, so it measures relative agreement.
    """
    if omega1 == 0:
        return 0.0
    if times is None:
        period = 2 * np.pi / abs(omega_q) if omega_q else 1.0
        times = np.linspace(0.0, period, 32, endpoint=False)
    t20 = np.diag(tensor(2, 0)).real
    h_rf = -omega1 * rf_operator(phase)
    worst = 0.0
    for t in np.atleast_1d(times):
        u = np.diag(np.exp(-1j * omega_q * t * t20))
        # Interaction picture with respect to -omega_q T20: U H U^dagger.
        framed = u @ h_rf @ u.conj().T
        dev = np.max(np.abs(framed - grouped_rf_hamiltonian(omega1, phase, omega_q, t)))
        worst = max(worst, float(dev) / abs(omega1))
    return worst


def coherence_order_matrix() -> np.ndarray:
    """Entry (a, b) holds m_a - m_b, the coherence order of that matrix element."""
    return M_VALUES[:, None] - M_VALUES[None, :]
