"""Exact propagation of the rotating-frame spin-3/2 Hamiltonian.

This is the reference every approximation is compared against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ExcitationProfile, ExperimentParams
from .tensors import FICTITIOUS_LABELS, Iz, build_fictitious, is_hermitian, phased_tensor, rf_operator, tensor

# Overall sign applied to Tr[rho(t) T3-3]; +1 keeps the phase-0 signal real
# with a negative initial slope.
DETECTION_SIGN = 1.0


def detection_operator() -> np.ndarray:
    """Phased triple-quantum tensor T3,-3 used as the receiver operator."""
    return phased_tensor(3, -3)


def rotating_frame_hamiltonian(params: ExperimentParams) -> np.ndarray:
    """H = -omega1 Ix(phase) - Omega_Q T20 in the frame rotating at the Larmor frequency."""
    return -params.omega1 * rf_operator(params.phase) - params.omega_q_eff * tensor(2, 0)


def propagate(h: np.ndarray, rho0: np.ndarray, times) -> np.ndarray:
    """rho(t) = U rho0 U^dagger with U = exp(-i H t) for each time; returns (T, 4, 4)."""
    h = np.asarray(h, dtype=complex)
    if not is_hermitian(h, atol=1e-9 * max(1.0, float(np.abs(h).max()))):
        raise ValueError("propagate expects a Hermitian Hamiltonian")
    e, v = np.linalg.eigh(h)
    r = v.conj().T @ rho0 @ v
    t = np.atleast_1d(np.asarray(times, dtype=float))
    ph = np.exp(-1j * np.subtract.outer(e, e)[None] * t[:, None, None])
    return v @ (r * ph) @ v.conj().T


def exact_signal_batch(omega1: float, phase: float, omega_q_eff, times) -> np.ndarray:
    """Exact complex signal for many splittings at once; returns (n, T).

    Uses the spectral form sum_ab c_ab exp(-i (e_a - e_b) t), with
    c_ab = (V^dagger Iz V)_ab (V^dagger D V)_ba.
    """
    wq = np.atleast_1d(np.asarray(omega_q_eff, dtype=float))
    t = np.asarray(times, dtype=float)
    h = -omega1 * rf_operator(phase)[None] - wq[:, None, None] * tensor(2, 0)[None]
    e, v = np.linalg.eigh(h)
    vh = np.conj(np.swapaxes(v, -1, -2))
    rz = vh @ Iz() @ v
    rd = vh @ detection_operator() @ v
    c = rz * np.swapaxes(rd, -1, -2)
    de = (e[:, :, None] - e[:, None, :]).reshape(len(wq), 16)
    c = c.reshape(len(wq), 16)
    out = np.empty((len(wq), t.size), complex)
    # Chunk over time so the (n, T, 16) phase array stays small.
    step = max(1, 2_000_000 // max(1, 16 * len(wq)))
    for i in range(0, t.size, step):
        tt = t[i : i + step]
        out[:, i : i + step] = np.einsum("nk,nkt->nt", c, np.exp(-1j * de[:, :, None] * tt[None, None, :]))
    return DETECTION_SIGN * out


def tq_signal_exact(params: ExperimentParams, times) -> ExcitationProfile:
    """Exact triple-quantum excitation profile from rho(0) = Iz."""
    t = np.asarray(times, dtype=float)
    vals = exact_signal_batch(params.omega1, params.phase, params.omega_q_eff, t)[0]
    meta = {"engine": "oracle", "detection_sign": DETECTION_SIGN, "cq_hz": params.cq_hz, "rf_hz": params.rf_hz}
    return ExcitationProfile(t, vals, meta)


@dataclass(frozen=True)
class CoherenceDecomposition:
    """Projection of a density matrix onto the transition operators.

    ``per_operator`` maps each label to its least-squares coefficient,
    ``per_order`` maps a coherence order to the Frobenius norm of that part of
    the matrix, and ``residual`` is what the operator set fails to reproduce.
    """

    per_operator: dict[str, complex]
    per_order: dict[int, float]
    identity: complex
    residual: float


def coherence_amplitudes(rho: np.ndarray) -> CoherenceDecomposition:
    rho = np.asarray(rho, dtype=complex)
    labels = list(FICTITIOUS_LABELS)
    cols = [build_fictitious(lab).matrix.ravel() for lab in labels] + [np.eye(4, dtype=complex).ravel()]
    a = np.stack(cols, axis=1)
    # The zero-quantum set is linearly dependent, so take the minimum-norm solution.
    coef, *_ = np.linalg.lstsq(a, rho.ravel(), rcond=None)
    resid = float(np.linalg.norm(a @ coef - rho.ravel()))
    m = np.array([1.5, 0.5, -0.5, -1.5])
    order = np.rint(m[:, None] - m[None, :]).astype(int)
    per_order = {int(n): float(np.linalg.norm(rho[order == n])) for n in range(-3, 4)}
    return CoherenceDecomposition(dict(zip(labels, coef[:-1])), per_order, complex(coef[-1]), resid)
