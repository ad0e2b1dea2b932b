"""Floquet-space contact transformations for a spin-3/2 nucleus.

A periodic operator A(t) = sum_m A_m exp(-i m w t) is stored through its
Fourier blocks A_m (4x4 each) plus a "ladder" coefficient c for the number
operator term c N. Because every operator built here is block-Toeplitz, the
blocks fully describe the infinite Floquet matrix; :meth:`FloquetMatrix.to_dense`
renders a finite window for inspection. Leading array dimensions are batch
dimensions, so one call can treat many crystal orientations.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .tensors import M_VALUES, Iz, combo, phased_tensor, tensor

DEFAULT_NF = 16
DEFAULT_MAX_ORDER = 60
DEFAULT_EPS = 1e-14
DEGENERACY_RTOL = 1e-6
# Blocks smaller than this fraction of the largest block are dropped after
# each commutator; they sit far below every tolerance used downstream.
PRUNE_RTOL = 1e-22


class DivergenceWarning(UserWarning):
    """A transformation series or pass sequence stopped converging."""


class DegeneracyError(ValueError):
    """A generator denominator vanished (an unfoldable resonance)."""


class FloquetMatrix:
    """Block-Toeplitz Floquet operator with optional batch dimensions.

    ``blocks`` has shape ``batch + (2*cap + 1, 4, 4)`` with offset m stored at
    index ``m + cap``. ``ladder`` (shape ``batch``) multiplies the Fourier
    number operator and ``omega`` is the fundamental frequency used when the
    operator is evaluated as a function of time.
    """

    __slots__ = ("blocks", "ladder", "omega", "cap")

    def __init__(self, blocks, ladder=0.0, omega=1.0, cap: int | None = None):
        blocks = np.asarray(blocks, dtype=complex)
        if blocks.ndim < 3 or blocks.shape[-2:] != (4, 4):
            raise ValueError("blocks must end in (2*cap+1, 4, 4)")
        n = blocks.shape[-3]
        if n % 2 == 0:
            raise ValueError("offset axis length must be odd")
        self.cap = (n - 1) // 2 if cap is None else cap
        if 2 * self.cap + 1 != n:
            raise ValueError("cap does not match the offset axis")
        self.blocks = blocks
        batch = blocks.shape[:-3]
        self.ladder = np.broadcast_to(np.asarray(ladder, dtype=float), batch).copy()
        self.omega = np.broadcast_to(np.asarray(omega, dtype=float), batch).copy()

    # construction ---------------------------------------------------------
    @classmethod
    def zeros(cls, cap: int, batch: tuple = (), ladder=0.0, omega=1.0) -> FloquetMatrix:
        return cls(np.zeros(batch + (2 * cap + 1, 4, 4), complex), ladder, omega)

    def like(self, blocks=None, ladder=0.0) -> FloquetMatrix:
        if blocks is None:
            blocks = np.zeros_like(self.blocks)
        return FloquetMatrix(blocks, ladder, self.omega)

    def copy(self) -> FloquetMatrix:
        return FloquetMatrix(self.blocks.copy(), self.ladder.copy(), self.omega.copy())

    # access ---------------------------------------------------------------
    @property
    def batch_shape(self) -> tuple:
        return self.blocks.shape[:-3]

    @property
    def offsets(self) -> np.ndarray:
        return np.arange(-self.cap, self.cap + 1)

    def block(self, m: int) -> np.ndarray:
        if abs(m) > self.cap:
            return np.zeros(self.batch_shape + (4, 4), complex)
        return self.blocks[..., m + self.cap, :, :]

    def set_block(self, m: int, value) -> None:
        if abs(m) > self.cap:
            raise ValueError(f"offset {m} exceeds the stored bandwidth {self.cap}")
        self.blocks[..., m + self.cap, :, :] = value

    def active_offsets(self) -> np.ndarray:
        mask = np.any(self.blocks != 0, axis=tuple(range(self.blocks.ndim - 3)) + (-2, -1))
        return self.offsets[mask]

    # arithmetic -----------------------------------------------------------
    def _check(self, other: FloquetMatrix) -> None:
        if other.cap != self.cap:
            raise ValueError("bandwidth mismatch")

    def __add__(self, other: FloquetMatrix) -> FloquetMatrix:
        self._check(other)
        return FloquetMatrix(self.blocks + other.blocks, self.ladder + other.ladder, self.omega)

    def __sub__(self, other: FloquetMatrix) -> FloquetMatrix:
        self._check(other)
        return FloquetMatrix(self.blocks - other.blocks, self.ladder - other.ladder, self.omega)

    def __neg__(self) -> FloquetMatrix:
        return FloquetMatrix(-self.blocks, -self.ladder, self.omega)

    def scaled(self, c) -> FloquetMatrix:
        c = np.asarray(c)
        cb = c[..., None, None, None] if c.ndim else c
        lad = self.ladder * c
        if np.iscomplexobj(lad):
            if np.any(np.abs(lad.imag) > 0):
                raise ValueError("ladder coefficient must stay real")
            lad = lad.real
        return FloquetMatrix(self.blocks * cb, lad, self.omega)

    def adjoint(self) -> FloquetMatrix:
        b = np.conj(np.swapaxes(self.blocks, -1, -2))[..., ::-1, :, :]
        return FloquetMatrix(b.copy(), self.ladder, self.omega)

    def norm(self) -> np.ndarray:
        """Frobenius norm of one block row (ladder excluded), per batch member."""
        return np.sqrt(np.sum(np.abs(self.blocks) ** 2, axis=(-3, -2, -1)))

    def offdiag_norm(self) -> np.ndarray:
        """Norm of the m != 0 blocks, the part a contact transformation removes."""
        b = self.blocks.copy()
        b[..., self.cap, :, :] = 0
        return np.sqrt(np.sum(np.abs(b) ** 2, axis=(-3, -2, -1)))

    def is_hermitian(self, rtol: float = 1e-10) -> bool:
        d = np.abs(self.blocks - self.adjoint().blocks).max(initial=0.0)
        return bool(d <= rtol * max(1.0, float(np.abs(self.blocks).max(initial=0.0))))

    def zero_block_only(self) -> FloquetMatrix:
        out = self.like()
        out.set_block(0, self.block(0))
        return out

    def without_zero_block(self) -> FloquetMatrix:
        out = FloquetMatrix(self.blocks.copy(), 0.0, self.omega)
        out.set_block(0, 0)
        return out

    def with_cap(self, cap: int) -> FloquetMatrix:
        """Re-store with a different bandwidth (truncating or zero-padding)."""
        out = FloquetMatrix.zeros(cap, self.batch_shape, self.ladder, self.omega)
        k = min(cap, self.cap)
        out.blocks[..., cap - k : cap + k + 1, :, :] = self.blocks[..., self.cap - k : self.cap + k + 1, :, :]
        return out

    def prune(self, rtol: float = PRUNE_RTOL) -> FloquetMatrix:
        mags = np.abs(self.blocks).max(axis=(-2, -1))
        top = mags.max(axis=-1, keepdims=True)
        self.blocks[mags <= rtol * top] = 0
        return self

    # representations ------------------------------------------------------
    def evaluate(self, times) -> np.ndarray:
        """Time-domain operator sum_m A_m exp(-i m w t); shape batch + (T, 4, 4).

        The ladder term has no time-domain counterpart and is ignored.
        """
        t = np.asarray(times, dtype=float)
        act = self.active_offsets()
        if act.size == 0:
            return np.zeros(self.batch_shape + (t.size, 4, 4), complex)
        ph = np.exp(-1j * act[:, None] * (self.omega[..., None, None] * t))  # batch, M, T
        sel = self.blocks[..., act + self.cap, :, :]
        return np.einsum("...mij,...mt->...tij", sel, ph)

    def to_dense(self, n_f: int) -> np.ndarray:
        """Finite Floquet matrix over Fourier indices -n_f..n_f.

        Block (n, n') holds A_{n-n'} and the diagonal carries -n * ladder, so
        dense commutators agree with :func:`commutator` away from the edges.
        """
        if self.batch_shape:
            raise ValueError("to_dense works on unbatched operators")
        size = 2 * n_f + 1
        out = np.zeros((4 * size, 4 * size), complex)
        for i, n in enumerate(range(-n_f, n_f + 1)):
            for j, k in enumerate(range(-n_f, n_f + 1)):
                m = n - k
                blk = self.block(m) if abs(m) <= self.cap else 0
                if m == 0:
                    blk = blk - n * self.ladder * np.eye(4)
                out[4 * i : 4 * i + 4, 4 * j : 4 * j + 4] = blk
        return out

    def __repr__(self) -> str:
        return f"FloquetMatrix(batch={self.batch_shape}, cap={self.cap}, offsets={self.active_offsets().tolist()})"


def embed(op, m: int, n_f: int = DEFAULT_NF, ladder=0.0, omega=1.0) -> FloquetMatrix:
    """Floquet operator with a single block ``op`` at offset m.

    The stored bandwidth is 2*n_f, the largest offset visible in a dense
    window of Fourier indices -n_f..n_f.
    """
    if abs(m) > 2 * n_f:
        raise ValueError(f"offset {m} cannot appear in a window of half-width {n_f}")
    op = np.asarray(op, dtype=complex)
    out = FloquetMatrix.zeros(2 * n_f, op.shape[:-2], ladder, omega)
    out.set_block(m, op)
    return out


def commutator(a: FloquetMatrix, b: FloquetMatrix, prune: bool = True) -> FloquetMatrix:
    """[A, B] for block-Toeplitz operators, including number-operator terms.

    [A, B]_m = sum_k (A_k B_{m-k} - B_{m-k} A_k) + m (b.ladder A_m - a.ladder B_m).
    Products that would land beyond the stored bandwidth are dropped.
    """
    a._check(b)
    cap = a.cap
    out = np.zeros(np.broadcast_shapes(a.blocks.shape, b.blocks.shape), complex)
    bb = b.blocks
    for k in a.active_offsets():
        ak = a.blocks[..., k + cap : k + cap + 1, :, :]
        if k >= 0:
            src, dst = slice(0, 2 * cap + 1 - k), slice(k, 2 * cap + 1)
        else:
            src, dst = slice(-k, 2 * cap + 1), slice(0, 2 * cap + 1 + k)
        bj = bb[..., src, :, :]
        out[..., dst, :, :] += ak @ bj - bj @ ak
    m = np.arange(-cap, cap + 1)[:, None, None]
    if np.any(b.ladder):
        out += b.ladder[..., None, None, None] * m * a.blocks
    if np.any(a.ladder):
        out -= a.ladder[..., None, None, None] * m * b.blocks
    res = FloquetMatrix(out, 0.0, a.omega)
    return res.prune() if prune else res


# transformations ----------------------------------------------------------


@dataclass
class SeriesInfo:
    """Diagnostics of one nested-commutator series."""

    term_norms: list = field(default_factory=list)
    highest_order: int = 0
    converged: np.ndarray | bool = True
    diverging: np.ndarray | bool = False

    @property
    def last_norm(self):
        return self.term_norms[-1] if self.term_norms else 0.0


def _scale(h: FloquetMatrix) -> np.ndarray:
    s = h.norm() + np.abs(h.ladder)
    return np.where(s > 0, s, 1.0)


def _monitor(norms: list, scale) -> np.ndarray:
    """True where the last four term norms never decreased (three rises in a row)."""
    if len(norms) < 4:
        return np.zeros(np.shape(scale), bool)
    n = np.stack(norms[-4:]) / scale
    rising = np.all(np.diff(n, axis=0) >= 0, axis=0)
    return rising & (n[-1] > 1e-12)


def _warn_divergence(what: str, diverging, info: str = "") -> None:
    count = int(np.sum(diverging))
    if count:
        warnings.warn(f"{what} is not converging for {count} case(s){info}", DivergenceWarning, stacklevel=3)


def bch_transform(h: FloquetMatrix, s: FloquetMatrix, max_order: int = DEFAULT_MAX_ORDER, eps: float = DEFAULT_EPS, warn: bool = True):
    """exp(iS) H exp(-iS) as the series H + i[S,H] + (i^2/2!)[S,[S,H]] + ...

    Stops when a term falls below ``eps`` times the norm of H or after
    ``max_order`` nested commutators. Returns ``(result, SeriesInfo)``.
    """
    scale = _scale(h)
    total = h.copy()
    term = h
    info = SeriesInfo()
    diverging = np.zeros(h.batch_shape, bool)
    for n in range(1, max_order + 1):
        term = commutator(s, term).scaled(1j / n)
        total = total + term
        nrm = term.norm()
        info.term_norms.append(nrm)
        info.highest_order = n
        diverging |= _monitor(info.term_norms, scale)
        if np.all(nrm <= eps * scale):
            break
    info.converged = np.asarray(info.term_norms[-1] <= eps * scale) if info.term_norms else np.ones(h.batch_shape, bool)
    info.diverging = diverging
    if warn:
        peak = np.max(np.stack(info.term_norms) / scale) if info.term_norms else 0.0
        _warn_divergence("nested-commutator series", diverging, f" (term norms grew for three orders in a row, peak term/|H| {peak:.3g})")
    return total, info


def bch_split_terms(h1: FloquetMatrix, s: FloquetMatrix, max_order: int) -> list[tuple[int, FloquetMatrix, FloquetMatrix]]:
    """Order-by-order corrections when S folds H1 exactly against H0.

    With i[S, H0] = -H1 the transformed Hamiltonian is H0 + sum_{n>=2} H_n,
    H_n = i^(n-1) / (n (n-2)!) [S, [S, ..., H1]] with n-1 nested commutators.
    Each entry is ``(n, diagonal part, off-diagonal part)`` where "diagonal"
    means the m = 0 block.
    """
    out = []
    nest = h1
    for n in range(2, max_order + 1):
        nest = commutator(s, nest)
        c = 1j ** (n - 1) / (n * math.factorial(n - 2))
        term = nest.scaled(c)
        out.append((n, term.zero_block_only(), term.without_zero_block()))
    return out


def nested_series(x: FloquetMatrix, s: FloquetMatrix, depth: int) -> FloquetMatrix:
    """sum_{k=0}^{depth} (i^k / k!) [S^k, X], the BCH series cut at a fixed depth."""
    total = x.copy()
    term = x
    for k in range(1, depth + 1):
        term = commutator(s, term).scaled(1j / k)
        total = total + term
    return total


# families of matrix elements, keyed by the transition they couple
_FAMILIES = {
    "CT": [(1, 2)],
    "ST": [(0, 1), (2, 3)],
    "DQ": [(0, 2), (1, 3)],
    "TQ": [(0, 3)],
    "ZQ": [(0, 0), (1, 1), (2, 2), (3, 3)],
}
FAMILY_NAMES = tuple(_FAMILIES) + ("all",)


def family_mask(families: Iterable[str]) -> np.ndarray:
    mask = np.zeros((4, 4), bool)
    for f in families:
        if f == "all":
            mask[:] = True
            continue
        if f not in _FAMILIES:
            raise ValueError(f"unknown element family {f!r}; choose from {FAMILY_NAMES}")
        for a, b in _FAMILIES[f]:
            mask[a, b] = mask[b, a] = True
    return mask


H0_MODES = ("ladder", "diagonal", "block")


def split_hamiltonian(h: FloquetMatrix, families: Sequence[str] = ("all",), h0: str = "block"):
    """Split H into (H0, H1, rest).

    H0 is the ladder plus the m = 0 block (all of it, only its diagonal, or
    none of it depending on ``h0``). H1 collects the m != 0 blocks whose
    elements belong to ``families``; ``rest`` is everything else.
    """
    if h0 not in H0_MODES:
        raise ValueError(f"h0 mode must be one of {H0_MODES}")
    z = h.block(0)
    h0_op = h.like(ladder=h.ladder)
    if h0 == "block":
        h0_op.set_block(0, z)
    elif h0 == "diagonal":
        h0_op.set_block(0, z * np.eye(4))
    mask = family_mask(families)
    h1 = h.without_zero_block()
    h1.blocks *= mask
    rest = h - h0_op - h1
    rest.ladder = np.zeros_like(rest.ladder)
    return h0_op, h1, rest


def solve_generator(h0: FloquetMatrix, h1: FloquetMatrix, rtol: float = DEGENERACY_RTOL) -> FloquetMatrix:
    """Generator S with i[S, H0] + H1 = 0.

    H0 must hold only a ladder and an m = 0 block. When that block is not
    diagonal the equation is solved in its eigenbasis. A denominator
    m*w + e_b - e_a smaller than ``rtol * |w|`` that meets a non-zero element
    raises :class:`DegeneracyError`.
    """
    if h0.without_zero_block().norm().max(initial=0.0) > 0:
        raise ValueError("H0 may only contain the m = 0 block and the ladder")
    z = h0.block(0)
    offdiag = z - z * np.eye(4)
    if np.abs(offdiag).max(initial=0.0) > 0:
        e, v = np.linalg.eigh(z)
    else:
        e = np.real(np.diagonal(z, axis1=-2, axis2=-1)).copy()
        v = np.broadcast_to(np.eye(4, dtype=complex), z.shape)
    vh = np.conj(np.swapaxes(v, -1, -2))
    f = vh[..., None, :, :] @ h1.blocks @ v[..., None, :, :]
    m = h1.offsets[:, None, None]
    lad = h0.ladder[..., None, None, None]
    den = m * lad + e[..., None, None, :] - e[..., None, :, None]
    scale = np.abs(f).max(initial=0.0)
    tiny = 1e-14 * scale if scale > 0 else 0.0
    live = np.abs(f) > tiny
    floor = rtol * np.maximum(np.abs(lad), 1e-300)
    bad = live & (np.abs(den) < floor)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        mm, a, b = int(h1.offsets[idx[-3]]), int(idx[-2]), int(idx[-1])
        raise DegeneracyError(f"vanishing denominator at offset {mm}, element ({a}, {b}); the coupling is resonant")
    s = np.where(live, 1j * f / np.where(live, den, 1.0), 0.0)
    blocks = v[..., None, :, :] @ s @ vh[..., None, :, :]
    return FloquetMatrix(blocks, 0.0, h1.omega)


def generator_residual(s: FloquetMatrix, h0: FloquetMatrix, h1: FloquetMatrix) -> float:
    """max |i[S,H0] + H1| relative to max |H1|."""
    r = commutator(s, h0, prune=False).scaled(1j) + h1
    top = np.abs(h1.blocks).max(initial=0.0)
    return float(np.abs(r.blocks).max(initial=0.0) / top) if top else 0.0


# Hamiltonians -------------------------------------------------------------


def build_floquet_regime1(omega1, phase: float, omega_q, delta=0.0, n_f: int = DEFAULT_NF) -> FloquetMatrix:
    """Floquet Hamiltonian in the frame rotating at omega_Q about T20.

    omega_Q N + Delta T20 - omega1 CT_S (m=0) - (omega1/2)[ST_S^(r) (m=+1) + ST_S^(cr) (m=-1)].
    Scalars broadcast to a common batch shape.
    """
    w1, wq, dl = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (omega1, omega_q, delta)))
    h = FloquetMatrix.zeros(2 * n_f, w1.shape, ladder=wq, omega=wq)
    c = lambda x: x[..., None, None]
    h.set_block(0, c(dl) * tensor(2, 0) - c(w1) * combo("CT_S", phase))
    h.set_block(1, -c(w1) / 2 * combo("ST_S^(r)", phase))
    h.set_block(-1, -c(w1) / 2 * combo("ST_S^(cr)", phase))
    return h


def _tilt(phase: float) -> np.ndarray:
    """Rotation that carries the RF axis Ix(phase) onto Iz."""
    from scipy.linalg import expm

    from .tensors import Iy

    r = np.diag(np.exp(-1j * phase * M_VALUES))
    return r @ expm(1j * np.pi / 2 * Iy()) @ r.conj().T


def build_floquet_regime2(omega1, phase: float, omega_q, n_f: int = DEFAULT_NF) -> FloquetMatrix:
    """Floquet Hamiltonian in the frame rotating at omega1 about the tilted RF axis.

    omega1 N + (Omega_Q/2) T20 (m=0) - sqrt(3/2)(Omega_Q/2)[phi^2 T22 (m=+2) + phi^-2 T2-2 (m=-2)],
    with phi = exp(-i phase).
    """
    w1, wq = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (omega1, omega_q)))
    h = FloquetMatrix.zeros(2 * n_f, w1.shape, ladder=w1, omega=w1)
    c = lambda x: x[..., None, None]
    phi = np.exp(-1j * phase)
    k = np.sqrt(1.5) / 2
    h.set_block(0, c(wq) / 2 * tensor(2, 0))
    h.set_block(2, -k * c(wq) * phi**2 * tensor(2, 2))
    h.set_block(-2, -k * c(wq) * phi**-2 * tensor(2, -2))
    return h


def regime2_direct_blocks(omega1: float, phase: float, omega_q: float) -> dict[int, np.ndarray]:
    """Regime II blocks built by rotating the lab Hamiltonian explicitly.

    Used to cross-check :func:`build_floquet_regime2`.
    """
    from .tensors import rf_operator

    u = _tilt(phase)
    h = -omega1 * rf_operator(phase) - omega_q * tensor(2, 0)
    v = u @ h @ u.conj().T + omega1 * Iz()
    dm = np.rint(M_VALUES[:, None] - M_VALUES[None, :]).astype(int)
    return {k: np.where(dm == k, v, 0) for k in (-2, 0, 2)}


# contact sequences --------------------------------------------------------


@dataclass(frozen=True)
class Pass:
    """One contact transformation.

    ``order`` caps the expansion (None means full nested-commutator series),
    ``families`` selects which m != 0 elements the generator folds and ``h0``
    chooses the zeroth-order operator (see :func:`split_hamiltonian`).
    """

    order: int | None = None
    families: tuple = ("all",)
    h0: str = "block"


def default_schedule(regime: str, passes: int, orders: Sequence[int | None] | None = None) -> list[Pass]:
    """Pass list used by the numeric engines.

    Passes 1 and 2 keep H0 diagonal in the Zeeman-Fourier basis (the ladder,
    plus the diagonal of the m = 0 block) and fold the couplings that the
    analytic treatment folds: satellite transitions first, then satellite and
    double-quantum terms. Later passes fold every m != 0 element against the
    full m = 0 block.
    """
    if passes < 1:
        raise ValueError("need at least one pass")
    orders = list(orders or [])
    if len(orders) > passes:
        raise ValueError("more order caps than passes")
    orders += [None] * (passes - len(orders))
    if regime == "I":
        head = [(("ST",), "diagonal"), (("ST", "DQ"), "diagonal")]
    elif regime == "II":
        head = [(("DQ",), "ladder"), (("DQ",), "diagonal")]
    else:
        raise ValueError(f"unknown regime {regime!r}")
    plan = head + [(("all",), "block")] * passes
    return [Pass(orders[i], plan[i][0], plan[i][1]) for i in range(passes)]


@dataclass
class PassRecord:
    pass_index: int
    order: int | None
    families: tuple
    h0: str
    highest_order: int
    last_term_norm: np.ndarray
    offdiag_before: np.ndarray
    offdiag_after: np.ndarray
    generator_residual: float
    term_norms: list = field(default_factory=list)
    coefficients: np.ndarray | None = None
    coefficient_shift: np.ndarray | None = None


@dataclass
class ContactResult:
    hamiltonian: FloquetMatrix
    generators: list
    records: list

    @property
    def effective(self) -> np.ndarray:
        return self.hamiltonian.block(0)


def apply_pass(h: FloquetMatrix, spec: Pass, max_order: int = DEFAULT_MAX_ORDER, eps: float = DEFAULT_EPS, warn: bool = True):
    """Run one contact transformation.

    Returns (new H, S, highest order kept, per-order term norms, generator residual).
    """
    h0, h1, rest = split_hamiltonian(h, spec.families, spec.h0)
    s = solve_generator(h0, h1)
    res = generator_residual(s, h0, h1)
    if spec.order is None:
        new, info = bch_transform(h, s, max_order, eps, warn=warn)
        return new, s, info.highest_order, info.term_norms, res
    if spec.order < 1:
        raise ValueError("order cap must be at least 1")
    new = h0 + nested_series(rest, s, spec.order - 1)
    norms = []
    for _, d, od in bch_split_terms(h1, s, spec.order):
        new = new + d + od
        norms.append((d + od).norm())
    return new, s, spec.order, norms, res


def contact_sequence(h: FloquetMatrix, schedule: Sequence[Pass], basis=None, max_order: int = DEFAULT_MAX_ORDER, eps: float = DEFAULT_EPS, warn: bool = True) -> ContactResult:
    """Apply several contact transformations in turn.

    After each pass the m != 0 residual must shrink. If ``basis`` (a list of
    4x4 operators) is given, the shift it causes in previously obtained
    coefficients is recorded and compared with the second-order estimate
    |H1|^2 / gap, which bounds how far a converging pass may move them.
    """
    gens, recs = [], []
    cur = h
    prev = project(cur.block(0), basis) if basis is not None else None
    for i, spec in enumerate(schedule):
        before = cur.offdiag_norm()
        h0, h1, _ = split_hamiltonian(cur, spec.families, spec.h0)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cur, s, hi, norms, res = apply_pass(cur, spec, max_order, eps, warn=warn)
        for w in caught:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
        after = cur.offdiag_norm()
        last = norms[-1] if norms else np.zeros(cur.batch_shape)
        rec = PassRecord(i + 1, spec.order, tuple(spec.families), spec.h0, hi, last, before, after, res, list(norms))
        scale = _scale(h)
        grew = (after >= before) & (before > 1e-13 * scale)
        if warn and np.any(grew):
            _warn_divergence(f"pass {i + 1} residual", grew, " (off-diagonal norm did not decrease)")
        if basis is not None:
            cur_c = project(cur.block(0), basis)
            shift = np.max(np.abs(cur_c - prev), axis=-1)
            rec.coefficients = cur_c
            rec.coefficient_shift = shift
            if i > 0 and warn:
                gap = np.abs(h0.ladder)
                bound = 10 * h1.norm() ** 2 / np.where(gap > 0, gap, np.inf) + 1e-9 * scale
                _warn_divergence(f"pass {i + 1}", shift > bound, " (shifted earlier coefficients beyond the second-order bound)")
            prev = cur_c
        gens.append(s)
        recs.append(rec)
    return ContactResult(cur, gens, recs)


def project(block: np.ndarray, basis) -> np.ndarray:
    """Least-squares coefficients of ``block`` on ``basis``; shape batch + (len(basis),)."""
    b = np.stack([np.asarray(x, complex).ravel() for x in basis], axis=1)
    flat = np.asarray(block, complex).reshape(block.shape[:-2] + (16,))
    pinv = np.linalg.pinv(b)
    return flat @ pinv.T


# signal assembly ----------------------------------------------------------


@dataclass
class FrameSpec:
    """Map from the interaction frame back to the rotating frame.

    The interaction frame is F(t) rho F(t)^dagger with
    F(t) = exp(-i w t diag(tau)) @ static.
    """

    tau: np.ndarray
    static: np.ndarray


def frame_regime1() -> FrameSpec:
    return FrameSpec(np.real(np.diag(tensor(2, 0))).copy(), np.eye(4, dtype=complex))


def frame_regime2(phase: float) -> FrameSpec:
    return FrameSpec(M_VALUES.copy(), _tilt(phase))


def framed_operator(op: np.ndarray, frame: FrameSpec, omega, cap: int) -> FloquetMatrix:
    """F(t) op F(t)^dagger as a Floquet operator; element (a,b) lands at offset tau_a - tau_b."""
    x = frame.static @ op @ frame.static.conj().T
    d = np.rint(frame.tau[:, None] - frame.tau[None, :]).astype(int)
    omega = np.asarray(omega, dtype=float)
    out = FloquetMatrix.zeros(cap, omega.shape, omega=omega)
    for k in np.unique(d):
        out.set_block(int(k), np.where(d == k, x, 0))
    return out


def transform_observables(generators: Sequence[FloquetMatrix], op: FloquetMatrix, max_order: int = DEFAULT_MAX_ORDER, eps: float = 1e-16) -> FloquetMatrix:
    """exp(iS_n)...exp(iS_1) op exp(-iS_1)...exp(-iS_n) in Floquet space."""
    cur = op
    for s in generators:
        cur, _ = bch_transform(cur, s, max_order, eps, warn=False)
    return cur


@dataclass
class EffectiveModel:
    """Everything needed to turn an effective Hamiltonian into a signal."""

    h: np.ndarray  # batch + (4, 4), m = 0 block
    generators: list
    frame: FrameSpec
    omega: np.ndarray  # frame frequency, batch shape
    cap: int = 2 * DEFAULT_NF
    records: list = field(default_factory=list)


def effective_signal(model: EffectiveModel, times, transform: bool = True, detect: np.ndarray | None = None, rho0: np.ndarray | None = None) -> np.ndarray:
    """Complex detected signal from an effective Hamiltonian; shape batch + (T,).

    The initial state and the detection operator are carried into the
    interaction frame and through the generators as Floquet operators, so the
    time dependence reduces to Fourier sums and one diagonalisation of h.
    With ``transform=False`` the generators are ignored (untransformed
    observables).
    """
    from .oracle import DETECTION_SIGN, detection_operator

    t = np.asarray(times, dtype=float)
    detect = detection_operator() if detect is None else detect
    rho0 = Iz() if rho0 is None else rho0
    omega = np.asarray(model.omega, dtype=float)
    rho_f = framed_operator(rho0, model.frame, omega, model.cap)
    det_f = framed_operator(detect, model.frame, omega, model.cap)
    gens = model.generators if transform else []
    rho_f = transform_observables(gens, rho_f)
    det_f = transform_observables(gens, det_f)
    rho_0 = rho_f.evaluate([0.0])[..., 0, :, :]
    e, v = np.linalg.eigh(model.h)
    vh = np.conj(np.swapaxes(v, -1, -2))
    r = vh @ rho_0 @ v
    act = det_f.active_offsets()
    dets = vh[..., None, :, :] @ det_f.blocks[..., act + det_f.cap, :, :] @ v[..., None, :, :]
    # signal(t) = sum_{m,a,b} r_ab dets_{m,ba} exp(-i (e_a - e_b + m w) t)
    coef = r[..., None, :, :] * np.swapaxes(dets, -1, -2)
    freq = e[..., None, :, None] - e[..., None, None, :] + act[:, None, None] * omega[..., None, None, None]
    coef = coef.reshape(coef.shape[:-3] + (-1,))
    freq = freq.reshape(freq.shape[:-3] + (-1,))
    out = np.empty(coef.shape[:-1] + (t.size,), complex)
    step = max(1, 4_000_000 // max(1, coef.size))
    for i in range(0, t.size, step):
        tt = t[i : i + step]
        out[..., i : i + step] = np.einsum("...k,...kt->...t", coef, np.exp(-1j * freq[..., None] * tt))
    return DETECTION_SIGN * out


def effective_signal_direct(model: EffectiveModel, times, transform: bool = True) -> np.ndarray:
    """Reference implementation of :func:`effective_signal` (unbatched) by direct exponentials."""
    from scipy.linalg import expm

    from .oracle import DETECTION_SIGN, detection_operator

    t = np.asarray(times, dtype=float)
    w = float(model.omega)
    fr = model.frame
    gens = model.generators if transform else []

    def wmat(tt):
        out = np.eye(4, dtype=complex)
        for s in gens:
            out = expm(1j * s.evaluate([tt])[0]) @ out
        return out

    def fmat(tt):
        return np.diag(np.exp(-1j * w * tt * fr.tau)) @ fr.static

    e, v = np.linalg.eigh(model.h)
    w0, f0 = wmat(0.0), fmat(0.0)
    vals = []
    for tt in t:
        ue = v @ np.diag(np.exp(-1j * e * tt)) @ v.conj().T
        u = fmat(tt).conj().T @ wmat(tt).conj().T @ ue @ w0 @ f0
        vals.append(np.trace(u @ Iz() @ u.conj().T @ detection_operator()))
    return DETECTION_SIGN * np.array(vals)


def dump_diagnostics_csv(result: ContactResult, labels: Sequence[str], path) -> None:
    """Per-pass diagnostics as CSV rows: pass, order, operator label, coefficient (rad/s), residual norm.

    Coefficient rows carry the highest retained order of their pass; the
    ``term_norm`` rows list every nested-commutator term norm.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pass", "order", "operator", "coefficient_rad_s", "residual_norm"])
        for rec in result.records:
            resid = float(np.max(rec.offdiag_after))
            if rec.coefficients is not None:
                coefs = np.atleast_1d(np.real(rec.coefficients)).reshape(-1, len(labels))[0]
                for lab, c in zip(labels, coefs):
                    w.writerow([rec.pass_index, rec.highest_order, lab, repr(float(c)), repr(resid)])
            for n, tn in enumerate(rec.term_norms, start=1):
                w.writerow([rec.pass_index, n, "term_norm", "", repr(float(np.max(tn)))])


# extraction bases ---------------------------------------------------------


def regime1_basis(phase: float = 0.0) -> list[np.ndarray]:
    """CT_S, i T_AS and T20: the operators spanning the regime I effective Hamiltonian."""
    return [combo("CT_S", phase), 1j * combo("T_AS", phase), tensor(2, 0)]


def regime2_basis() -> list[np.ndarray]:
    """i T10/sqrt5, T20, i T30/sqrt5 in the phased tensor convention."""
    return [1j * phased_tensor(1, 0) / np.sqrt(5), tensor(2, 0), 1j * phased_tensor(3, 0) / np.sqrt(5)]
