"""Crystallite orientations, regime classification and powder averaging."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path
from typing import Callable

import numpy as np

from .params import ConfigurationError, ExcitationProfile

GOLDEN_FRACTION = (math.sqrt(5.0) - 1.0) / 2.0
SCHEMES = ("zcw", "repulsion", "grid")


class RegimeTag(Enum):
    REGIME_I = "RegimeI"
    REGIME_II = "RegimeII"


@dataclass(frozen=True)
class Orientation:
    alpha: float
    beta: float
    gamma: float = 0.0
    weight: float = 1.0


@dataclass
class CrystalSet:
    """Orientation angles (radians) and normalized weights stored as arrays."""

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    weights: np.ndarray
    source: str = ""

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(x, float)) for x in (self.alpha, self.beta, self.gamma, self.weights)]
        if arrs[0].size == 0:
            raise ValueError("a crystal set needs at least one orientation")
        if len({a.size for a in arrs}) != 1:
            raise ValueError("angle and weight arrays differ in length")
        w = arrs[3]
        if not np.all(np.isfinite(w)) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be finite, non-negative and not all zero")
        self.alpha, self.beta, self.gamma = arrs[:3]
        self.weights = w / math.fsum(w)

    def __len__(self) -> int:
        return self.alpha.size

    @property
    def orientations(self) -> list[Orientation]:
        return [Orientation(*map(float, row)) for row in zip(self.alpha, self.beta, self.gamma, self.weights)]

    @classmethod
    def from_orientations(cls, items, source: str = "") -> CrystalSet:
        items = list(items)
        return cls(*(np.array([getattr(o, k) for o in items], float) for k in ("alpha", "beta", "gamma", "weight")), source=source)


# Wigner matrices ----------------------------------------------------------


@lru_cache(maxsize=1)
def _jy2():
    # spin-2 Jy in the basis q = -2..2
    q = np.arange(-2, 3)
    jp = np.zeros((5, 5))
    for i in range(4):
        jp[i + 1, i] = math.sqrt(6 - q[i] * (q[i] + 1))
    jy = (jp - jp.T) / 2j
    e, v = np.linalg.eigh(jy)
    return e, v


def reduced_d2(beta) -> np.ndarray:
    """d^2_{q,q'}(beta) = <q| exp(-i beta Jy) |q'>, rows and columns ordered q = -2..2."""
    e, v = _jy2()
    b = np.asarray(beta, float)[..., None]
    d = (v * np.exp(-1j * b * e)[..., None, :]) @ v.conj().T
    return d.real


def wigner_D2(alpha, beta, gamma) -> np.ndarray:
    """D^2_{q,q'} = exp(-i q alpha) d^2_{q,q'}(beta) exp(-i q' gamma); index q + 2."""
    q = np.arange(-2, 3)
    a = np.exp(-1j * np.asarray(alpha, float)[..., None] * q)
    g = np.exp(-1j * np.asarray(gamma, float)[..., None] * q)
    return a[..., :, None] * reduced_d2(beta) * g[..., None, :]


def omega_q_oriented(omega_q: float, eta: float, pm=(0.0, 0.0, 0.0), ml=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Orientation-dependent splitting omega_Q {D_00 + eta/sqrt6 (D_-2,0 + D_2,0)} of the PAS-to-lab rotation.

    ``pm`` and ``ml`` are Euler-angle triples (radians); the ``ml`` entries may be arrays.
    """
    if not 0.0 <= eta <= 1.0:
        raise ConfigurationError(f"eta must lie in [0, 1], got {eta}")
    d_pm = wigner_D2(*pm)
    d_ml = wigner_D2(*ml)
    col = d_ml[..., :, 2]  # D_{q1,0}(ML)
    d_pl = np.einsum("qk,...k->...q", d_pm, col) if d_pm.ndim == 2 else np.einsum("...qk,...k->...q", d_pm, col)
    val = omega_q * (d_pl[..., 2] + eta / math.sqrt(6.0) * (d_pl[..., 0] + d_pl[..., 4]))
    scale = max(abs(omega_q), 1.0)
    if np.any(np.abs(val.imag) > 1e-9 * scale):
        raise ArithmeticError("oriented quadrupolar frequency came out complex")
    return val.real


# crystal sets -------------------------------------------------------------


def _grid_shape(count: int) -> tuple[int, int]:
    """(n_beta, n_alpha): n_beta is the smallest divisor of count not below sqrt(count)."""
    root = math.isqrt(count)
    for nb in range(root, count + 1):
        if nb * nb >= count and count % nb == 0:
            return nb, count // nb
    return count, 1


def generate_crystal_set(scheme: str, count: int) -> CrystalSet:
    """Deterministic hemisphere coverage.

    ``zcw``: Fibonacci lattice, equal weights (cos beta uniform, alpha stepped
    by the golden fraction). ``repulsion``: generalized spiral with equal
    weights. ``grid``: midpoint grid uniform in beta with sin(beta) weights.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"unsupported crystal-set scheme {scheme!r}; choose from {SCHEMES}")
    if count < 1:
        raise ConfigurationError("count must be at least 1")
    src = f"{scheme}:{count}"
    if count == 1:
        return CrystalSet([0.0], [0.0], [0.0], [1.0], source=src)
    j = np.arange(count)
    if scheme == "zcw":
        z = 1.0 - (j + 0.5) / count
        beta = np.arccos(z)
        alpha = 2 * np.pi * np.mod(j * GOLDEN_FRACTION, 1.0)
        w = np.ones(count)
    elif scheme == "repulsion":
        z = 1.0 - (j + 0.5) / count
        beta = np.arccos(z)
        step = 3.6 / np.sqrt(2.0 * count * np.maximum(1.0 - z * z, 1e-300))
        step[0] = 0.0
        alpha = np.mod(np.cumsum(step), 2 * np.pi)
        w = np.ones(count)
    else:
        nb, na = _grid_shape(count)
        b = (np.arange(nb) + 0.5) * (np.pi / 2) / nb
        a = np.arange(na) * 2 * np.pi / na
        beta = np.repeat(b, na)
        alpha = np.tile(a, nb)
        w = np.sin(beta)
    return CrystalSet(alpha, beta, np.zeros(count), w, source=src)


def _fmt(x: float) -> str:
    return format(float(x), ".13g")


def save_crystal_file(cset: CrystalSet, path) -> None:
    """Write ``count N`` then ``alpha_deg beta_deg gamma_deg weight`` lines."""
    lines = [f"count {len(cset)}"]
    for a, b, g, w in zip(np.degrees(cset.alpha), np.degrees(cset.beta), np.degrees(cset.gamma), cset.weights):
        lines.append(f"{_fmt(a)} {_fmt(b)} {_fmt(g)} {_fmt(w)}")
    Path(path).write_text("\n".join(lines) + "\n")


class CrystalFileError(ValueError):
    pass


def load_crystal_file(path) -> CrystalSet:
    rows = []
    declared = None
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0].lower() == "count":
            if declared is not None or rows or len(parts) != 2:
                raise CrystalFileError(f"{path}:{lineno}: misplaced or malformed count line")
            try:
                declared = int(parts[1])
            except ValueError:
                raise CrystalFileError(f"{path}:{lineno}: count is not an integer") from None
            continue
        if len(parts) not in (3, 4):
            raise CrystalFileError(f"{path}:{lineno}: expected 'alpha beta [gamma] weight', got {len(parts)} fields")
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise CrystalFileError(f"{path}:{lineno}: non-numeric field") from None
        if len(vals) == 3:
            vals = [vals[0], vals[1], 0.0, vals[2]]
        if not all(math.isfinite(v) for v in vals) or vals[3] < 0:
            raise CrystalFileError(f"{path}:{lineno}: angles and weight must be finite, weight non-negative")
        rows.append(vals)
    if not rows:
        raise CrystalFileError(f"{path}: no orientations found")
    if declared is not None and declared != len(rows):
        raise CrystalFileError(f"{path}: count line says {declared} but {len(rows)} orientations follow")
    arr = np.array(rows)
    return CrystalSet(np.radians(arr[:, 0]), np.radians(arr[:, 1]), np.radians(arr[:, 2]), arr[:, 3], source=str(path))


# classification -----------------------------------------------------------


def regime_tags(omega_q_values, omega1: float) -> np.ndarray:
    """True where an orientation belongs to regime I (|omega_Q^(abg)| >= omega1)."""
    return np.abs(np.asarray(omega_q_values, float)) >= omega1


@dataclass(frozen=True)
class Classification:
    n_regime1: int
    n_regime2: int
    weight_regime1: float

    @property
    def count(self) -> int:
        return self.n_regime1 + self.n_regime2

    @property
    def fraction_regime1(self) -> float:
        return self.n_regime1 / self.count

    @property
    def fraction_regime2(self) -> float:
        return self.n_regime2 / self.count

    @property
    def weight_regime2(self) -> float:
        return 1.0 - self.weight_regime1

    def counts(self) -> dict[RegimeTag, int]:
        return {RegimeTag.REGIME_I: self.n_regime1, RegimeTag.REGIME_II: self.n_regime2}


def oriented_values(cset: CrystalSet, omega_q: float, eta: float = 0.0, pm=(0.0, 0.0, 0.0)) -> np.ndarray:
    return omega_q_oriented(omega_q, eta, pm, (cset.alpha, cset.beta, cset.gamma))


def classify(cset: CrystalSet, omega_q: float, omega1: float, eta: float = 0.0, pm=(0.0, 0.0, 0.0)) -> Classification:
    """Orientation counts per regime, plus the weight carried by regime I."""
    tags = regime_tags(oriented_values(cset, omega_q, eta, pm), omega1)
    n1 = int(tags.sum())
    return Classification(n1, len(cset) - n1, math.fsum(cset.weights[tags]))


# averaging ----------------------------------------------------------------

BatchFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def weighted_sum(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """sum_i w_i v_i(t) per column, in index order with exact (fsum) accumulation."""
    values = np.asarray(values)
    prod = weights[:, None] * values
    out = np.empty(values.shape[1], complex)
    for k in range(values.shape[1]):
        col = prod[:, k]
        out[k] = complex(math.fsum(col.real), math.fsum(col.imag))
    return out


def _group(values: np.ndarray, weights: np.ndarray):
    """Unique values (sorted) and their summed weights."""
    uniq, inv = np.unique(values, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(uniq.size + 1))
    gw = np.array([math.fsum(weights[order[bounds[i] : bounds[i + 1]]]) for i in range(uniq.size)])
    return uniq, gw


def evaluate_unique(fn: BatchFn, values: np.ndarray, times: np.ndarray, workers: int = 1, chunk: int = 256) -> np.ndarray:
    """fn over ``values`` in chunks, optionally on threads; results stay in input order."""
    pieces = [values[i : i + chunk] for i in range(0, values.size, chunk)]
    if workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            out = list(ex.map(lambda v: fn(v, times), pieces))
    else:
        out = [fn(v, times) for v in pieces]
    return np.concatenate(out, axis=0) if out else np.zeros((0, times.size), complex)


@dataclass
class PowderResult:
    profile: ExcitationProfile
    classification: Classification | None = None
    extras: dict = field(default_factory=dict)


def powder_average(fn: BatchFn, cset: CrystalSet, times, omega_q: float, eta: float = 0.0, pm=(0.0, 0.0, 0.0), workers: int = 1, metadata: dict | None = None) -> ExcitationProfile:
    """Weighted average of ``fn(omega_q_values, times)`` over the crystal set.

    Orientations sharing a splitting are evaluated once; the reduction runs in
    a fixed order with exact summation, so results do not depend on ``workers``.
    """
    t = np.asarray(times, float)
    vals = oriented_values(cset, omega_q, eta, pm)
    uniq, gw = _group(vals, cset.weights)
    sig = evaluate_unique(fn, uniq, t, workers)
    meta = {"crystal_source": cset.source, "orientations": len(cset), "unique_splittings": int(uniq.size), "eta": eta}
    meta.update(metadata or {})
    return ExcitationProfile(t, weighted_sum(sig, gw), meta)


def hybrid_profile(fn_regime1: BatchFn, fn_regime2: BatchFn, cset: CrystalSet, times, omega_q: float, omega1: float, eta: float = 0.0, pm=(0.0, 0.0, 0.0), workers: int = 1, metadata: dict | None = None) -> PowderResult:
    """Powder profile with each orientation sent to the engine of its regime."""
    t = np.asarray(times, float)
    vals = oriented_values(cset, omega_q, eta, pm)
    tags = regime_tags(vals, omega1)
    uniq, gw = _group(vals, cset.weights)
    utag = regime_tags(uniq, omega1)
    sig = np.zeros((uniq.size, t.size), complex)
    if utag.any():
        sig[utag] = evaluate_unique(fn_regime1, uniq[utag], t, workers)
    if (~utag).any():
        sig[~utag] = evaluate_unique(fn_regime2, uniq[~utag], t, workers)
    n1 = int(tags.sum())
    cls = Classification(n1, len(cset) - n1, math.fsum(cset.weights[tags]))
    meta = {
        "crystal_source": cset.source,
        "orientations": len(cset),
        "unique_splittings": int(uniq.size),
        "eta": eta,
        "n_regime1": cls.n_regime1,
        "n_regime2": cls.n_regime2,
        "weight_regime1": cls.weight_regime1,
    }
    meta.update(metadata or {})
    return PowderResult(ExcitationProfile(t, weighted_sum(sig, gw), meta), cls)
