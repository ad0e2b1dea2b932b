"""Weak-coupling engine: the frame rotating at omega1 about the tilted RF axis.

Valid when omega1 >= |Omega_Q|. With xi = sqrt(3) Omega_Q / (4 omega1) the
effective Hamiltonian after the first transformation is

    h = G_1R (i T10 / sqrt5) + G_2R T20 + G_3R (i T30 / sqrt5)

and the first generator is S1 = C_DR {phi^2 T22 at m=+2 - phi^-2 T2-2 at m=-2}
with C_DR = -i sqrt(3/2) Omega_Q / (4 omega1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import floquet as fl
from .params import ConfigurationError, ExcitationProfile, ExperimentParams
from .tensors import tensor

CASES = ("I", "II", "IIIa", "IIIb", "IVa", "IVb")

# Scale of the four-term expression: matching its satellite sidebands to the
# xi -> 0 closed form fixes it at exactly one once the omega_Q = 0 pattern
# is subtracted.
FORMULA_AMPLITUDE = 1.0


@dataclass(frozen=True)
class Regime2Coefficients:
    case: str
    xi: np.ndarray
    g_1r: np.ndarray
    g_2r: np.ndarray
    g_3r: np.ndarray
    g_dr: np.ndarray
    g_tr: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"G_1R": self.g_1r, "G_2R": self.g_2r, "G_3R": self.g_3r, "G_DR": self.g_dr, "G_TR": self.g_tr}


def _check_w1(omega1) -> np.ndarray:
    w1 = np.asarray(omega1, float)
    if np.any(w1 == 0):
        raise ConfigurationError("omega1 = 0 makes the tilted RF frame singular; use the regime I engines")
    return w1


def xi(omega1, omega_q_eff) -> np.ndarray:
    return np.sqrt(3.0) * np.asarray(omega_q_eff, float) / (4 * _check_w1(omega1))


def _series(x, closed, taylor):
    small = np.abs(x) < 1e-3
    xs = np.where(small, 1.0, x)
    return np.where(small, taylor(x), closed(xs))


def first_pass_closed(omega1, omega_q_eff, quadratic: bool = False):
    """(G_1R, G_2R, G_3R) after the first transformation."""
    wq = np.asarray(omega_q_eff, float)
    x = xi(omega1, wq)
    if quadratic:
        g1 = np.sqrt(3.0) * wq * x / 2
        return g1, wq / 2 - wq * x**2 / 4, g1 / 2
    # (cos x + x sin x - 1) / x = x/2 - x^3/8 + ...
    br = _series(x, lambda y: (np.cos(y) + y * np.sin(y) - 1) / y, lambda y: y / 2 - y**3 / 8 + y**5 / 144)
    g1 = np.sqrt(3.0) * wq * br
    return g1, (wq / 2) * np.cos(x), g1 / 2


def first_pass_residual_closed(omega1, omega_q_eff, truncated: bool = False):
    """(G_DR, G_TR): the m = +-2 couplings left after the first transformation."""
    wq = np.asarray(omega_q_eff, float)
    x = xi(omega1, wq)
    k = np.sqrt(3.0) * wq / (2 * np.sqrt(2))
    if truncated:
        return k * x**2 / 3, -(wq / (2 * np.sqrt(2))) * x
    br = _series(x, lambda y: np.sin(y) / y - np.cos(y), lambda y: y**2 / 3 - y**4 / 30)
    return k * br, -(wq / (2 * np.sqrt(2))) * np.sin(x)


def first_generator(omega1, phase: float, omega_q_eff, n_f: int = fl.DEFAULT_NF) -> fl.FloquetMatrix:
    w1 = _check_w1(omega1)
    w1, wq = np.broadcast_arrays(w1, np.asarray(omega_q_eff, float))
    c = (-1j * np.sqrt(1.5) * wq / (4 * w1))[..., None, None]
    phi = np.exp(-1j * phase)
    s = fl.FloquetMatrix.zeros(2 * n_f, w1.shape, omega=w1)
    s.set_block(2, c * phi**2 * tensor(2, 2))
    s.set_block(-2, -c * phi**-2 * tensor(2, -2))
    return s


def first_pass_series(omega1, phase: float, omega_q_eff, warn: bool = True) -> fl.SeriesInfo:
    """Nested-commutator series behind the closed forms; warns when it diverges (xi > 1)."""
    h = fl.build_floquet_regime2(omega1, phase, omega_q_eff)
    _, info = fl.bch_transform(h, first_generator(omega1, phase, omega_q_eff), warn=warn)
    return info


def _effective_block(g1, g2, g3) -> np.ndarray:
    b = fl.regime2_basis()
    e = lambda g: np.asarray(g, float)[..., None, None]
    return e(g1) * b[0] + e(g2) * b[1] + e(g3) * b[2]


def _second_stage(omega1, phase, omega_q_eff, diag, resid, order):
    w1 = _check_w1(omega1)
    w1b = np.broadcast_to(w1, np.shape(omega_q_eff)) if np.ndim(omega_q_eff) else w1
    g_dr, g_tr = resid
    phi = np.exp(-1j * phase)
    h = fl.FloquetMatrix.zeros(2 * fl.DEFAULT_NF, np.shape(w1b), ladder=w1b, omega=w1b)
    e = lambda g: np.asarray(g, float)[..., None, None]
    up = e(g_dr) * tensor(2, 2) + e(g_tr) * tensor(3, 2)
    h.set_block(0, _effective_block(*diag))
    h.set_block(2, phi**2 * up)
    h.set_block(-2, phi**-2 * np.conj(np.swapaxes(up, -1, -2)))
    new, s2, *_ = fl.apply_pass(h, fl.Pass(order, ("DQ",), "diagonal"))
    return new, s2


def regime2_coeffs(params: ExperimentParams, case: str = "II") -> Regime2Coefficients:
    """Effective-Hamiltonian coefficients for the regime II cases.

    Case suffixes mirror regime I: III/IV add a numerically evaluated second
    transformation of the residual m = +-2 couplings.
    """
    if case not in CASES:
        raise ConfigurationError(f"unknown regime II case {case!r}; choose from {CASES}")
    w1, wq = params.omega1, params.omega_q_eff
    x = xi(w1, wq)
    first_pass_series(w1, params.phase, wq)
    quad = case in ("I", "IIIa", "IIIb")
    diag = first_pass_closed(w1, wq, quadratic=quad)
    resid = first_pass_residual_closed(w1, wq, truncated=quad)
    if case in ("I", "II"):
        return Regime2Coefficients(case, x, *diag, *resid)
    new, _ = _second_stage(w1, params.phase, wq, diag, resid, 2 if case.endswith("a") else None)
    c = fl.project(new.block(0), fl.regime2_basis()).real
    return Regime2Coefficients(case, x, c[..., 0], c[..., 1], c[..., 2], *resid)


def case_model(params: ExperimentParams, case: str = "II") -> fl.EffectiveModel:
    if case not in CASES:
        raise ConfigurationError(f"unknown regime II case {case!r}; choose from {CASES}")
    w1, wq, ph = params.omega1, params.omega_q_eff, params.phase
    first_pass_series(w1, ph, wq)
    quad = case in ("I", "IIIa", "IIIb")
    diag = first_pass_closed(w1, wq, quadratic=quad)
    gens = [first_generator(w1, ph, wq)]
    if case in ("I", "II"):
        h = _effective_block(*diag)
    else:
        resid = first_pass_residual_closed(w1, wq, truncated=quad)
        new, s2 = _second_stage(w1, ph, wq, diag, resid, 2 if case.endswith("a") else None)
        h = new.block(0)
        gens.append(s2)
    return fl.EffectiveModel(h, gens, fl.frame_regime2(ph), np.asarray(w1, float))


def _profile(times, values, **meta) -> ExcitationProfile:
    meta.setdefault("regime", "II")
    return ExcitationProfile(np.asarray(times, float), values, meta)


def tq_signal(params: ExperimentParams, case: str, times, transformed_detection: bool = True) -> ExcitationProfile:
    """TQ profile from the case's effective Hamiltonian, back-rotated out of the tilted frame."""
    model = case_model(params, case)
    v = fl.effective_signal(model, times, transform=transformed_detection)
    return _profile(times, v, engine=f"regime2:case{case}", case=case, detection_back_rotated=True)


def formula_pattern(omega1, omega_q_eff, times) -> np.ndarray:
    """Unscaled four-term expression (real); parameters broadcast against time."""
    t = np.asarray(times, float)
    w1 = _check_w1(omega1)[..., None] if np.ndim(omega1) else _check_w1(omega1)
    wq = np.asarray(omega_q_eff, float)[..., None] if np.ndim(omega_q_eff) else float(omega_q_eff)
    th_tq = 3 * w1 * t + 3 * wq**2 * t / (16 * w1)
    th_ct = w1 * t + 3 * wq**2 * t / (16 * w1)
    d = (wq / 2) * (1 - 3 * wq**2 / (32 * w1**2)) * t
    return -np.sin(th_tq) / 8 + np.sin(th_ct) / 8 - 3 / 8 * np.sin(w1 * t + d) - 3 / 8 * np.sin(w1 * t - d)


def formula_signal(omega1, phase: float, omega_q_eff, times, amplitude: float = FORMULA_AMPLITUDE) -> np.ndarray:
    """Calibrated expression: amplitude * (pattern(Omega_Q) - pattern(0)) * phi^3."""
    null = formula_pattern(omega1, 0.0 * np.asarray(omega_q_eff, float), times)
    return amplitude * np.exp(-3j * phase) * (formula_pattern(omega1, omega_q_eff, times) - null)


def tq_signal_regime2(params: ExperimentParams, times, amplitude: float = FORMULA_AMPLITUDE) -> ExcitationProfile:
    v = formula_signal(params.omega1, params.phase, params.omega_q_eff, times, amplitude)
    return _profile(times, v, engine="regime2:formula", amplitude=amplitude, null_subtracted=True)


def weak_coupling_values(omega1, phase: float, omega_q_eff, times) -> np.ndarray:
    t = np.asarray(times, float)
    w1 = np.asarray(omega1, float)[..., None] if np.ndim(omega1) else float(omega1)
    wq = np.asarray(omega_q_eff, float)[..., None] if np.ndim(omega_q_eff) else float(omega_q_eff)
    return 1.5 * np.exp(-3j * phase) * np.sin(w1 * t) * np.sin(wq * t / 4) ** 2


def weak_coupling_limit(params: ExperimentParams, times) -> ExcitationProfile:
    """(3/2) phi^3 sin(omega1 t) sin^2(Omega_Q t / 4)."""
    return _profile(times, weak_coupling_values(params.omega1, params.phase, params.omega_q_eff, times), engine="regime2:limit")
