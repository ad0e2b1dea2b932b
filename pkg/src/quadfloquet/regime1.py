"""Strong-coupling engine: the frame rotating at the quadrupolar frequency.

Valid when |Omega_Q| >= omega1. Coefficients are expressed through
theta = sqrt(3) omega1 / Omega_Q. The effective Hamiltonian is

    h = G_CT CT_S + G_TQ (i T_AS) + G_ZQ T20

and the first generator is S1 = C_ST {ST_S^(r) at m=+1 - ST_S^(cr) at m=-1}
with C_ST = -i omega1 / (2 Omega_Q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import floquet as fl
from .params import ConfigurationError, ExcitationProfile, ExperimentParams
from .tensors import combo, tensor

CASES = ("I", "II", "IIIa", "IIIb", "IVa", "IVb")

# Scale of the simplified post-second-transformation expression, fitted by
# least squares against the 3-pass engine at C_Q = 500 kHz, omega1/2pi =
# 100 kHz over 0-500 us (see tests/test_regime1.py::test_s2_amplitude_frozen).
S2_AMPLITUDE = 0.02359819148832513


@dataclass(frozen=True)
class Regime1Coefficients:
    case: str
    theta: np.ndarray
    g_ct: np.ndarray
    g_tq: np.ndarray
    g_zq: np.ndarray
    g_st: np.ndarray
    g_dq: np.ndarray

    def as_dict(self) -> dict[str, np.ndarray]:
        return {"G_CT": self.g_ct, "G_TQ": self.g_tq, "G_ZQ": self.g_zq, "G_ST": self.g_st, "G_DQ": self.g_dq}


def _check_case(case: str) -> str:
    if case not in CASES:
        raise ConfigurationError(f"unknown regime I case {case!r}; choose from {CASES}")
    return case


def _check_wq(wq) -> np.ndarray:
    wq = np.asarray(wq, dtype=float)
    if np.any(wq == 0):
        raise ConfigurationError("Omega_Q = 0 makes the quadrupolar frame singular; use the regime II engines")
    return wq


def theta(omega1, omega_q_eff) -> np.ndarray:
    return np.sqrt(3.0) * np.asarray(omega1, float) / _check_wq(omega_q_eff)


def first_pass_closed(omega1, omega_q_eff, delta=0.0, quadratic: bool = False):
    """(G_CT, G_TQ, G_ZQ) after the first transformation.

    ``quadratic`` keeps the leading theta^2 corrections only.
    """
    w1 = np.asarray(omega1, float)
    wq = _check_wq(omega_q_eff)
    th = np.sqrt(3.0) * w1 / wq
    if quadratic:
        return -w1 + w1 * th**2 / 4, w1 * th**2 / 4, delta - wq * th**2 / 2
    c, s = np.cos(th), np.sin(th)
    return -(w1 / 2) * (c + 1), -(w1 / 2) * (c - 1), delta + wq * (1 - c - th * s)


def first_pass_residual_closed(omega1, omega_q_eff, truncated: bool = False):
    """(G_ST, G_DQ): the m = +-1 couplings left after the first transformation.

    ``truncated`` keeps terms through third order in the perturbation
    (omega1 theta^2 and omega1 theta).
    """
    w1 = np.asarray(omega1, float)
    th = theta(w1, omega_q_eff)
    if truncated:
        return (w1 / 2) * th**2 / 3, -w1 * th / (2 * np.sqrt(2))
    # sin(th)/th - cos(th) with a series near zero to avoid cancellation
    small = np.abs(th) < 1e-3
    ths = np.where(small, 1.0, th)
    bracket = np.where(small, th**2 / 3 - th**4 / 30, np.sin(ths) / ths - np.cos(th))
    return (w1 / 2) * bracket, -(w1 / (2 * np.sqrt(2))) * np.sin(th)


def first_generator(omega1, phase: float, omega_q_eff, n_f: int = fl.DEFAULT_NF) -> fl.FloquetMatrix:
    """S1 with C_ST = -i omega1 / (2 Omega_Q)."""
    w1 = np.asarray(omega1, float)
    wq = _check_wq(omega_q_eff)
    w1, wq = np.broadcast_arrays(w1, wq)
    c = (-1j * w1 / (2 * wq))[..., None, None]
    s = fl.FloquetMatrix.zeros(2 * n_f, w1.shape, omega=wq)
    s.set_block(1, c * combo("ST_S^(r)", phase))
    s.set_block(-1, -c * combo("ST_S^(cr)", phase))
    return s


def first_pass_series(omega1, phase: float, omega_q_eff, delta=0.0, warn: bool = True) -> fl.SeriesInfo:
    """Run the nested-commutator series that the closed forms resum.

    The closed forms hide divergence, so the series is evaluated to flag it:
    out of regime (theta > 1) the term norms grow for several orders and a
    ``DivergenceWarning`` is emitted.
    """
    h = fl.build_floquet_regime1(omega1, phase, omega_q_eff, delta)
    _, info = fl.bch_transform(h, first_generator(omega1, phase, omega_q_eff), warn=warn)
    return info


def _effective_block(phase, g_ct, g_tq, g_zq) -> np.ndarray:
    b = fl.regime1_basis(phase)
    e = lambda g: np.asarray(g, float)[..., None, None]
    return e(g_ct) * b[0] + e(g_tq) * b[1] + e(g_zq) * b[2]


def _second_stage(omega1, phase, omega_q_eff, delta, diag, resid, order):
    """Fold the residual ST/DQ couplings with a second generator.

    Returns (transformed Floquet Hamiltonian, S2).
    """
    wq = _check_wq(omega_q_eff)
    g_st, g_dq = resid
    h = fl.FloquetMatrix.zeros(2 * fl.DEFAULT_NF, np.shape(wq), ladder=wq, omega=wq)
    e = lambda g: np.asarray(g, float)[..., None, None]
    h.set_block(0, _effective_block(phase, *diag))
    h.set_block(1, e(g_st) * combo("ST_S^(r)", phase) + e(g_dq) * combo("D_S^(r)", phase))
    h.set_block(-1, e(g_st) * combo("ST_S^(cr)", phase) + e(g_dq) * combo("D_S^(cr)", phase))
    new, s2, *_ = fl.apply_pass(h, fl.Pass(order, ("ST", "DQ"), "diagonal"))
    return new, s2


def regime1_coeffs(params: ExperimentParams, case: str = "II") -> Regime1Coefficients:
    """Effective-Hamiltonian coefficients for one of the six regime I cases.

    Cases I and II are closed forms (quadratic and resummed). Cases III and IV
    add a second transformation that is evaluated numerically: III starts from
    the case I diagonal terms and third-order ST/DQ residuals, IV from the
    case II terms and the resummed residuals; suffix ``a`` keeps the second
    transformation to second order, ``b`` sums it fully.
    """
    _check_case(case)
    w1, wq, dl = params.omega1, params.omega_q_eff, params.delta
    th = theta(w1, wq)
    first_pass_series(w1, params.phase, wq, dl)
    quad = case in ("I", "IIIa", "IIIb")
    diag = first_pass_closed(w1, wq, dl, quadratic=quad)
    resid = first_pass_residual_closed(w1, wq, truncated=quad)
    if case in ("I", "II"):
        return Regime1Coefficients(case, th, *diag, *resid)
    order = 2 if case.endswith("a") else None
    new, _ = _second_stage(w1, params.phase, wq, dl, diag, resid, order)
    c = fl.project(new.block(0), fl.regime1_basis(params.phase)).real
    return Regime1Coefficients(case, th, c[..., 0], c[..., 1], c[..., 2], *resid)


def case_model(params: ExperimentParams, case: str = "II") -> fl.EffectiveModel:
    """Effective Hamiltonian plus generators for signal assembly."""
    _check_case(case)
    w1, wq, dl, ph = params.omega1, params.omega_q_eff, params.delta, params.phase
    first_pass_series(w1, ph, wq, dl)
    quad = case in ("I", "IIIa", "IIIb")
    diag = first_pass_closed(w1, wq, dl, quadratic=quad)
    gens = [first_generator(w1, ph, wq)]
    if case in ("I", "II"):
        h = _effective_block(ph, *diag)
    else:
        resid = first_pass_residual_closed(w1, wq, truncated=quad)
        new, s2 = _second_stage(w1, ph, wq, dl, diag, resid, 2 if case.endswith("a") else None)
        h = new.block(0)
        gens.append(s2)
    return fl.EffectiveModel(h, gens, fl.frame_regime1(), np.asarray(wq, float))


def eq36_signal(omega1, phase: float, omega_q, theta_, g_ct, g_tq, g_zq, times) -> np.ndarray:
    """Closed-form transformed-detection signal (complex, phase factor included).

    phi^3 {-1/4 J1 J2 sin(2 G_TQ t) + 1/4 J-1 J-2 sin(2 G_CT t)
           - 1/2 sin^2(theta) sin(omega1 t) cos((G_ZQ - omega_Q) t)},  J_n = cos(theta) + n.
    Parameters broadcast against a trailing time axis.
    """
    t = np.asarray(times, float)
    col = lambda x: np.asarray(x, float)[..., None]
    c = np.cos(col(theta_))
    s2 = np.sin(col(theta_)) ** 2
    val = (
        -0.25 * (c + 1) * (c + 2) * np.sin(2 * col(g_tq) * t)
        + 0.25 * (c - 1) * (c - 2) * np.sin(2 * col(g_ct) * t)
        - 0.5 * s2 * np.sin(col(omega1) * t) * np.cos((col(g_zq) - col(omega_q)) * t)
    )
    return np.exp(-3j * phase) * val


def _profile(times, values, **meta) -> ExcitationProfile:
    meta.setdefault("regime", "I")
    return ExcitationProfile(np.asarray(times, float), values, meta)


def tq_signal_s1(params: ExperimentParams, case: str, times, transformed_detection: bool = True) -> ExcitationProfile:
    """TQ profile after one transformation (case I or II).

    With ``transformed_detection=False`` the initial state and detection
    operator are left untransformed and the closed form collapses to
    -(3/2) phi^3 sin(3 omega1^3 t / (2 Omega_Q^2)).
    """
    if case not in ("I", "II"):
        raise ConfigurationError("tq_signal_s1 covers cases I and II; use tq_signal for III/IV")
    co = regime1_coeffs(params, case)
    if transformed_detection:
        v = eq36_signal(params.omega1, params.phase, params.omega_q, co.theta, co.g_ct, co.g_tq, co.g_zq, times)
    else:
        v = _untransformed(params.omega1, params.phase, params.omega_q_eff, times)
    return _profile(times, v, engine=f"regime1:case{case}", case=case, transformed_detection=transformed_detection, orders=[1])


def _untransformed(omega1, phase, omega_q_eff, times) -> np.ndarray:
    t = np.asarray(times, float)
    w1 = np.asarray(omega1, float)[..., None]
    wq = _check_wq(omega_q_eff)[..., None]
    return -1.5 * np.exp(-3j * phase) * np.sin(3 * w1**3 * t / (2 * wq**2))


def tq_signal(params: ExperimentParams, case: str, times) -> ExcitationProfile:
    """TQ profile for any case: closed form for I/II, assembled numerically for III/IV."""
    _check_case(case)
    if case in ("I", "II"):
        return tq_signal_s1(params, case, times)
    model = case_model(params, case)
    v = fl.effective_signal(model, times)
    return _profile(times, v, engine=f"regime1:case{case}", case=case, orders=[1, 2 if case.endswith("a") else "full"])


def strong_coupling_limit(params: ExperimentParams, times) -> ExcitationProfile:
    """-(3/2) phi^3 sin(3 omega1^3 t / (2 Omega_Q^2))."""
    v = _untransformed(params.omega1, params.phase, params.omega_q_eff, times)
    return _profile(times, v, engine="regime1:limit")


def s2_simplified_pattern(omega1, phase, omega_q, omega_q_eff, delta, times) -> np.ndarray:
    """Unscaled four-term leading form after the second transformation."""
    t = np.asarray(times, float)
    col = lambda x: np.asarray(x, float)[..., None]
    w1, wq, wqe, dl = col(omega1), col(omega_q), col(omega_q_eff), col(delta)
    if np.any(wqe == 0):
        raise ConfigurationError("Omega_Q = 0 makes the quadrupolar frame singular")
    th_tq = 3 * w1**3 * t / (2 * wqe**2)
    th_ct = -2 * w1 * t + th_tq
    th_rf = w1 * t
    th_zq = (dl - wq) * t - 3 * w1**2 * t / (2 * wqe)
    val = -0.25 * np.sin(th_tq) + 0.25 * np.sin(th_ct) - 1.5 * np.cos(th_rf) * np.sin(th_zq) + np.sin(th_rf) * np.cos(th_zq)
    return np.exp(-3j * phase) * val


def tq_signal_s2_simplified(params: ExperimentParams, times, amplitude: float = S2_AMPLITUDE) -> ExcitationProfile:
    v = amplitude * s2_simplified_pattern(params.omega1, params.phase, params.omega_q, params.omega_q_eff, params.delta, times)
    return _profile(times, v, engine="regime1:s2simplified", amplitude=amplitude)
