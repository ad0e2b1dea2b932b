import numpy as np
import pytest

from conftest import W1, divergence_warnings, grid_us, rms, signal
from quadfloquet import regime2 as r2
from quadfloquet.params import ConfigurationError, ExperimentParams, quad_frequency


def params(cq_hz, phase_deg=0.0):
    return ExperimentParams.from_hz(cq_hz, 1e5, phase_deg=phase_deg)


def test_xi_examples():
    assert r2.xi(W1, quad_frequency(1e3)) == pytest.approx(2.16506e-3, rel=1e-5)
    assert r2.xi(W1, quad_frequency(2e5)) == pytest.approx(0.433013, rel=1e-6)


def test_first_pass_coefficients():
    co = r2.regime2_coeffs(params(1e3), "II")
    wq = quad_frequency(1e3)
    assert co.g_2r == pytest.approx(1570.79 * np.cos(co.xi), rel=1e-5)
    x = float(co.xi)
    series = x / 2 - x**3 / (4 * 2) + x**5 / (6 * 24)
    assert co.g_1r == pytest.approx(np.sqrt(3) * wq * series, rel=1e-10)
    big = r2.regime2_coeffs(params(2e5), "II")
    x = float(big.xi)
    assert big.g_1r == pytest.approx(np.sqrt(3) * quad_frequency(2e5) * (np.cos(x) + x * np.sin(x) - 1) / x, rel=1e-12)
    assert big.g_tr == pytest.approx(-(quad_frequency(2e5) / (2 * np.sqrt(2))) * np.sin(x), rel=1e-12)


@pytest.mark.parametrize("case", ["I", "II"])
def test_g1_is_twice_g3_closed(case):
    co = r2.regime2_coeffs(params(3e4), case)
    assert co.g_1r == pytest.approx(2 * co.g_3r, rel=1e-12)


def test_quadratic_forms_are_truncations():
    for cq in (1e3, 1e4, 5e4):
        q = r2.first_pass_closed(W1, quad_frequency(cq), quadratic=True)
        f = r2.first_pass_closed(W1, quad_frequency(cq))
        x = float(r2.xi(W1, quad_frequency(cq)))
        assert all(abs(a - b) <= quad_frequency(cq) * x**3 for a, b in zip(q, f))


def test_no_quadrupole_gives_zero_coefficients():
    co = r2.regime2_coeffs(ExperimentParams(0.0, W1), "II")
    assert all(np.all(v == 0) for v in co.as_dict().values())


def test_zero_rf_rejected():
    with pytest.raises(ConfigurationError):
        r2.regime2_coeffs(ExperimentParams(1e4, 0.0), "II")
    with pytest.raises(ConfigurationError):
        r2.xi(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        r2.regime2_coeffs(params(1e4), "IX")


def test_formula_starts_at_zero_and_null_vanishes():
    t = grid_us(0, 100, 0.5)
    assert r2.tq_signal_regime2(params(5e4), t).amplitudes[0] == 0.0
    null = r2.tq_signal_regime2(ExperimentParams(0.0, W1), t)
    assert np.max(np.abs(null.values)) == 0.0


def test_weak_coupling_limit_example():
    v = r2.weak_coupling_limit(params(1e3), np.array([0.0, 2.5e-6])).amplitudes
    assert v[0] == 0.0
    assert v[1] == pytest.approx(5.783e-6, rel=1e-3)
    zero = r2.weak_coupling_limit(ExperimentParams(0.0, W1), grid_us(0, 50, 1))
    assert np.max(np.abs(zero.values)) == 0.0


def test_weak_coupling_envelope_period():
    """sin^2(Omega_Q t / 4) first peaks at t = 2 pi / Omega_Q (66.67 us at 30 kHz)."""
    wq = quad_frequency(3e4)
    t = grid_us(0, 100, 0.01)
    env = np.sin(wq * t / 4) ** 2
    assert t[np.argmax(env)] == pytest.approx(2 * np.pi / wq, abs=1e-8)
    assert 2 * np.pi / wq == pytest.approx(66.667e-6, rel=1e-4)


@pytest.mark.parametrize("cq", [1e3, 3e3, 1e4, 2e4])
def test_formula_reduces_to_weak_coupling_limit(cq):
    t = grid_us(0, 200, 0.01)
    p = params(cq)
    assert float(r2.xi(p.omega1, p.omega_q)) < 0.05
    f = r2.tq_signal_regime2(p, t).amplitudes
    lim = r2.weak_coupling_limit(p, t).amplitudes
    # the xi^2 phase corrections accumulate over the window, hence 3 %
    assert np.linalg.norm(f - lim) / np.linalg.norm(lim) < 0.03


def test_excitation_grows_with_coupling():
    t = grid_us(0, 50, 0.25)
    peak = {cq: np.max(np.abs(signal("oracle", cq, t).real)) for cq in (1e3, 5e4)}
    assert peak[5e4] > peak[1e3]
    peak = {cq: np.max(np.abs(r2.tq_signal(params(cq), "II", t).amplitudes)) for cq in (1e3, 5e4)}
    assert peak[5e4] > peak[1e3]


@pytest.mark.parametrize("case", r2.CASES)
def test_phase_shift_property(case):
    t = grid_us(0, 100, 1)
    a = r2.tq_signal(params(4e4), case, t).values
    b = r2.tq_signal(params(4e4, 40.0), case, t).values
    assert np.max(np.abs(b - np.exp(-3j * np.deg2rad(40.0)) * a)) < 1e-10
    fa = r2.tq_signal_regime2(params(4e4), t).values
    fb = r2.tq_signal_regime2(params(4e4, 40.0), t).values
    assert np.max(np.abs(fb - np.exp(-3j * np.deg2rad(40.0)) * fa)) < 1e-12


def test_case_two_tracks_oracle_in_regime():
    t = grid_us(0, 100, 0.25)
    assert rms(signal("regime2:caseII", 5e4, t), signal("oracle", 5e4, t)) < 0.02


def test_second_stage_refines_case_two():
    t = grid_us(0, 100, 0.25)
    ref = signal("oracle", 1e5, t)
    assert rms(signal("regime2:caseIVb", 1e5, t), ref) <= rms(signal("regime2:caseII", 1e5, t), ref)


def test_closed_forms_equal_one_numeric_pass():
    from quadfloquet.engines import parse_engine

    t = grid_us(0, 100, 0.5)
    wq = np.array([quad_frequency(6e4)])
    capped = parse_engine("floquet:II:1", W1, 0.0, [3]).batch(wq, t)[0]
    assert rms(signal("regime2:caseI", 6e4, t), capped) < 1e-12


def test_out_of_regime_warns():
    t = grid_us(0, 20, 1)
    # factorially damped terms only start growing for xi of several units
    _, n = divergence_warnings(lambda: signal("regime2:caseII", 3e6, t))
    assert n >= 1
    _, n = divergence_warnings(lambda: signal("regime2:caseII", 5e4, t))
    assert n == 0


@pytest.mark.xfail(strict=True, reason="four-term expression has RMS 0.21 against the oracle at 50 kHz over 0-100 us; see the decisions ledger")
def test_formula_matches_oracle_example():
    t = grid_us(0, 100, 0.25)
    assert rms(signal("regime2:formula", 5e4, t), signal("oracle", 5e4, t)) < 0.02


@pytest.mark.xfail(strict=True, reason="the oracle gives -3.59e-6 at 2.5 us, not the limit's 5.78e-6; see the decisions ledger")
def test_oracle_agrees_with_weak_coupling_limit_example():
    v = signal("oracle", 1e3, np.array([2.5e-6])).real[0]
    assert abs(v - 5.783e-6) < 1e-7
