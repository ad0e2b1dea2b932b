import csv

import numpy as np
import pytest
from scipy.linalg import expm

from conftest import W1, divergence_warnings, grid_us, rms, signal
from quadfloquet import floquet as fl
from quadfloquet import regime1 as r1
from quadfloquet import regime2 as r2
from quadfloquet.params import quad_frequency
from quadfloquet.tensors import Iz, combo, tensor


def wq_for_theta(theta):
    return np.sqrt(3.0) * W1 / theta


def wq_for_xi(xi):
    return 4 * W1 * xi / np.sqrt(3.0)


# embedding ------------------------------------------------------------------


def test_embed_products_and_adjoint():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    n = 6
    prod = fl.embed(a, 1, n).to_dense(n) @ fl.embed(b, 2, n).to_dense(n)
    # interior block row n=0 (index n) holds A B at offset 3, i.e. column n-3
    row = slice(4 * n, 4 * n + 4)
    assert np.allclose(prod[row, 4 * (n - 3) : 4 * (n - 3) + 4], a @ b)
    others = [k for k in range(2 * n + 1) if k != n - 3]
    assert all(np.allclose(prod[row, 4 * k : 4 * k + 4], 0) for k in others)
    adj = fl.embed(a, 2, n).adjoint()
    assert np.allclose(adj.blocks, fl.embed(a.conj().T, -2, n).blocks)
    with pytest.raises(ValueError):
        fl.embed(a, 2 * n + 1, n)


def test_ladder_represents_number_operator():
    n = 3
    f = fl.FloquetMatrix.zeros(2 * n, ladder=5.0)
    dense = f.to_dense(n)
    assert np.allclose(np.diag(dense).real, np.repeat(-5.0 * np.arange(-n, n + 1), 4))


def test_symbol_commutator_matches_dense():
    n = 10
    h = fl.build_floquet_regime1(W1, 0.2, quad_frequency(1e6), 0.0, n_f=n)
    s = r1.first_generator(W1, 0.2, quad_frequency(1e6), n_f=n)
    dense = s.to_dense(n) @ h.to_dense(n) - h.to_dense(n) @ s.to_dense(n)
    sym = fl.commutator(s, h).to_dense(n)
    c = slice(4 * (n - 3), 4 * (n + 4))
    assert np.max(np.abs(dense[c, c] - sym[c, c])) < 1e-9 * np.abs(dense).max()


# Hamiltonians ---------------------------------------------------------------


def test_regime1_hamiltonian_structure():
    wq = quad_frequency(2e6)
    h = fl.build_floquet_regime1(W1, 0.4, wq)
    assert h.is_hermitian()
    assert sorted(h.active_offsets().tolist()) == [-1, 0, 1]
    assert np.allclose(h.block(1), -(W1 / 2) * combo("ST_S^(r)", 0.4))
    assert np.allclose(h.block(0), -W1 * combo("CT_S", 0.4))
    bare = fl.build_floquet_regime1(0.0, 0.0, wq, 0.0)
    assert bare.active_offsets().size == 0 and bare.ladder == wq


def test_regime1_bare_spectrum_is_ladder():
    wq = quad_frequency(2e6)
    n = 4
    ev = np.sort(np.linalg.eigvalsh(fl.build_floquet_regime1(0.0, 0.0, wq, 1e5, n_f=n).to_dense(n)))
    shifted = np.sort(np.concatenate([ev + wq, ev - wq]))
    # every interior eigenvalue reappears one ladder step away
    inner = ev[(ev > ev.min() + 1.5 * wq) & (ev < ev.max() - 1.5 * wq)]
    assert all(np.min(np.abs(shifted - x)) < 1e-6 for x in inner)


def test_regime2_hamiltonian_matches_direct_construction():
    wq = quad_frequency(1e3)
    h = fl.build_floquet_regime2(W1, 0.3, wq)
    direct = fl.regime2_direct_blocks(W1, 0.3, wq)
    for m, blk in direct.items():
        assert np.max(np.abs(h.block(m) - blk)) < 1e-12 * wq
    assert h.is_hermitian()
    assert fl.build_floquet_regime2(W1, 0.3, 0.0).active_offsets().size == 0


# generators -----------------------------------------------------------------


def test_regime1_generator_matches_closed_form():
    wq = quad_frequency(2e6)
    h = fl.build_floquet_regime1(W1, 0.7, wq)
    h0, h1, _ = fl.split_hamiltonian(h, ("ST",), "diagonal")
    s = fl.solve_generator(h0, h1)
    ref = r1.first_generator(W1, 0.7, wq)
    assert np.max(np.abs(s.blocks - ref.blocks)) < 1e-12
    assert fl.generator_residual(s, h0, h1) < 1e-10
    assert s.is_hermitian()


def test_regime2_generator_matches_closed_form():
    wq = quad_frequency(5e4)
    h = fl.build_floquet_regime2(W1, 0.7, wq)
    h0, h1, _ = fl.split_hamiltonian(h, ("DQ",), "ladder")
    s = fl.solve_generator(h0, h1)
    ref = r2.first_generator(W1, 0.7, wq)
    assert np.max(np.abs(s.blocks - ref.blocks)) < 1e-12
    assert fl.generator_residual(s, h0, h1) < 1e-10


def test_zero_coupling_gives_zero_generator():
    h0 = fl.FloquetMatrix.zeros(8, ladder=1.0)
    s = fl.solve_generator(h0, fl.FloquetMatrix.zeros(8))
    assert s.norm() == 0


def test_degenerate_denominator_raises():
    h0 = fl.FloquetMatrix.zeros(4, ladder=1.0)
    h0.set_block(0, np.diag([1.0, 0.0, 0.0, 0.0]))
    h1 = fl.FloquetMatrix.zeros(4)
    blk = np.zeros((4, 4), complex)
    blk[0, 1] = 0.1
    h1.set_block(1, blk)
    h1.set_block(-1, blk.conj().T)
    with pytest.raises(fl.DegeneracyError, match="offset"):
        fl.solve_generator(h0, h1)


def test_solve_rejects_offdiagonal_h0():
    with pytest.raises(ValueError):
        fl.solve_generator(fl.embed(np.eye(4), 1, 4), fl.FloquetMatrix.zeros(8))


# BCH ------------------------------------------------------------------------


def test_bch_zero_generator_is_identity():
    h = fl.build_floquet_regime1(W1, 0.0, quad_frequency(2e6))
    out, info = fl.bch_transform(h, fl.FloquetMatrix.zeros(h.cap))
    assert np.array_equal(out.blocks, h.blocks)


def test_bch_matches_dense_exponential():
    n = 8
    wq = wq_for_theta(0.173205)
    h = fl.build_floquet_regime1(W1, 0.3, wq, 0.0, n_f=n)
    s = r1.first_generator(W1, 0.3, wq, n_f=n)
    out, info = fl.bch_transform(h, s, max_order=30)
    hd, sd = h.to_dense(n), s.to_dense(n)
    ref = expm(1j * sd) @ hd @ expm(-1j * sd)
    c = slice(4 * (n - 2), 4 * (n + 3))
    assert np.max(np.abs(out.to_dense(n)[c, c] - ref[c, c])) < 1e-9 * np.abs(hd).max()
    assert info.highest_order <= 30 and info.converged


def test_split_recursion_matches_full_series():
    wq = quad_frequency(1e6)
    h = fl.build_floquet_regime1(W1, 0.0, wq).without_zero_block()
    h.ladder = np.asarray(wq)
    h0, h1, _ = fl.split_hamiltonian(h, ("ST",), "ladder")
    s = fl.solve_generator(h0, h1)
    full, _ = fl.bch_transform(h, s)
    split = h0
    for _, d, od in fl.bch_split_terms(h1, s, 40):
        split = split + d + od
    assert np.max(np.abs((split - full).blocks)) < 1e-9 * W1


def test_order_three_cap_gives_quadratic_closed_forms():
    for theta in (0.05, 0.17, 0.43):
        wq = wq_for_theta(theta)
        new, *_ = fl.apply_pass(fl.build_floquet_regime1(W1, 0.0, wq), fl.Pass(3, ("ST",), "diagonal"))
        c = fl.project(new.block(0), fl.regime1_basis()).real
        ref = np.array(r1.first_pass_closed(W1, wq, 0.0, quadratic=True))
        assert np.max(np.abs(c - ref) / np.abs(ref)) < 1e-12
        wq2 = wq_for_xi(theta)
        new, *_ = fl.apply_pass(fl.build_floquet_regime2(W1, 0.0, wq2), fl.Pass(3, ("DQ",), "ladder"))
        c = fl.project(new.block(0), fl.regime2_basis()).real
        ref = np.array(r2.first_pass_closed(W1, wq2, quadratic=True))
        assert np.max(np.abs(c - ref) / np.abs(ref)) < 1e-12


def test_divergence_warning_out_of_regime():
    wq = quad_frequency(5e4)
    h = fl.build_floquet_regime1(W1, 0.0, wq)
    (_, info), n = divergence_warnings(lambda: fl.bch_transform(h, r1.first_generator(W1, 0.0, wq)))
    assert n >= 1 and np.all(info.diverging)


def test_no_warning_in_regime():
    wq = quad_frequency(2e6)
    h = fl.build_floquet_regime1(W1, 0.0, wq)
    _, n = divergence_warnings(lambda: fl.bch_transform(h, r1.first_generator(W1, 0.0, wq)))
    assert n == 0


# contact sequence -----------------------------------------------------------


def test_contact_sequence_example_values():
    wq = quad_frequency(2e6)
    res = fl.contact_sequence(fl.build_floquet_regime1(W1, 0.0, wq), [fl.Pass(None, ("ST",), "diagonal")], basis=fl.regime1_basis())
    g_ct, g_tq, _ = res.records[0].coefficients.real
    assert g_ct == pytest.approx(-6.23617e5, rel=1e-5)
    # the printed example is 4.70047e3; the closed form itself evaluates to 4700.62
    assert g_tq == pytest.approx(4.70047e3, rel=1e-4)
    ref = r1.first_pass_closed(W1, wq, 0.0)
    assert g_ct == pytest.approx(ref[0], rel=1e-8) and g_tq == pytest.approx(ref[1], rel=1e-8)


def test_zero_rf_leaves_only_offset():
    res = fl.contact_sequence(fl.build_floquet_regime1(0.0, 0.0, quad_frequency(2e6), 3e4), fl.default_schedule("I", 2), basis=fl.regime1_basis())
    assert np.allclose(res.records[-1].coefficients.real, [0.0, 0.0, 3e4], atol=1e-9)


@pytest.mark.parametrize("theta", [0.1, 0.3, 0.5])
def test_zq_series_matches_closed_form(theta):
    wq = wq_for_theta(theta)
    res = fl.contact_sequence(fl.build_floquet_regime1(W1, 0.0, wq), [fl.Pass(None, ("ST",), "diagonal")], basis=fl.regime1_basis())
    g_zq = res.records[0].coefficients.real[2]
    assert g_zq == pytest.approx(wq * (1 - np.cos(theta) - theta * np.sin(theta)), rel=1e-8)


def test_residual_shrinks_every_pass():
    res = fl.contact_sequence(fl.build_floquet_regime1(W1, 0.0, quad_frequency(5e5)), fl.default_schedule("I", 4))
    for rec in res.records:
        assert np.all(rec.offdiag_after < rec.offdiag_before)
        assert rec.generator_residual < 1e-10


def test_coefficients_stable_under_fourier_window():
    def coeffs(n_f):
        h = fl.build_floquet_regime1(W1, 0.3, quad_frequency(1e6), 0.0, n_f=n_f)
        return fl.contact_sequence(h, fl.default_schedule("I", 3), basis=fl.regime1_basis(0.3)).records[-1].coefficients

    a, b = coeffs(fl.DEFAULT_NF), coeffs(fl.DEFAULT_NF + 4)
    assert np.max(np.abs(a - b)) < 1e-9 * W1


def test_effective_levels_are_quasi_energies():
    wq = quad_frequency(2e6)
    res = fl.contact_sequence(fl.build_floquet_regime1(W1, 0.3, wq), fl.default_schedule("I", 4))
    levels = np.linalg.eigvalsh(res.effective)
    n = 24
    spectrum = np.linalg.eigvalsh(fl.build_floquet_regime1(W1, 0.3, wq, 0.0, n_f=n).to_dense(n))
    assert max(np.min(np.abs(spectrum - e)) for e in levels) < 1e-9 * W1


def test_transformed_hamiltonian_stays_hermitian():
    res = fl.contact_sequence(fl.build_floquet_regime2(W1, 0.5, quad_frequency(5e4)), fl.default_schedule("II", 3))
    assert res.hamiltonian.is_hermitian()
    assert all(s.is_hermitian() for s in res.generators)


def test_default_schedule_shapes():
    sched = fl.default_schedule("I", 4, [2, None])
    assert [p.order for p in sched] == [2, None, None, None]
    assert sched[0].families == ("ST",) and sched[3].h0 == "block"
    with pytest.raises(ValueError):
        fl.default_schedule("III", 2)
    with pytest.raises(ValueError):
        fl.default_schedule("I", 1, [1, 2])


def test_diagnostics_csv(tmp_path):
    res = fl.contact_sequence(fl.build_floquet_regime1(W1, 0.0, quad_frequency(1e6)), fl.default_schedule("I", 2), basis=fl.regime1_basis())
    path = tmp_path / "diag.csv"
    fl.dump_diagnostics_csv(res, ["G_CT", "G_TQ", "G_ZQ"], path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["pass", "order", "operator", "coefficient_rad_s", "residual_norm"]
    assert {r[2] for r in rows[1:]} >= {"G_CT", "G_TQ", "G_ZQ", "term_norm"}


# observables and signals -----------------------------------------------------


def test_transform_observables_identity_and_norm():
    wq = quad_frequency(1e6)
    rho = fl.framed_operator(Iz(), fl.frame_regime1(), wq, 32)
    assert np.array_equal(fl.transform_observables([], rho).blocks, rho.blocks)
    s = r1.first_generator(W1, 0.2, wq)
    out = fl.transform_observables([s], rho)
    for t in (0.0, 1.3e-6, 7.7e-6):
        assert np.linalg.norm(out.evaluate([t])[0]) == pytest.approx(np.sqrt(5.0), abs=1e-10)


def test_zero_hamiltonian_gives_zero_signal():
    model = fl.EffectiveModel(np.zeros((4, 4), complex), [], fl.frame_regime1(), quad_frequency(1e6))
    assert np.max(np.abs(fl.effective_signal(model, grid_us(0, 50, 1)))) == 0.0


def test_fourier_assembly_matches_direct_exponentials():
    p = r1.ExperimentParams.from_hz(5e5, 1e5, phase_deg=10.0)
    model = r1.case_model(p, "IVb")
    t = grid_us(0, 60, 3)
    assert np.max(np.abs(fl.effective_signal(model, t) - fl.effective_signal_direct(model, t))) < 1e-10
    model2 = r2.case_model(r2.ExperimentParams.from_hz(5e4, 1e5, phase_deg=10.0), "II")
    assert np.max(np.abs(fl.effective_signal(model2, t) - fl.effective_signal_direct(model2, t))) < 1e-10


def test_one_pass_engine_at_strong_coupling():
    t = grid_us(0, 500, 1)
    assert rms(signal("floquet:I:1", 4e6, t), signal("oracle", 4e6, t)) < 0.02


def test_three_pass_engine_at_500khz():
    t = grid_us(0, 500, 1)
    assert rms(signal("floquet:I:3", 5e5, t), signal("oracle", 5e5, t)) < 1e-3


@pytest.mark.xfail(strict=True, reason="3-pass RMS at the regime boundary is 0.073 over 0-500 us; see the decisions ledger")
def test_three_pass_engine_at_200khz_example():
    t = grid_us(0, 500, 1)
    assert rms(signal("floquet:I:3", 2e5, t), signal("oracle", 2e5, t)) < 0.05


def test_more_passes_converge_at_200khz():
    t = grid_us(0, 500, 1)
    ref = signal("oracle", 2e5, t)
    assert rms(signal("floquet:I:5", 2e5, t), ref) < 1e-3
