import math

import numpy as np
import pytest

from conftest import W1, grid_us, rms
from quadfloquet import engines as en
from quadfloquet import powder as pw
from quadfloquet.params import ConfigurationError, quad_frequency

WQ2 = quad_frequency(2e6)


# Wigner matrices -------------------------------------------------------------


def test_reduced_d_examples():
    assert pw.reduced_d2(0.0) == pytest.approx(np.eye(5), abs=1e-14)
    for b in (0.3, np.pi / 2, 2.0):
        assert pw.reduced_d2(b)[2, 2] == pytest.approx((3 * np.cos(b) ** 2 - 1) / 2, abs=1e-14)
    assert pw.reduced_d2(np.pi / 2)[2, 2] == pytest.approx(-0.5, abs=1e-14)
    assert pw.reduced_d2(np.pi / 2)[0, 2] == pytest.approx(math.sqrt(3 / 8), abs=1e-14)
    assert pw.reduced_d2(np.pi / 2)[4, 2] == pytest.approx(math.sqrt(3 / 8), abs=1e-14)


def test_wigner_unitary():
    rng = np.random.default_rng(3)
    for a, b, g in rng.uniform(0, 2 * np.pi, size=(5, 3)):
        d = pw.wigner_D2(a, b, g)
        assert np.max(np.abs(d @ d.conj().T - np.eye(5))) < 1e-13


def test_wigner_composition():
    """Rotating about z then y composes like the group elements."""
    d1 = pw.wigner_D2(0.4, 0.0, 0.0)
    d2 = pw.wigner_D2(0.0, 0.9, 0.0)
    assert np.max(np.abs(d1 @ d2 - pw.wigner_D2(0.4, 0.9, 0.0))) < 1e-13


def test_oriented_splitting_examples():
    wq = 1.0e6
    assert pw.omega_q_oriented(wq, 0.0) == pytest.approx(wq)
    assert pw.omega_q_oriented(wq, 0.0, ml=(0.0, np.pi / 2, 0.0)) == pytest.approx(-wq / 2)
    assert pw.omega_q_oriented(wq, 0.5, ml=(0.0, np.pi / 2, 0.0)) == pytest.approx(-0.25 * wq)
    with pytest.raises(ConfigurationError):
        pw.omega_q_oriented(wq, 1.5)


def test_splitting_depends_only_on_beta_without_asymmetry():
    rng = np.random.default_rng(7)
    a, b, g = rng.uniform(0, 2 * np.pi, size=(3, 50))
    v = pw.omega_q_oriented(1.0, 0.0, ml=(a, b, g))
    assert np.max(np.abs(v - (3 * np.cos(b) ** 2 - 1) / 2)) < 1e-13


@pytest.mark.parametrize("eta", [0.0, 0.6, 1.0])
def test_isotropic_second_moment(eta):
    cset = pw.generate_crystal_set("zcw", 20000)
    rng = np.random.default_rng(1)
    gamma = rng.uniform(0, 2 * np.pi, len(cset))
    v = pw.omega_q_oriented(1.0, eta, ml=(cset.alpha, cset.beta, gamma))
    assert np.dot(cset.weights, v**2) == pytest.approx(0.2 + eta**2 / 15, rel=0.01)


# crystal sets ----------------------------------------------------------------


@pytest.mark.parametrize("scheme", pw.SCHEMES)
def test_sets_are_normalized_and_isotropic(scheme):
    cset = pw.generate_crystal_set(scheme, 10000)
    assert math.fsum(cset.weights) == pytest.approx(1.0, abs=1e-12)
    p2 = np.dot(cset.weights, (3 * np.cos(cset.beta) ** 2 - 1) / 2)
    assert abs(p2) < 1e-3
    assert np.all((cset.beta >= 0) & (cset.beta <= np.pi / 2))


def test_single_orientation_set():
    cset = pw.generate_crystal_set("zcw", 1)
    assert len(cset) == 1 and cset.orientations[0] == pw.Orientation(0.0, 0.0, 0.0, 1.0)


def test_grid_set_size():
    assert len(pw.generate_crystal_set("grid", 28656)) == 28656


def test_bad_set_requests():
    with pytest.raises(ConfigurationError):
        pw.generate_crystal_set("lebedev", 10)
    with pytest.raises(ConfigurationError):
        pw.generate_crystal_set("zcw", 0)
    with pytest.raises(ValueError):
        pw.CrystalSet([0.0], [0.0], [0.0], [0.0])


def test_crystal_file_round_trip(tmp_path):
    rng = np.random.default_rng(11)
    cset = pw.CrystalSet(*rng.uniform(0, 1, size=(4, 3)))
    path = tmp_path / "set.txt"
    pw.save_crystal_file(cset, path)
    again = pw.load_crystal_file(path)
    pw.save_crystal_file(again, tmp_path / "again.txt")
    assert path.read_text() == (tmp_path / "again.txt").read_text()
    assert np.allclose(again.beta, cset.beta, rtol=1e-12)


def test_crystal_file_without_gamma(tmp_path):
    path = tmp_path / "ab.txt"
    path.write_text("# alpha beta weight\n0 90 1\n45 30 3\n")
    cset = pw.load_crystal_file(path)
    assert np.all(cset.gamma == 0) and cset.weights == pytest.approx([0.25, 0.75])


@pytest.mark.parametrize(
    "text, match",
    [
        ("0 90\n", ":1:"),
        ("0 90 1\nx 1 1\n", ":2:"),
        ("count 3\n0 90 1\n", "count line"),
        ("# nothing\n", "no orientations"),
        ("0 90 0 -1\n", "non-negative"),
    ],
)
def test_crystal_file_errors(tmp_path, text, match):
    path = tmp_path / "bad.txt"
    path.write_text(text)
    with pytest.raises(pw.CrystalFileError, match=match):
        pw.load_crystal_file(path)


def test_large_generated_file_loads(tmp_path, grid_set):
    path = tmp_path / "grid.txt"
    pw.save_crystal_file(grid_set, path)
    assert len(pw.load_crystal_file(path)) == 28656


# classification --------------------------------------------------------------


def test_classification_examples(grid_set):
    low = pw.classify(grid_set, quad_frequency(2e5), W1)
    assert low.n_regime1 == 0 and low.fraction_regime2 == 1.0
    assert pw.classify(grid_set, quad_frequency(2e6), W1).fraction_regime1 * 100 == pytest.approx(90.95, abs=2)
    assert pw.classify(grid_set, quad_frequency(1e6), W1).fraction_regime1 * 100 == pytest.approx(81.64, abs=2)


def test_boundary_tie_goes_to_regime_one():
    assert pw.regime_tags([-1.0, 1.0, 0.999], 1.0).tolist() == [True, True, False]


def test_regime_two_fraction_falls_with_coupling(grid_set):
    fr = [pw.classify(grid_set, quad_frequency(cq), W1).fraction_regime2 for cq in np.linspace(1e5, 6e6, 25)]
    assert all(b <= a for a, b in zip(fr, fr[1:]))


def test_stronger_rf_populates_regime_two(grid_set):
    a = pw.classify(grid_set, WQ2, W1).n_regime2
    b = pw.classify(grid_set, WQ2, 2 * W1).n_regime2
    assert b > a


# averaging -------------------------------------------------------------------


def oracle_fn(phase=0.0):
    return en.parse_engine("oracle", W1, phase).batch


def test_single_orientation_average_is_single_crystal():
    t = grid_us(0, 200, 1)
    prof = pw.powder_average(oracle_fn(), pw.generate_crystal_set("grid", 1), t, WQ2)
    # the Wigner route reproduces omega_Q to rounding, not bit for bit
    assert np.max(np.abs(prof.values - oracle_fn()(np.array([WQ2]), t)[0])) < 1e-12


def test_two_orientations_average_to_mean():
    t = grid_us(0, 200, 1)
    cset = pw.CrystalSet([0.0, 0.0], [0.3, 1.1], [0.0, 0.0], [1.0, 1.0])
    v = pw.oriented_values(cset, WQ2)
    direct = oracle_fn()(v, t).mean(axis=0)
    assert np.max(np.abs(pw.powder_average(oracle_fn(), cset, t, WQ2).values - direct)) < 1e-15


def test_results_independent_of_workers():
    t = grid_us(0, 100, 1)
    cset = pw.generate_crystal_set("zcw", 3000)
    a = pw.powder_average(oracle_fn(), cset, t, WQ2, workers=1)
    b = pw.powder_average(oracle_fn(), cset, t, WQ2, workers=4)
    assert np.array_equal(a.values, b.values)


def test_weighted_sum_is_exact():
    vals = np.array([[1e16, 1.0], [1.0, 1.0], [-1e16, 1.0]], complex)
    out = pw.weighted_sum(vals, np.ones(3) / 3)
    assert out[0] == pytest.approx(1 / 3, rel=1e-15)


def test_hybrid_with_all_orientations_in_regime_two(grid_set):
    t = grid_us(0, 100, 1)
    eng = en.parse_engine("hybrid", W1)
    wq = quad_frequency(2e5)
    hyb = pw.hybrid_profile(*eng.regime_fns, grid_set, t, wq, W1)
    pure = pw.powder_average(en.floquet_batch("II", en.HYBRID_PASSES["II"], W1, 0.0), grid_set, t, wq)
    assert hyb.classification.n_regime1 == 0
    assert np.array_equal(hyb.profile.values, pure.values)


def test_hybrid_tracks_oracle_powder(grid_set):
    t = grid_us(0, 200, 1)
    eng = en.parse_engine("hybrid", W1)
    wq = quad_frequency(1e6)
    hyb = pw.hybrid_profile(*eng.regime_fns, grid_set, t, wq, W1).profile
    ref = pw.powder_average(oracle_fn(), grid_set, t, wq)
    assert rms(hyb.values, ref.values) < 0.05


def test_oracle_powder_decays(grid_set):
    from quadfloquet.analysis import lobes

    t = grid_us(0, 8000, 1)
    prof = pw.powder_average(oracle_fn(), grid_set, t, quad_frequency(4e6))
    found = lobes(t, prof.amplitudes)
    assert abs(found[-1].extremum) / abs(found[0].extremum) < 0.8
