import numpy as np
import pytest

from hypothesis import given, seed, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from oscaudit.euler import EulerAngles, FitSettings, compose_standard
from oscaudit.linalg3 import SymMat3, make_rng
from oscaudit.mij_appendix import (CONFIRMED, DEVIATING, mij_terms, mij_printed, mij_compare, mij_audit,
                                   mij_zero_constraint_probe)

SAMPLE = EulerAngles(0.3, 0.4, 0.5)
angle = st.floats(-3.1, 3.1)


def test_zero_angles_reduce_to_gamma(example):
    assert_array_equal(mij_printed(example, EulerAngles(0.0, 0.0, 0.0)), example.matrix)


def test_m33_at_quarter_turn():
    g = SymMat3.from_parts((1.5, 2.0, 3.0), (0.2, 0.3, 0.4))
    printed = mij_printed(g, EulerAngles(0.0, np.pi / 2, 0.7))
    assert printed[2, 2] == pytest.approx(1.5, abs=1e-15)


def test_m11_coupling_term_deviates(example):
    report = mij_compare(example, SAMPLE)
    assert not report.confirmed[0, 0]
    # 2 sin(theta) cos(psi) cos(2 phi) (sin(phi) - sin(psi)) K23
    expected = 2 * np.sin(0.4) * np.cos(0.5) * np.cos(0.6) * (np.sin(0.3) - np.sin(0.5)) * 3.0
    assert report.product_rt_g_r[0, 0] - report.printed[0, 0] == pytest.approx(expected, rel=1e-9)
    mask = np.ones((3, 3), dtype=bool)
    mask[0, 0] = False
    assert report.confirmed[mask].all()


def test_m11_agrees_without_k23():
    g = SymMat3.from_parts((1.0, 2.0, 3.0), (0.5, -0.7, 0.0))
    assert mij_compare(g, SAMPLE).confirmed.all()


@seed(23)
@settings(max_examples=100, deadline=None)
@given(phi=angle, theta=angle, psi=angle,
       values=st.lists(st.floats(-10.0, 10.0), min_size=6, max_size=6))
def test_off_diagonal_entries_match_conjugation_hypothesis(phi, theta, psi, values):
    g = SymMat3(*values)
    r = compose_standard(EulerAngles(phi, theta, psi))
    printed, oracle = mij_printed(g, EulerAngles(phi, theta, psi)), r.T @ g.matrix @ r
    mask = ~np.eye(3, dtype=bool)
    assert np.max(np.abs(printed - oracle)[mask]) <= 1e-12 * (1.0 + g.norm)
    assert np.max(np.abs(printed - printed.T)) <= 1e-12 * (1.0 + g.norm)


def test_terms_broadcast(rng):
    diagonal, couplings = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    angles = rng.uniform(-1.0, 1.0, size=(4, 3))
    stacked = mij_terms(diagonal, couplings, angles)
    assert stacked.shape == (4, 3, 3)
    for k in range(4):
        g = SymMat3.from_parts(diagonal[k], couplings[k])
        assert_allclose(stacked[k], mij_printed(g, EulerAngles(*angles[k])), atol=1e-15)


def test_audit_table():
    audit = mij_audit(make_rng(42), 10_000, 10.0, 1e-12)
    table = {row['entry']: row for row in audit['table']}
    assert len(table) == 9
    assert table['M11']['status'] == DEVIATING
    assert table['M11']['max_relative_deviation'] > 1e-3
    for name in ('M12', 'M13', 'M21', 'M22', 'M23', 'M31', 'M32', 'M33'):
        assert table[name]['status'] == CONFIRMED
        assert table[name]['confirmed_samples'] == 10_000
        assert table[name]['matches_rt_g_r'] == 10_000
    assert audit['symmetry_dev_max'] <= 1e-12 * 20
    assert audit['oracle_symmetry_max'] <= 1e-12


def test_audit_is_reproducible():
    assert mij_audit(make_rng(42), 200, 10.0) == mij_audit(make_rng(42), 200, 10.0)


def test_zero_constraint_reaches_zero_with_printed_formulas(example):
    search = mij_zero_constraint_probe(example, FitSettings(seed=4))
    assert not search['uncoupled']
    assert search['printed_off_norm'] <= 1e-4
    assert search['euler_fit_off_norm'] <= 1e-8 * example.norm


def test_zero_constraint_equal_couplings():
    search = mij_zero_constraint_probe(SymMat3.from_parts((1.0, 1.0, 1.0), (0.5, 0.5, 0.5)), FitSettings(seed=4))
    assert search['printed_minimum'] >= 0.0
    assert search['printed_off_norm'] <= 1e-4
    assert search['euler_fit_off_norm'] <= 1e-8


def test_zero_constraint_uncoupled():
    search = mij_zero_constraint_probe(SymMat3.from_parts((1.0, 2.0, 3.0), (0.0, 0.0, 0.0)))
    assert search['uncoupled']
    assert search['printed_minimum'] == 0.0
    assert search['starts_used'] == 1


@pytest.mark.parametrize('factor', [0.5, 4.0])
def test_deviation_scales_exactly_by_powers_of_two(example, factor):
    base = mij_compare(example, SAMPLE).per_entry_dev
    scaled = mij_compare(SymMat3.from_matrix(factor * example.matrix), SAMPLE).per_entry_dev
    assert_allclose(scaled, factor * base, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize('factor', [3.0, 0.1, 1e3])
def test_m11_deviation_is_linear(example, factor):
    base = mij_compare(example, SAMPLE).per_entry_dev[0, 0]
    scaled = mij_compare(SymMat3.from_matrix(factor * example.matrix), SAMPLE).per_entry_dev[0, 0]
    assert base > 1e-3
    assert scaled == pytest.approx(factor * base, rel=1e-12)
