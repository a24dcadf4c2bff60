import io
import math

import numpy as np
import pytest

from renewtail.dist import LatticePmf, TwoSidedExponential
from renewtail.errors import CertificationError, RegimeError
from renewtail.oracle import (
    identity_residual,
    left_tail_direct,
    left_tail_from_q,
    renewal_table,
    window_mass,
    wy09_ratio,
)
from renewtail.tilt import solve_tilt, tilt_step_law

from reference import srw_left_tail


# -- tables -----------------------------------------------------------------

def test_srw_closed_form_entries(srw_tables):
    tab_p, _ = srw_tables
    assert tab_p[-1] == pytest.approx(15 / 14, abs=1e-12)
    for k in range(1, 30):
        assert tab_p[-k] == pytest.approx((3 / 7) ** k / 0.4, abs=1e-12)


def test_srw_positive_side_constant(srw):
    tab = renewal_table(srw, 1.0, -5, 30)
    assert tab[5] == pytest.approx(2.5, abs=1e-12)
    assert tab[0] == pytest.approx(2.5, abs=1e-12)
    assert tab.u0 >= 1.0


def test_defective_total_mass(pg4, tp_pg4):
    tab = renewal_table(pg4, tp_pg4.rho, -400, 400)
    assert math.fsum(tab.u) == pytest.approx(1 / (1 - tp_pg4.rho), rel=1e-10)


def test_rejects_continuous_laws(tse):
    with pytest.raises(RegimeError):
        renewal_table(tse, 1.0, -5, 5)


def test_step_budget_is_enforced(srw):
    with pytest.raises(CertificationError):
        renewal_table(srw, 1.0, -10, 10, max_steps=5)


def _renewal_residual(dist, tab):
    ks = tab.ks
    kmin, kmax = -60, 60
    q = dist.pmf(np.arange(kmin, kmax + 1))
    # (u * q)_k = sum_j u_{k-j} q_j, only where every needed u is inside the table
    inner = ks[(ks - kmax >= tab.k_lo) & (ks - kmin <= tab.k_hi)]
    res = []
    for k in inner:
        conv = math.fsum(tab[k - j] * q[j - kmin] for j in range(kmin, kmax + 1))
        rhs = (1.0 if k == 0 else 0.0) + tab.w * conv
        res.append((abs(tab[k] - rhs), tab.bound_at(k)))
    return res


@pytest.mark.parametrize("which", ["srw", "pg4"])
def test_renewal_identity(which, srw, pg4, tp_pg4):
    dist, w = (srw, 1.0) if which == "srw" else (pg4, tp_pg4.rho)
    tab = renewal_table(dist, w, -150, 150)
    res = _renewal_residual(dist, tab)
    assert res
    for gap, bound in res:
        # neighbours' bounds enter through the convolution; allow a small multiple
        assert gap <= 3 * bound + 1e-15


def test_bounds_stay_within_tolerance_for_any_window(srw):
    tol = 1e-13
    for k_lo in (-20, -40, -80):
        tab = renewal_table(srw, 1.0, k_lo, 0, tol=tol)
        rounding = 2.3e-16 * tab.n_steps_used * tab.u
        assert np.all(tab.bounds <= tol * tab.u + rounding + 1e-250 + 1e-16)


def test_bounds_tighten_with_tolerance(pg4):
    loose = renewal_table(pg4, 1.0, -30, 0, tol=1e-6)
    tight = renewal_table(pg4, 1.0, -30, 0, tol=1e-12)
    assert tight.trunc_bound < loose.trunc_bound
    assert np.allclose(loose.u, tight.u, rtol=1e-5)


def test_window_envelope(srw, pg4):
    for dist in (srw, pg4):
        tab = renewal_table(dist, 1.0, -40, 80)
        alpha, beta = tab.window_envelope()
        for x in range(-40, 60, 7):
            for h in (1, 3, 10, 20):
                assert window_mass(tab, x, h) <= alpha * h + beta + 1e-12


def test_csv_export(srw):
    tab = renewal_table(srw, 1.0, -3, 2)
    buf = io.StringIO()
    tab.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "k,dk,u_k,trunc_bound"
    assert len(lines) == 7
    k, dk, u, b = lines[1].split(",")
    assert (int(k), float(dk)) == (-3, -3.0)
    assert float(u) == tab[-3]


# -- window_mass ------------------------------------------------------------

def test_blackwell_srw_q(srw_tables):
    _, tab_q = srw_tables
    assert window_mass(tab_q, 39.5, 1.0) == pytest.approx(2.5, abs=1e-6)


def test_window_between_lattice_points_is_empty(srw_tables):
    _, tab_q = srw_tables
    assert window_mass(tab_q, 10.2, 0.5) == 0.0


def test_window_additivity(srw_tables):
    _, tab_q = srw_tables
    a = window_mass(tab_q, 3.0, 4.0) + window_mass(tab_q, 7.0, 6.5)
    assert a == pytest.approx(window_mass(tab_q, 3.0, 10.5), rel=1e-15)


def test_window_includes_time_zero_atom(srw_tables):
    tab_p, _ = srw_tables
    assert window_mass(tab_p, -0.5, 1.0) == tab_p[0]
    assert tab_p[0] >= 1.0


def test_window_out_of_range(srw_tables):
    _, tab_q = srw_tables
    with pytest.raises(IndexError):
        window_mass(tab_q, 118.0, 5.0)


def test_blackwell_pg4_tilted_defective_mass_decays(pg4_tables):
    # rho < 1: H_rho has finite mass, so windows far out carry almost nothing
    _, tab_q = pg4_tables
    assert window_mass(tab_q, 150.0, 5.0) < 1e-6


# -- left tails -------------------------------------------------------------

@pytest.mark.parametrize("x", [0, 1, 2, 5, 13, 40])
def test_left_tail_direct_srw(srw_tables, x):
    tab_p, _ = srw_tables
    assert left_tail_direct(tab_p, x).value == pytest.approx(srw_left_tail(0.7, x), rel=1e-11)


def test_left_tail_direct_named_values(srw_tables):
    tab_p, _ = srw_tables
    assert left_tail_direct(tab_p, 0).value == pytest.approx(1.875, rel=1e-12)
    assert left_tail_direct(tab_p, 1).value == pytest.approx(0.8035714285714286, rel=1e-12)
    assert left_tail_direct(tab_p, 5).value == pytest.approx(1.875 * (3 / 7) ** 5, rel=1e-12)


def test_left_tail_direct_non_integer_x(srw_tables):
    tab_p, _ = srw_tables
    assert left_tail_direct(tab_p, 4.5).value == pytest.approx(srw_left_tail(0.7, 4), rel=1e-11)


def test_left_tail_direct_below_window(srw_tables):
    tab_p, _ = srw_tables
    with pytest.raises(IndexError):
        left_tail_direct(tab_p, 200)


def test_left_tail_direct_uncertifiable(srw):
    short = renewal_table(srw, 1.0, -3, 0)
    with pytest.raises(CertificationError):
        left_tail_direct(short, 2)


def test_left_tail_from_q_srw(srw_tables, tp_srw):
    _, tab_q = srw_tables
    v = left_tail_from_q(tab_q, tp_srw, 20).value
    assert v == pytest.approx(srw_left_tail(0.7, 20), rel=1e-10)


def test_left_tail_from_q_scaled_avoids_underflow(srw, tp_srw):
    q = tilt_step_law(srw, tp_srw)
    tab_q = renewal_table(q, 1.0, 0, 1000)
    scaled = left_tail_from_q(tab_q, tp_srw, 950, scaled=True)
    assert scaled.value == pytest.approx(1.875, rel=1e-10)
    assert left_tail_from_q(tab_q, tp_srw, 950).value == 0.0


def test_left_tail_from_q_below_window(srw, tp_srw):
    q = tilt_step_law(srw, tp_srw)
    tab_q = renewal_table(q, 1.0, 10, 60)
    with pytest.raises(IndexError):
        left_tail_from_q(tab_q, tp_srw, 3)


def test_left_tail_from_q_weight_must_match(srw_tables, tp_pg4):
    _, tab_q = srw_tables
    with pytest.raises(ValueError):
        left_tail_from_q(tab_q, tp_pg4, 3)


@pytest.mark.parametrize("x", [0, 7, 30])
def test_cross_oracle_pg4(pg4_tables, tp_pg4, x):
    tab_p, tab_q = pg4_tables
    a = left_tail_direct(tab_p, x)
    b = left_tail_from_q(tab_q, tp_pg4, x)
    assert abs(a.value - b.value) <= a.bound + b.bound


# -- identity and defective ratio ---------------------------------------------

def test_identity_srw(srw_tables, tp_srw):
    tab_p, tab_q = srw_tables
    assert identity_residual(tab_p, tab_q, tp_srw, 3) < 1e-8


def test_identity_pg4(pg4_tables, tp_pg4):
    tab_p, tab_q = pg4_tables
    assert identity_residual(tab_p, tab_q, tp_pg4, 10) < 1e-6


def test_identity_window_too_short(srw, tp_srw, srw_tables):
    tab_p, _ = srw_tables
    q = tilt_step_law(srw, tp_srw)
    short_q = renewal_table(q, 1.0, 0, 12)
    with pytest.raises(CertificationError):
        identity_residual(tab_p, short_q, tp_srw, 10)


def test_wy09_trend(pg4, tp_pg4):
    q = tilt_step_law(pg4, tp_pg4)
    r20 = wy09_ratio(q, tp_pg4.rho, 20)
    r60 = wy09_ratio(q, tp_pg4.rho, 60)
    assert abs(r60 - 1) < abs(r20 - 1)


def test_wy09_rejects_rho_one(srw, tp_srw):
    q = tilt_step_law(srw, tp_srw)
    with pytest.raises(RegimeError):
        wy09_ratio(q, 1.0, 10)


def test_wy09_zero_window(pg4, tp_pg4):
    q = tilt_step_law(pg4, tp_pg4)
    with pytest.raises(ZeroDivisionError):
        wy09_ratio(q, tp_pg4.rho, 10.2, T=0.5)


# -- Stone-type bound -------------------------------------------------------

@pytest.mark.parametrize("which", ["srw", "pg4"])
def test_stone_bound_half_rate(which, srw_tables, pg4_tables, tp_srw, tp_pg4):
    tab_p, tp = (srw_tables[0], tp_srw) if which == "srw" else (pg4_tables[0], tp_pg4)
    vals = [math.exp(tp.kappa / 2 * x) * left_tail_direct(tab_p, x).value for x in range(5, 41)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
