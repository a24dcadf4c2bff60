import math

import numpy as np
import pytest

from renewtail.errors import CertificationError
from renewtail.mc import (
    CSV_HEADER,
    block_rng,
    estimate_naive,
    estimate_naive_grid,
    estimate_tilted,
    estimate_tilted_grid,
    truncation_margin,
)
from renewtail.oracle import left_tail_direct
from renewtail.tilt import solve_tilt

from reference import srw_left_tail


def test_block_streams_are_distinct_and_reproducible():
    a = block_rng(3, 0).random(4)
    assert np.array_equal(a, block_rng(3, 0).random(4))
    assert not np.array_equal(a, block_rng(3, 1).random(4))
    assert not np.array_equal(a, block_rng(4, 0).random(4))


def test_naive_srw_x0(srw):
    est = estimate_naive(srw, 0.0, 100_000, 1000, seed=1)
    assert abs(est.value - 1.875) <= 3 * est.std_error
    assert est.method == "NAIVE" and est.n_paths == 100_000


def test_tilted_srw_x20(srw, tp_srw):
    est = estimate_tilted(srw, tp_srw, 20.0, 100_000, seed=1)
    truth = srw_left_tail(0.7, 20)
    assert abs(est.value - truth) <= 3 * est.std_error
    assert est.std_error / est.value < 0.05


def test_tilted_tse_x10(tse):
    tp = solve_tilt(tse)
    est = estimate_tilted(tse, tp, 10.0, 50_000, seed=2)
    scaled, se = math.exp(0.8 * 10) * est.value, math.exp(0.8 * 10) * est.std_error
    assert abs(scaled - 3.375) <= 3 * se + 0.02 * 3.375


def test_tilted_matches_naive_at_zero(tse):
    tp = solve_tilt(tse)
    t = estimate_tilted(tse, tp, 0.0, 20_000, seed=3)
    n = estimate_naive(tse, 0.0, 20_000, 300, seed=4)
    assert abs(t.value - n.value) <= 3 * math.hypot(t.std_error, n.std_error)


@pytest.mark.parametrize("which", ["srw", "pg4"])
def test_tilted_unbiased_against_oracle(which, srw, pg4, tp_srw, tp_pg4, srw_tables, pg4_tables):
    dist, tp, tab_p = (srw, tp_srw, srw_tables[0]) if which == "srw" else (pg4, tp_pg4, pg4_tables[0])
    xs = [0.0, 5.0, 12.0, 25.0, 40.0]
    est = estimate_tilted_grid(dist, tp, xs, 20_000, seed=5)
    for e in est:
        exact = left_tail_direct(tab_p, e.x)
        assert abs(e.value - exact.value) <= 3 * e.std_error + exact.bound + 1e-4 * exact.value


def test_variance_dominance(srw, tp_srw):
    est = estimate_tilted(srw, tp_srw, 20.0, 100_000, seed=6)
    p_hat = srw_left_tail(0.7, 20)
    naive_se = math.sqrt(p_hat / 100_000)
    assert naive_se / est.std_error > 100


def test_naive_rare_event_returns_zero(srw):
    est = estimate_naive(srw, 20.0, 200_000, 200, seed=7)
    assert est.value == 0.0 and est.std_error == 0.0


def test_determinism_across_workers(tse):
    tp = solve_tilt(tse)
    runs = [estimate_tilted_grid(tse, tp, [0.0, 5.0, 10.0], 10_000, seed=9, workers=w) for w in (1, 3, 8)]
    assert runs[0] == runs[1] == runs[2]
    naive = [estimate_naive_grid(tse, [0.0, 2.0], 9_000, 50, seed=9, workers=w) for w in (1, 4)]
    assert naive[0] == naive[1]


def test_crn_monotone_in_x(pg4, tp_pg4):
    xs = np.linspace(0, 30, 31)
    est = estimate_tilted_grid(pg4, tp_pg4, xs, 5_000, seed=10)
    vals = [e.value for e in est]
    assert all(b <= a for a, b in zip(vals, vals[1:]))


def test_truncation_margin_meets_epsilon(srw, tp_srw):
    eps = 1e-4
    m = truncation_margin(srw, tp_srw, eps)
    visits = 1 + m / 0.4 + 1 / (tp_srw.kappa * 0.4)
    assert math.exp(-tp_srw.kappa * m) * visits == pytest.approx(eps, rel=1e-9)
    assert m > math.log(1 / eps) / tp_srw.kappa


def test_tilted_disabled_for_infinite_tilted_mean(pg75, tp_pg75):
    with pytest.raises(CertificationError):
        estimate_tilted(pg75, tp_pg75, 10.0, 100, seed=1)


def test_csv_row_layout(srw):
    est = estimate_naive(srw, 1.0, 100, 10, seed=1)
    row = est.csv_row()
    assert len(row) == len(CSV_HEADER)
    assert row[4] == "NAIVE" and row[5] == "1"
    assert float(row[1]) == est.value


def test_rejects_negative_x(srw, tp_srw):
    with pytest.raises(ValueError):
        estimate_tilted(srw, tp_srw, -1.0, 10, seed=1)
