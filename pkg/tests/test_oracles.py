"""Tests for the moment oracles and literal brute-force statistics."""
from __future__ import annotations

import math

import numpy as np
import pytest

from cmsbm.errors import BudgetExceeded, InfeasibleSize
from cmsbm.model import ModelParams, center_layer, sample_planted
from cmsbm.oracles import (
    MomentQuery,
    bernoulli_moment,
    bernoulli_moment_literal,
    brute_force_detection,
    brute_force_recovery,
    gaussian_moment,
    moment_dominance_suite,
)
from cmsbm.thresholds import signal_strengths

RHOS = (0.0, 0.3, 0.6, 1.0)


def test_second_moments_are_one() -> None:
    # Every single overlap, rescaled by sqrt(n), has unit second moment.
    for n in (2, 3, 4, 5):
        for rho in RHOS:
            assert bernoulli_moment(MomentQuery(1, (), n), rho) == pytest.approx(1.0)
            assert bernoulli_moment(MomentQuery(0, (1,), n), rho) == pytest.approx(1.0)


def test_fourth_moment_closed_form() -> None:
    # E[(<x,x'>/sqrt(n))^4] = 3 - 2/n for iid sign coordinates.
    for n in (2, 3, 4, 5, 6):
        got = bernoulli_moment(MomentQuery(2, (), n), 0.5)
        assert got == pytest.approx(3.0 - 2.0 / n, rel=1e-12)


def test_mixed_moment_closed_form() -> None:
    # E[(<x,x'>/sqrt(n))^2 (<x_1,x_1'>/sqrt(n))^2] = 1 + 2 rho^4 (n-1)/n:
    # diagonal pairings give n^2, the two cross pairings give n(n-1) rho^4 each.
    for n in (2, 3, 4, 5):
        for rho in RHOS:
            got = bernoulli_moment(MomentQuery(1, (1,), n), rho)
            assert got == pytest.approx(1.0 + 2.0 * rho**4 * (n - 1) / n, rel=1e-12)


def test_cross_layer_moment_closed_form() -> None:
    # Two distinct layers couple through rho^8 = (rho^4)^2.
    for n in (2, 3, 4):
        for rho in RHOS:
            got = bernoulli_moment(MomentQuery(0, (1, 1), n), rho)
            assert got == pytest.approx(1.0 + 2.0 * rho**8 * (n - 1) / n, rel=1e-12)


def test_dp_matches_literal_enumeration() -> None:
    queries = [
        MomentQuery(1, (), 2),
        MomentQuery(2, (), 2),
        MomentQuery(0, (1,), 2),
        MomentQuery(1, (1,), 2),
        MomentQuery(0, (2,), 2),
        MomentQuery(0, (1, 1), 2),
        MomentQuery(1, (1, 1), 2),
        MomentQuery(2, (), 3),
        MomentQuery(1, (), 3),
    ]
    for q in queries:
        for rho in RHOS:
            dp = bernoulli_moment(q, rho)
            lit = bernoulli_moment_literal(q, rho)
            assert dp == pytest.approx(lit, rel=1e-12, abs=1e-12), (q, rho)


def test_gaussian_moment_fixtures() -> None:
    assert gaussian_moment(MomentQuery(1, (), 4), 0.5) == pytest.approx(1.0)
    assert gaussian_moment(MomentQuery(2, (), 4), 0.5) == pytest.approx(3.0)
    for rho in RHOS:
        assert gaussian_moment(MomentQuery(1, (1,), 4), rho) == pytest.approx(
            1.0 + 2.0 * rho**4, rel=1e-12
        )
        assert gaussian_moment(MomentQuery(0, (1, 1), 4), rho) == pytest.approx(
            1.0 + 2.0 * rho**8, rel=1e-12
        )
        assert gaussian_moment(MomentQuery(0, (2,), 4), rho) == pytest.approx(3.0)


def test_gaussian_dominates_bernoulli_pointwise() -> None:
    # The n-independent Gaussian moment upper-bounds every finite-n moment.
    for q in [MomentQuery(2, (), 5), MomentQuery(1, (1,), 5), MomentQuery(0, (1, 1), 5)]:
        for rho in RHOS:
            assert bernoulli_moment(q, rho) <= gaussian_moment(q, rho) + 1e-12


def test_dominance_suite_small_grid() -> None:
    report = moment_dominance_suite(
        L=1, rhos=(0.0, 0.5, 1.0), n_values=(2, 3), max_degree=2
    )
    assert report["pass"]
    assert report["checked"] == 5 * 3 * 2
    assert report["max_gap"] <= 1e-12
    assert set(report["worst_case"]) == {"rho", "n", "alpha", "alphas"}


def test_moment_query_budget() -> None:
    with pytest.raises(BudgetExceeded):
        MomentQuery(3, (2,), 4)
    with pytest.raises(BudgetExceeded):
        bernoulli_moment_literal(MomentQuery(1, (), 4), 0.5)


TINY = ModelParams(n=3, p=3, L=1, mu=0.4, rho=0.6, lam=(1.0,), eps=(0.5,))


def test_brute_force_detection_hand_value() -> None:
    # Single-color triangle on n=3: exactly one canonical tuple, so the
    # statistic is sqrt(6) * prod(centered edges) / n^(3/2) by hand.
    obs = sample_planted(TINY, seed=5)
    cent = center_layer(obs, 0, TINY).values
    expected = math.sqrt(6.0) * cent[0, 1] * cent[1, 2] * cent[2, 0] / 3.0**1.5
    got = brute_force_detection(obs, TINY, aleph=3, color_restrict=1)
    assert got == pytest.approx(expected, rel=1e-12)


def test_brute_force_recovery_hand_value_single_color() -> None:
    # One-letter single-color chains: phi[i,j] = 2 sqrt(n) * centered[i,j] / xi.
    obs = sample_planted(TINY, seed=6)
    cent = center_layer(obs, 0, TINY).values
    xi = math.sqrt(signal_strengths(TINY)[1])
    expected = 2.0 * math.sqrt(3.0) / xi * cent
    got = brute_force_recovery(obs, TINY, aleph=1, color_restrict=1)
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(got, got.T)
    np.testing.assert_allclose(got.diagonal(), 0.0)


def test_brute_force_recovery_hand_value_mixed() -> None:
    # One-letter chains over both letters: the zero letter contributes the
    # feature inner product <Y_i, Y_j> / sqrt(p), the colored letter the
    # centered entry, each weighted by xi / beta, all times sqrt(n).
    obs = sample_planted(TINY, seed=7)
    cent = center_layer(obs, 0, TINY).values
    s = signal_strengths(TINY)
    beta = (s[0] + s[1]) / 2.0
    gram = obs.Y @ obs.Y.T
    np.fill_diagonal(gram, 0.0)
    expected = math.sqrt(3.0) / beta * (
        math.sqrt(s[0]) * gram / math.sqrt(3.0) + math.sqrt(s[1]) * cent
    )
    got = brute_force_recovery(obs, TINY, aleph=1)
    np.testing.assert_allclose(got, expected, rtol=1e-12, atol=1e-12)


def test_brute_force_size_guards() -> None:
    big = ModelParams(n=13, p=3, L=1, mu=0.4, rho=0.6, lam=(1.0,), eps=(0.5,))
    obs = sample_planted(big, seed=1)
    with pytest.raises(InfeasibleSize):
        brute_force_detection(obs, big, aleph=3)
    obs_small = sample_planted(TINY, seed=1)
    with pytest.raises(InfeasibleSize):
        brute_force_detection(obs_small, TINY, aleph=4)
    with pytest.raises(InfeasibleSize):
        brute_force_detection(obs_small, TINY, aleph=2)
    with pytest.raises(InfeasibleSize):
        brute_force_recovery(obs_small, TINY, aleph=4)
