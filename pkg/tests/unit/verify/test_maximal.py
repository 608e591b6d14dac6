"""Tests for block sums, block moments, partial-sum maxima and growth fits."""

from __future__ import annotations

import math

import numpy as np
import pytest

from netulln.errors import VerificationError
from netulln.netgraph import NetworkFamily, find_block_partition, generate
from netulln.process import NoiseLaw, ProcessSpec
from netulln.verify.maximal import (
    MaximalSettings,
    alternative_rate,
    block_moment_check,
    block_sums,
    cumulative_block_bound,
    exhaustive_rademacher_moment,
    fit_growth_exponent,
    maximal_moment,
    run_maximal_experiment,
    unconditional_rate_exponent,
)
from tests.support.reference import rademacher_running_max_moment

IID = ProcessSpec(radius=0)
SIGNS = ProcessSpec(radius=0, innovation=NoiseLaw(name="rademacher", bound=1.0))
SILENT = ProcessSpec(radius=0, weights=(0.0,))


def test_block_sums_reassemble_the_total():
    net = generate("cycle", {"n": 22})
    partition = find_block_partition(net, 5, 0.5)
    x = np.random.default_rng(1).normal(size=22)
    sums = block_sums(x, partition)
    assert sums.sums.shape == (4,)
    assert sums.tail_sum == pytest.approx(x[20] + x[21])
    assert sums.reassembled() == pytest.approx(sums.total, abs=1e-12)


def test_cumulative_block_bound_examples():
    running, bound = cumulative_block_bound([1.0, -2.0, 3.0], 3)
    assert running == 8.0
    assert bound == 9.0 * (1 + 8 + 27)
    assert running <= bound
    assert cumulative_block_bound([], 3) == (0.0, 0.0)


def test_block_moment_of_zero_process_is_zero():
    net = generate("cycle", {"n": 40})
    partition = find_block_partition(net, 1, 0.5)
    result = block_moment_check(net, SILENT, partition, 4, 10, seed=0)
    assert result.ratio == 0.0
    assert result.se == 0.0


def test_block_moment_matches_iid_fourth_moment():
    net = generate("path", {"n": 400})
    partition = find_block_partition(net, 8, 0.5)
    result = block_moment_check(net, IID, partition, 4, 200, seed=3)
    # Uniform(-1, 1): E X^4 = 1/5 and sigma^4 = 1/9.
    expected = 0.2 / 8 + 3 * 7 / 8 / 9
    assert result.block_count == 50
    assert abs(result.ratio - expected) <= 5 * result.se


def test_block_moment_rejects_low_orders():
    net = generate("cycle", {"n": 40})
    partition = find_block_partition(net, 2, 0.5)
    with pytest.raises(VerificationError, match="greater than 2"):
        block_moment_check(net, IID, partition, 2, 10, seed=0)


def test_single_sign_has_unit_moment():
    net = generate("path", {"n": 1})
    result = maximal_moment(net, SIGNS, 4, None, 60, seed=0)
    assert result.value == 1.0
    assert result.se == 0.0


def test_exhaustive_moment_matches_independent_enumeration():
    assert exhaustive_rademacher_moment(1, 4) == 1.0
    assert exhaustive_rademacher_moment(2, 4) == 8.5
    for n in range(3, 9):
        assert exhaustive_rademacher_moment(n, 4) == pytest.approx(
            rademacher_running_max_moment(n, 4), rel=1e-12
        )


def test_exhaustive_moment_limits_n():
    with pytest.raises(VerificationError):
        exhaustive_rademacher_moment(21, 4)


def test_monte_carlo_maximal_moment_matches_exact_value():
    net = generate("path", {"n": 8})
    result = maximal_moment(net, SIGNS, 4, None, 20_000, seed=5)
    exact = exhaustive_rademacher_moment(8, 4)
    assert abs(result.value - exact) <= 4 * result.se


def test_few_replications_warn(caplog):
    net = generate("path", {"n": 8})
    with caplog.at_level("WARNING"):
        result = maximal_moment(net, IID, 4, None, 10, seed=0)
    assert result.warnings
    assert "noisy" in caplog.text
    with pytest.raises(VerificationError, match=">= 2"):
        maximal_moment(net, IID, 4, None, 1, seed=0)


def test_maximal_moment_prefix_length():
    net = generate("path", {"n": 8})
    assert maximal_moment(net, IID, 4, 3, 50, seed=0).n == 3
    with pytest.raises(VerificationError, match="1..8"):
        maximal_moment(net, IID, 4, 9, 50, seed=0)


def test_growth_fit_recovers_known_exponents():
    grid = [16, 64, 256, 1024]
    assert fit_growth_exponent(grid, [n**2 for n in grid]).slope == pytest.approx(2.0)
    fit = fit_growth_exponent(grid, [5 * n**1.5 for n in grid])
    assert fit.slope == pytest.approx(1.5)
    assert fit.intercept == pytest.approx(math.log(5))
    assert fit.ci_low == fit.ci_high == fit.slope


def test_growth_fit_bootstrap_interval_brackets_the_slope():
    rng = np.random.default_rng(0)
    grid = [16, 64, 256, 1024]
    samples = [n * rng.exponential(1.0, size=400) for n in grid]
    fit = fit_growth_exponent(
        grid, [s.mean() for s in samples], samples=samples, n_boot=300, seed=1
    )
    assert fit.ci_low <= fit.slope <= fit.ci_high
    assert fit.slope == pytest.approx(1.0, abs=0.1)


def test_growth_fit_input_checks():
    with pytest.raises(VerificationError, match="at least 4"):
        fit_growth_exponent([1, 2, 3], [1.0, 2.0, 3.0])
    with pytest.raises(VerificationError, match="positive"):
        fit_growth_exponent([1, 2, 3, 4], [1.0, 0.0, 3.0, 4.0])


def test_alternative_rate_and_unconditional_exponent():
    rate = alternative_rate(0.25, 0.5, 0.2)
    assert rate.p == 5.0
    assert rate.beta == pytest.approx(0.8)
    assert rate.exponent == pytest.approx(4.0)
    exponent, summable = unconditional_rate_exponent(5, 1, 0.5)
    assert exponent == pytest.approx(5 * (0.5 + 1 / 24 - 1))
    assert summable
    assert not unconditional_rate_exponent(5, 1, 0.9)[1]


def test_maximal_run_on_sparse_cycle():
    settings = MaximalSettings(
        n_grid=(16, 32, 64, 128),
        network=NetworkFamily("cycle"),
        process=IID,
        replications=60,
        seed=2,
        n_boot=50,
    )
    result = run_maximal_experiment(settings)
    assert result.p == 5
    assert result.beta == pytest.approx(0.7333, abs=1e-4)
    assert result.cap == pytest.approx(5 * result.beta)
    assert len(result.moments) == 4
    assert all(audit.feasible for audit in result.audits)
    assert result.fit.ci_low <= result.fit.slope <= result.fit.ci_high


def test_maximal_run_needs_four_points():
    settings = MaximalSettings(
        n_grid=(16, 32, 64),
        network=NetworkFamily("cycle"),
        process=IID,
        replications=60,
        seed=2,
    )
    with pytest.raises(VerificationError, match="4 grid points"):
        run_maximal_experiment(settings)


@pytest.mark.slow
def test_iid_maximal_growth_stays_under_the_cap():
    settings = MaximalSettings(
        n_grid=(256, 1024, 4096, 16384),
        network=NetworkFamily("cycle"),
        process=IID,
        replications=500,
        seed=20240601,
    )
    result = run_maximal_experiment(settings)
    assert result.passes
    # Independent rows grow like n^(p/2).
    assert result.fit.slope == pytest.approx(2.5, abs=0.3)


@pytest.mark.slow
def test_million_sign_paths_land_within_half_a_percent_of_enumeration():
    net = generate("path", {"n": 8})
    result = maximal_moment(net, SIGNS, 4, None, 1_000_000, seed=20240601)
    exact = exhaustive_rademacher_moment(8, 4)
    assert abs(result.value - exact) <= 0.005 * exact
