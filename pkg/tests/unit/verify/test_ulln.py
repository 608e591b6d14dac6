"""Tests for the sup-deviation engine and its n-grid runs."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
import pytest

from netulln.errors import OracleError, VerificationError
from netulln.funcspace import ParamSpace, build_delta_net, clipped_quadratic, constant
from netulln.netgraph import NetworkFamily, generate
from netulln.process import ProcessSpec, simulate
from netulln.verify.ulln import (
    RowMeanOracle,
    UllnSettings,
    is_strictly_decreasing,
    run_ulln_experiment,
    sup_deviation,
)

SPACE = ParamSpace.from_bounds([[-1.0, 1.0]])
MA1 = ProcessSpec(radius=1, weights=(1.0, 0.5), shock_loading=0.5, shock_decay=0.5)


def _settings(**changes) -> UllnSettings:
    base = UllnSettings(
        n_grid=(20, 40),
        network=NetworkFamily("cycle"),
        process=MA1,
        family=clipped_quadratic(1.0),
        space=SPACE,
        replications=3,
        seed=11,
        oracle_draws=300,
        oracle_se_ceiling=None,
    )
    return replace(base, **changes)


def test_constant_family_has_zero_deviation():
    net = generate("cycle", {"n": 30})
    family = constant(0.3)
    draw = simulate(net, MA1, seed=1)
    oracle = RowMeanOracle(net, MA1, family, 100, seed=2)
    for mode in ("conditional", "unconditional"):
        result = sup_deviation(draw, family, build_delta_net(SPACE, 0.1), mode, oracle)
        assert result.value == 0.0
        assert result.oracle_se == 0.0


def test_single_point_net_is_the_pointwise_deviation():
    net = generate("cycle", {"n": 30})
    family = clipped_quadratic(1.0)
    draw = simulate(net, MA1, seed=1)
    oracle = RowMeanOracle(net, MA1, family, 2000, seed=2)
    dnet = build_delta_net(SPACE, 5.0)
    assert dnet.cardinality == 1

    result = sup_deviation(draw, family, dnet, "conditional", oracle)
    sample_mean = family.evaluate(draw.values, 0.0).mean()
    expected = oracle.mean(np.zeros(1), "conditional", draw.common_shock[0]).value
    assert result.value == pytest.approx(abs(sample_mean - expected), abs=1e-12)
    assert result.argmax_index == 0


def test_sup_deviation_ignores_net_order():
    net = generate("cycle", {"n": 30})
    family = clipped_quadratic(1.0)
    draw = simulate(net, MA1, seed=1)
    oracle = RowMeanOracle(net, MA1, family, 2000, seed=2)
    dnet = build_delta_net(SPACE, 0.1)
    order = np.random.default_rng(0).permutation(dnet.cardinality)
    shuffled = replace(dnet, points=dnet.points[order])

    first = sup_deviation(draw, family, dnet, "conditional", oracle)
    second = sup_deviation(draw, family, shuffled, "conditional", oracle)
    assert first.value == second.value
    assert first.continuity_slack == pytest.approx(2 * 2.0 * 0.1)


def test_oracle_error_above_the_ceiling():
    net = generate("cycle", {"n": 30})
    family = clipped_quadratic(1.0)
    oracle = RowMeanOracle(net, MA1, family, 100, seed=2)
    draw = simulate(net, MA1, seed=1)
    with pytest.raises(OracleError, match="raise oracle_draws"):
        sup_deviation(
            draw, family, build_delta_net(SPACE, 0.5), "conditional", oracle,
            se_ceiling=1e-9,
        )


def test_conditional_oracle_needs_a_shock():
    net = generate("cycle", {"n": 30})
    oracle = RowMeanOracle(net, MA1, clipped_quadratic(1.0), 100, seed=2)
    with pytest.raises(VerificationError, match="realized shock"):
        oracle.mean(np.zeros(1), "conditional")


def test_row_oracle_weights_signature_groups():
    net = generate("path", {"n": 10})
    family = clipped_quadratic(1.0)
    oracle = RowMeanOracle(net, MA1, family, 500, seed=3)
    combined = oracle.mean(np.zeros(1), "conditional", 0.2).value
    groups = [
        family.evaluate(
            MA1.conditional_location(10, 0.2) + oracle.sampler.samples(g), 0.0
        ).mean()
        for g in range(oracle.sampler.group_count)
    ]
    expected = float(np.dot(oracle.sampler.group_weights, groups))
    assert combined == pytest.approx(expected, rel=1e-12)


def test_run_with_constant_family_reports_zero_deviations():
    result = run_ulln_experiment(_settings(family=constant(0.0)))
    assert result.deviations.shape == (2, 3)
    assert not result.deviations.any()
    assert result.net_size[0] >= 1
    assert np.isnan(result.slope)


def test_run_rejects_too_few_oracle_draws():
    with pytest.raises(VerificationError, match="10x"):
        run_ulln_experiment(_settings(oracle_draws=20))


def test_unconditional_run_warns_when_the_window_is_infeasible(caplog):
    dense = NetworkFamily("erdos_renyi", {"p_link": 1.0})
    with caplog.at_level("WARNING"):
        result = run_ulln_experiment(
            _settings(network=dense, n_grid=(20,), mode="unconditional")
        )
    assert result.warnings
    assert "sparsity window waived" in result.warnings[0]
    assert "sparsity window waived" in caplog.text


def test_run_is_identical_under_a_thread_pool():
    serial = run_ulln_experiment(_settings())
    with ThreadPoolExecutor(max_workers=4) as pool:
        threaded = run_ulln_experiment(_settings(), pool.map)
    np.testing.assert_array_equal(serial.deviations, threaded.deviations)


def test_is_strictly_decreasing():
    assert is_strictly_decreasing([3.0, 2.0, 1.0])
    assert not is_strictly_decreasing([3.0, 3.0, 1.0])


@pytest.mark.slow
def test_conditional_medians_shrink_with_n():
    settings = _settings(
        n_grid=(100, 400, 1600),
        replications=50,
        oracle_draws=100_000,
        oracle_se_ceiling=0.01,
    )
    result = run_ulln_experiment(settings)
    assert result.strictly_decreasing
    assert result.slope <= -0.25
