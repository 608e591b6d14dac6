"""Tests for parameter boxes, delta-nets and bounded-Lipschitz families."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from netulln.errors import FunctionSpaceError
from netulln.funcspace import (
    ParamSpace,
    build_delta_net,
    builtin_family,
    certify_bounds,
    clipped_location,
    clipped_location_pair,
    clipped_quadratic,
    constant,
    nearest_net_point,
    uniform_y_sampler,
)
from netulln.rng import generator

UNIT = ParamSpace.from_bounds([[0.0, 1.0]])


def test_param_space_rejects_empty_intervals():
    with pytest.raises(FunctionSpaceError, match="empty"):
        ParamSpace.from_bounds([[1.0, 0.0]])
    with pytest.raises(FunctionSpaceError, match="finite"):
        ParamSpace.from_bounds([[0.0, math.inf]])


def test_param_space_geometry():
    space = ParamSpace.from_bounds([[0.0, 3.0], [-2.0, 2.0]])
    assert space.dimension == 2
    assert space.diameter == pytest.approx(5.0)
    np.testing.assert_array_equal(space.center, [1.5, 0.0])
    assert space.contains([3.0, -2.0])
    assert not space.contains([3.1, 0.0])
    np.testing.assert_array_equal(space.clip([4.0, -5.0]), [3.0, -2.0])
    assert space.corners().shape == (4, 2)


def test_unit_interval_net_with_quarter_spacing():
    net = build_delta_net(UNIT, 0.25)
    np.testing.assert_allclose(net.points[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])
    assert net.cardinality == 5
    assert net.covering_radius <= 0.25


def test_nearest_net_point_example():
    net = build_delta_net(UNIT, 0.25)
    index, distance = nearest_net_point(net, 0.3)
    assert index == 1
    assert distance == pytest.approx(0.05)


def test_nearest_net_point_breaks_ties_by_lowest_index():
    net = build_delta_net(UNIT, 0.25)
    index, distance = nearest_net_point(net, 0.125)
    assert index == 0
    assert distance == pytest.approx(0.125)


def test_nearest_net_point_rejects_points_outside_the_box():
    net = build_delta_net(UNIT, 0.25)
    with pytest.raises(FunctionSpaceError, match="outside"):
        nearest_net_point(net, 1.5)


def test_square_net_covers_corners_and_random_points():
    space = ParamSpace.from_bounds([[0.0, 1.0], [0.0, 1.0]])
    net = build_delta_net(space, 0.2)
    for corner in space.corners():
        assert nearest_net_point(net, corner)[1] <= 0.2
    probes = space.sample(generator(3), 10_000)
    gaps = np.linalg.norm(probes[:, None, :] - net.points[None, :, :], axis=2)
    assert gaps.min(axis=1).max() <= 0.2


def test_coarse_delta_gives_the_center_alone():
    net = build_delta_net(UNIT, 0.6)
    assert net.cardinality == 1
    np.testing.assert_array_equal(net.points, [[0.5]])


def test_center_anchored_net_is_coarser_but_still_covers():
    space = ParamSpace.from_bounds([[-1.0, 1.0]])
    centers = build_delta_net(space, 0.1, anchor="centers")
    endpoints = build_delta_net(space, 0.1, anchor="endpoints")
    assert centers.cardinality == 10
    assert endpoints.cardinality == 21
    assert centers.covering_radius <= 0.1 + 1e-12
    probes = np.linspace(-1.0, 1.0, 401)
    assert max(nearest_net_point(centers, p)[1] for p in probes) <= 0.1 + 1e-12


def test_net_cardinality_scales_like_inverse_delta():
    space = ParamSpace.from_bounds([[-1.0, 1.0]])
    sizes = [build_delta_net(space, d, anchor="centers").cardinality
             for d in (0.2, 0.1, 0.05, 0.025)]
    assert sizes == [5, 10, 20, 40]


def test_invalid_delta_and_anchor():
    with pytest.raises(FunctionSpaceError, match="positive"):
        build_delta_net(UNIT, 0.0)
    with pytest.raises(FunctionSpaceError, match="anchor"):
        build_delta_net(UNIT, 0.1, anchor="corners")


def test_clipped_quadratic_values():
    family = clipped_quadratic(1.0)
    values = family.evaluate([0.0, 0.5, 3.0], 0.0)
    assert values.shape == (3, 1)
    np.testing.assert_allclose(values[:, 0], [0.0, 0.25, 1.0])
    assert family.y_lipschitz == 2.0


def test_clipped_location_pair_has_two_components():
    family = clipped_location_pair(1.5)
    values = family.evaluate([0.0, 10.0], 0.0)
    assert values.shape == (2, 2)
    assert values[1, 0] == 1.5
    assert values[1, 1] == pytest.approx(1.5 * math.tanh(10.0 / 1.5))


def test_evaluate_checks_theta_dimension():
    with pytest.raises(FunctionSpaceError, match="dimension"):
        clipped_location(1.0).evaluate([0.0], [0.0, 1.0])


def test_scaled_family_scales_values_and_bounds():
    family = clipped_location(1.0).scaled(2.0)
    assert family.sup_bound == 2.0
    assert family.y_lipschitz == 2.0
    np.testing.assert_array_equal(family.evaluate([0.25], 0.0), [[0.5]])


def test_constant_family_is_exact():
    family = constant(0.7)
    np.testing.assert_array_equal(family.evaluate([1.0, -4.0], 0.0), [[0.7], [0.7]])
    assert family.constant_value == 0.7


def test_builtin_family_rejects_unknown_names_and_params():
    with pytest.raises(FunctionSpaceError, match="unknown family"):
        builtin_family("huber", {})
    with pytest.raises(FunctionSpaceError, match="unknown parameter"):
        builtin_family("clipped_location", {"width": 1.0})
    with pytest.raises(FunctionSpaceError, match="positive"):
        builtin_family("clipped_location", {"clip": 0.0})


def test_certify_bounds_passes_for_correct_bounds():
    space = ParamSpace.from_bounds([[-1.0, 1.0]])
    certificate = certify_bounds(
        clipped_quadratic(1.0), uniform_y_sampler(3.0), space, 20_000, seed=1
    )
    assert certificate.ok
    assert certificate.kind == "analytic"
    assert certificate.sup_observed <= 1.0
    assert certificate.y_ratio <= 2.0 * (1 + 1e-12)


def test_certify_bounds_returns_a_witness_for_an_understated_bound(caplog):
    space = ParamSpace.from_bounds([[-1.0, 1.0]])
    broken = replace(clipped_quadratic(1.0), name="broken", sup_bound=0.5)
    with caplog.at_level("WARNING"):
        certificate = certify_bounds(
            broken, uniform_y_sampler(3.0), space, 5_000, seed=1
        )
    assert not certificate.ok
    assert certificate.witness["bound"] == "sup_bound"
    assert certificate.witness["observed"] > 0.5
    assert "broken violates its declared bounds" in caplog.text


def test_certify_bounds_checks_dimensions():
    space = ParamSpace.from_bounds([[0.0, 1.0], [0.0, 1.0]])
    with pytest.raises(FunctionSpaceError, match="dimensions differ"):
        certify_bounds(clipped_location(), uniform_y_sampler(1.0), space, 10, seed=0)
