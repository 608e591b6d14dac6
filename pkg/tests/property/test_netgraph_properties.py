"""Property-based tests for network distances, partitions and delta-nets."""

from __future__ import annotations

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from netulln.funcspace import ParamSpace, build_delta_net, nearest_net_point
from netulln.netgraph import (
    find_block_partition,
    network_from_edges,
    partition_violations,
    shell_stats,
)
from tests.support.reference import floyd_warshall, min_in_block_distance, shell_counts


@st.composite
def networks(draw, max_nodes: int = 12):
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    return network_from_edges(n, edges)


@settings(max_examples=60, deadline=None)
@given(net=networks())
def test_bfs_distances_match_floyd_warshall(net):
    distances = net.distance_matrix()
    np.testing.assert_array_equal(distances, floyd_warshall(net))
    np.testing.assert_array_equal(distances, distances.T)
    for k in range(net.n):
        assert np.all(distances <= distances[:, [k]] + distances[[k], :])


@settings(max_examples=60, deadline=None)
@given(net=networks(), s_max=st.integers(min_value=0, max_value=4))
def test_shell_sizes_match_reference_counts(net, s_max):
    stats = shell_stats(net, s_max)
    np.testing.assert_array_equal(stats.per_node_shell_sizes, shell_counts(net, s_max))


@settings(max_examples=60, deadline=None)
@given(net=networks(), data=st.data())
def test_greedy_partition_reports_its_exact_separation(net, data):
    b_n = data.draw(st.integers(min_value=1, max_value=net.n))
    partition = find_block_partition(net, b_n, 0.5)

    members = np.concatenate([*partition.blocks, partition.tail])
    assert sorted(members.tolist()) == list(range(net.n))
    assert all(block.size == b_n for block in partition.blocks)
    assert partition.tail.size < b_n
    assert partition.separation == min_in_block_distance(net, partition.blocks)
    assert partition_violations(net, partition, partition.separation) == []


@settings(max_examples=80, deadline=None)
@given(
    low=st.floats(min_value=-5.0, max_value=5.0),
    width=st.floats(min_value=0.1, max_value=4.0),
    delta=st.floats(min_value=0.05, max_value=3.0),
    anchor=st.sampled_from(["endpoints", "centers"]),
    fraction=st.floats(min_value=0.0, max_value=1.0),
)
def test_every_box_point_is_within_delta_of_the_net(
    low, width, delta, anchor, fraction
):
    space = ParamSpace.from_bounds([[low, low + width], [0.0, 1.0]])
    net = build_delta_net(space, delta, anchor=anchor)
    theta = [low + fraction * width, fraction]
    _, distance = nearest_net_point(net, theta)
    assert distance <= delta + 1e-9
