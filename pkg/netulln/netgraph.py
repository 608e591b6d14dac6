"""Networks, shortest-path distances, shell statistics and block partitions."""

from __future__ import annotations

import logging
import math
import operator
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Protocol

import networkx as nx
import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from netulln.errors import NetworkError, NetworkTooLargeError
from netulln.rng import int_seed, stream_seed

logger = logging.getLogger(__name__)

INFINITY = math.inf
ALL_PAIRS_LIMIT = 5000
NETWORK_KINDS = ("cycle", "path", "grid_lattice", "random_geometric", "erdos_renyi")
_CHUNK_CELLS = 1 << 22
_GENERATOR_KEYS: dict[str, frozenset[str]] = {
    "cycle": frozenset({"n"}),
    "path": frozenset({"n"}),
    "grid_lattice": frozenset({"n", "rows", "cols"}),
    "random_geometric": frozenset({"n", "radius"}),
    "erdos_renyi": frozenset({"n", "p_link"}),
}


class DecayLike(Protocol):
    """Anything that yields a decay coefficient per network distance."""

    @property
    def support(self) -> int | None: ...

    def value(self, s: int) -> float: ...


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable undirected 0/1 graph on nodes ``0..n-1``.

    Node ids are 0-based in every in-memory API (``set_distance``,
    ``in_distance_set``, ``shell_stats``, partitions). Edge-list files and CSV
    detail strings use 1-based ids; ``read_edge_list`` and ``write_edge_list``
    convert at that boundary.
    """

    adjacency: sparse.csr_array
    kind: str = "custom"
    lattice_shape: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        adjacency = sparse.csr_array(self.adjacency, dtype=np.int8)
        adjacency.eliminate_zeros()
        rows, cols = adjacency.shape
        if rows != cols:
            raise NetworkError(f"adjacency must be square, got {rows}x{cols}")
        if rows < 1:
            raise NetworkError("network must have at least one node")
        if adjacency.nnz and not np.all(adjacency.data == 1):
            raise NetworkError("adjacency entries must be 0 or 1")
        if adjacency.diagonal().any():
            raise NetworkError("adjacency must have a zero diagonal")
        asymmetry = adjacency - adjacency.T.tocsr()
        if asymmetry.count_nonzero():
            raise NetworkError("adjacency must be symmetric")
        adjacency.sort_indices()
        object.__setattr__(self, "adjacency", adjacency)

    @property
    def n(self) -> int:
        return int(self.adjacency.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz // 2)

    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr)

    def neighbors(self, node: int) -> np.ndarray:
        node = check_node(self, node)
        start, stop = self.adjacency.indptr[node], self.adjacency.indptr[node + 1]
        return self.adjacency.indices[start:stop].copy()

    def edges(self) -> list[tuple[int, int]]:
        upper = sparse.triu(self.adjacency, k=1, format="coo")
        return sorted(zip(upper.row.tolist(), upper.col.tolist()))

    def distance_matrix(self) -> np.ndarray:
        """All-pairs distances, computed once; refused above ``ALL_PAIRS_LIMIT``."""
        if self.n > ALL_PAIRS_LIMIT:
            raise NetworkTooLargeError(
                f"all-pairs distances need O(n^2) memory; n={self.n} exceeds "
                f"the limit of {ALL_PAIRS_LIMIT}. Use per-source distances."
            )
        return self._all_pairs

    @cached_property
    def _all_pairs(self) -> np.ndarray:
        logger.debug("Computing all-pairs distances for n=%d", self.n)
        matrix = csgraph.shortest_path(
            self.adjacency, method="D", directed=False, unweighted=True
        )
        matrix.setflags(write=False)
        return matrix

    def has_distance_cache(self) -> bool:
        return "_all_pairs" in self.__dict__


@dataclass(frozen=True)
class ShellStats:
    """Shell sizes |N(i;s)| per node and their averages for ``s = 0..s_max``."""

    per_node_shell_sizes: np.ndarray
    avg_shell_size: np.ndarray

    @property
    def s_max(self) -> int:
        return int(self.avg_shell_size.shape[0] - 1)

    def shell_size(self, node: int, s: int) -> int:
        return int(self.per_node_shell_sizes[node, s])

    def average(self, s: int) -> float:
        return float(self.avg_shell_size[s])


@dataclass(frozen=True)
class BlockPartition:
    """Equal-size node blocks, the achieved in-block separation and any tail."""

    blocks: tuple[np.ndarray, ...]
    block_size: int
    separation: float
    required_separation: float
    tail: np.ndarray
    method: str

    @property
    def block_count(self) -> int:
        return len(self.blocks)

    @property
    def feasible(self) -> bool:
        return bool(self.blocks) and self.separation >= self.required_separation

    @property
    def has_tail(self) -> bool:
        return self.tail.size > 0

    def membership(self, n: int) -> np.ndarray:
        """Block index per node, ``-1`` for tail nodes."""
        labels = np.full(n, -1, dtype=np.int64)
        for index, block in enumerate(self.blocks):
            labels[block] = index
        return labels


@dataclass(frozen=True)
class SparsityWindow:
    """Block-size window ``c1 n^beta1 <= b_n <= c2 n^beta2`` at one n."""

    n: int
    p: int
    d: int
    eta: float
    beta1: float
    beta2: float
    lower: float
    upper: float
    block_size: int | None

    @property
    def beta(self) -> float:
        return max(1.0 - self.beta1 / 2.0, self.beta2)

    @property
    def exponents_ordered(self) -> bool:
        return self.beta1 <= self.beta2

    @property
    def smallest_block_size(self) -> int | None:
        candidate = max(1, math.ceil(self.lower))
        return candidate if candidate <= self.upper else None

    @property
    def largest_block_size(self) -> int | None:
        candidate = min(self.n, math.floor(self.upper))
        return candidate if candidate >= max(1.0, self.lower) else None

    @property
    def contains(self) -> bool:
        if not self.exponents_ordered or self.block_size is None:
            return False
        return self.lower <= self.block_size <= self.upper

    @property
    def feasible(self) -> bool:
        if self.block_size is None:
            return self.exponents_ordered and self.smallest_block_size is not None
        return self.contains


def check_node(net: Network, node: int) -> int:
    try:
        index = operator.index(node)
    except TypeError as error:
        raise NetworkError(f"node id must be an integer, got {node!r}") from error
    if not 0 <= index < net.n:
        raise NetworkError(f"node id {index} is outside 0..{net.n - 1}")
    return index


def _node_array(net: Network, nodes: Iterable[int], label: str) -> np.ndarray:
    values = sorted({check_node(net, node) for node in nodes})
    if not values:
        raise NetworkError(f"node set {label} must be nonempty")
    return np.asarray(values, dtype=np.int64)


def network_from_edges(
    n: int, edges: Iterable[tuple[int, int]], *, kind: str = "custom"
) -> Network:
    """Build a network from 0-indexed node pairs."""
    if n < 1:
        raise NetworkError("network must have at least one node")
    pairs = [(int(i), int(j)) for i, j in edges]
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < n):
            raise NetworkError(f"edge ({i}, {j}) references a node outside 0..{n - 1}")
        if i == j:
            raise NetworkError(f"self-loop at node {i} is not allowed")
    rows = [i for i, j in pairs] + [j for i, j in pairs]
    cols = [j for i, j in pairs] + [i for i, j in pairs]
    matrix = sparse.coo_array(
        (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n)
    ).tocsr()
    matrix.data[:] = 1
    return Network(matrix, kind=kind)


def generate(kind: str, params: Mapping[str, Any], seed: int = 0) -> Network:
    """Deterministic test-network generator for the supported families."""
    if kind not in _GENERATOR_KEYS:
        raise NetworkError(
            f"unknown network kind '{kind}'; expected one of: "
            f"{', '.join(NETWORK_KINDS)}"
        )
    unknown = sorted(set(params) - _GENERATOR_KEYS[kind])
    if unknown:
        raise NetworkError(f"{kind}: unknown parameter(s): {', '.join(unknown)}")

    if kind == "grid_lattice":
        rows, cols = _lattice_shape(params)
        graph = nx.convert_node_labels_to_integers(
            nx.grid_2d_graph(rows, cols), ordering="sorted"
        )
        return _from_graph(graph, rows * cols, kind, lattice_shape=(rows, cols))

    n = _positive_int(params.get("n"), f"{kind}: n")
    if kind == "cycle":
        if n < 3:
            raise NetworkError("cycle: n must be at least 3")
        graph = nx.cycle_graph(n)
    elif kind == "path":
        graph = nx.path_graph(n)
    elif kind == "random_geometric":
        radius = _float_param(params.get("radius"), f"{kind}: radius")
        if not 0.0 < radius <= math.sqrt(2.0):
            raise NetworkError("random_geometric: radius must lie in (0, sqrt(2)]")
        graph = nx.random_geometric_graph(n, radius, dim=2, seed=seed)
    else:
        p_link = _float_param(params.get("p_link"), f"{kind}: p_link")
        if not 0.0 <= p_link <= 1.0:
            raise NetworkError("erdos_renyi: p_link must lie in [0, 1]")
        graph = nx.gnp_random_graph(n, p_link, seed=seed)
    logger.debug("Generated %s network with n=%d", kind, n)
    return _from_graph(graph, n, kind)


def _from_graph(
    graph: nx.Graph, n: int, kind: str, *, lattice_shape: tuple[int, int] | None = None
) -> Network:
    matrix = nx.to_scipy_sparse_array(
        graph, nodelist=range(n), dtype=np.int8, format="csr"
    )
    return Network(matrix, kind=kind, lattice_shape=lattice_shape)


def _lattice_shape(params: Mapping[str, Any]) -> tuple[int, int]:
    if "rows" in params or "cols" in params:
        rows = _positive_int(params.get("rows"), "grid_lattice: rows")
        cols = _positive_int(params.get("cols"), "grid_lattice: cols")
        if "n" in params and params["n"] != rows * cols:
            raise NetworkError("grid_lattice: n must equal rows * cols")
        return rows, cols
    n = _positive_int(params.get("n"), "grid_lattice: n")
    side = math.isqrt(n)
    if side * side != n:
        raise NetworkError("grid_lattice: n must be a perfect square without rows/cols")
    return side, side


def _positive_int(value: Any, label: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise NetworkError(f"{label} must be an integer")
    if value < 1:
        raise NetworkError(f"{label} must be >= 1")
    return int(value)


def _float_param(value: Any, label: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.number)):
        raise NetworkError(f"{label} must be numeric")
    return float(value)


def read_edge_list(path: Path | str, n: int | None = None) -> Network:
    """Read a 1-indexed ``i j`` edge list; ``# nodes: n`` fixes the node count."""
    path = Path(path)
    declared: int | None = None
    pairs: list[tuple[int, int]] = []
    for line_number, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            if key.strip() == "nodes":
                try:
                    declared = int(value)
                except ValueError as error:
                    raise NetworkError(
                        f"{path}:{line_number}: invalid node count header"
                    ) from error
            continue
        tokens = line.split()
        if len(tokens) != 2:
            raise NetworkError(f"{path}:{line_number}: expected 'i j', got {line!r}")
        try:
            i, j = int(tokens[0]), int(tokens[1])
        except ValueError as error:
            raise NetworkError(
                f"{path}:{line_number}: node ids must be integers"
            ) from error
        if i < 1 or j < 1:
            raise NetworkError(f"{path}:{line_number}: node ids are 1-indexed")
        pairs.append((i - 1, j - 1))

    count = n if n is not None else declared
    if count is None:
        count = max((max(pair) for pair in pairs), default=-1) + 1
    return network_from_edges(count, sorted(set(pairs)))


def write_edge_list(net: Network, path: Path | str) -> Path:
    path = Path(path)
    lines = [f"# nodes: {net.n}"]
    lines.extend(f"{i + 1} {j + 1}" for i, j in net.edges())
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def shortest_path_distances(net: Network, source: int) -> np.ndarray:
    """BFS distances from ``source``; unreachable nodes hold ``INFINITY``."""
    source = check_node(net, source)
    if net.has_distance_cache():
        return net.distance_matrix()[source].copy()
    return csgraph.shortest_path(
        net.adjacency, method="D", directed=False, unweighted=True, indices=source
    )


def set_distance(net: Network, a: Iterable[int], b: Iterable[int]) -> float:
    """``min d(i, j)`` over ``i in a`` and ``j in b`` (0-based node ids)."""
    sources = _node_array(net, a, "A")
    targets = _node_array(net, b, "B")
    if np.intersect1d(sources, targets).size:
        return 0.0
    nearest = csgraph.dijkstra(
        net.adjacency, directed=False, unweighted=True, indices=sources, min_only=True
    )
    return float(nearest[targets].min())


def in_distance_set(net: Network, a: Iterable[int], b: Iterable[int], s: float) -> bool:
    """Whether ``(a, b)`` belongs to the separated-pair collection at distance s."""
    return set_distance(net, a, b) >= s


def _bounded_distances(net: Network, sources: np.ndarray, limit: float) -> np.ndarray:
    return csgraph.dijkstra(
        net.adjacency,
        directed=False,
        unweighted=True,
        indices=sources,
        limit=limit,
    )


def _source_chunks(net: Network) -> Iterable[np.ndarray]:
    chunk = max(1, _CHUNK_CELLS // net.n)
    for start in range(0, net.n, chunk):
        yield np.arange(start, min(start + chunk, net.n))


def shell_stats(net: Network, s_max: int) -> ShellStats:
    """Exact shell sizes for ``s = 0..s_max``; unreachable pairs are ignored."""
    if s_max < 0:
        raise NetworkError("s_max must be >= 0")
    width = s_max + 1
    per_node = np.zeros((net.n, width), dtype=np.int64)
    for sources in _source_chunks(net):
        distances = _bounded_distances(net, sources, s_max + 0.5)
        rows, cols = np.nonzero(np.isfinite(distances))
        flat = rows * width + distances[rows, cols].astype(np.int64)
        counts = np.bincount(flat, minlength=sources.size * width)
        per_node[sources] = counts.reshape(sources.size, width)
    average = per_node.sum(axis=0) / net.n
    return ShellStats(per_node_shell_sizes=per_node, avg_shell_size=average)


def average_shell_sizes(net: Network, s_max: int | None = None) -> np.ndarray:
    """Average shell sizes up to ``s_max`` (or the largest finite distance).

    Only the node-averaged profile is kept, so memory stays linear in n.
    """
    limit = np.inf if s_max is None else s_max + 0.5
    totals = np.zeros(1 if s_max is None else s_max + 1, dtype=np.int64)
    for sources in _source_chunks(net):
        distances = _bounded_distances(net, sources, limit)
        finite = distances[np.isfinite(distances)].astype(np.int64)
        counts = np.bincount(finite)
        if counts.size > totals.size:
            totals = np.pad(totals, (0, counts.size - totals.size))
        totals[: counts.size] += counts
    return totals / net.n


def denseness_decay_sum(net: Network, decay: DecayLike) -> float:
    """``(1/n) * sum_{s>=1} avg_shell(s) * decay(s)``."""
    averages = average_shell_sizes(net, decay.support)
    total = 0.0
    for s in range(1, averages.size):
        if averages[s] > 0:
            total += float(averages[s]) * decay.value(s)
    return total / net.n


def shell_matrices(net: Network, radius: int) -> list[sparse.csr_array]:
    """0/1 matrices ``S_s`` with ``S_s[i, j] = 1`` iff ``d(i, j) = s``, s <= radius."""
    if radius < 0:
        raise NetworkError("radius must be >= 0")
    adjacency = net.adjacency.astype(np.int64)
    reached = sparse.eye_array(net.n, format="csr", dtype=np.int64)
    frontier = reached
    shells = [reached.astype(np.float64)]
    for _ in range(radius):
        touched = (frontier @ adjacency).sign()
        new = (touched - touched.multiply(reached)).tocsr()
        new.eliminate_zeros()
        reached = (reached + new).tocsr()
        frontier = new
        shells.append(new.astype(np.float64))
    for shell in shells:
        shell.sort_indices()
    return shells


def verify_sparsity_window(
    b_n: int | None,
    n: int,
    p: int,
    d: int,
    eta: float,
    c1: float,
    c2: float,
) -> SparsityWindow:
    """Evaluate the block-size window for moment order p and dimension d."""
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p <= 2:
        raise NetworkError("p must be an integer greater than 2")
    if d < 1:
        raise NetworkError("d must be >= 1")
    if not 0.0 < eta < 1.0:
        raise NetworkError("eta must lie in (0, 1)")
    if c1 <= 0 or c2 <= 0:
        raise NetworkError("c1 and c2 must be positive")
    if n < 1:
        raise NetworkError("n must be >= 1")
    core = 1.0 / p + d / (p * p - 1.0)
    beta1 = 2.0 * core + eta
    beta2 = 1.0 - core - eta
    return SparsityWindow(
        n=n,
        p=int(p),
        d=d,
        eta=eta,
        beta1=beta1,
        beta2=beta2,
        lower=c1 * n**beta1,
        upper=c2 * n**beta2,
        block_size=b_n,
    )


def find_block_partition(net: Network, b_n: int, separation: float) -> BlockPartition:
    """Search for equal blocks of size ``b_n`` with in-block distance >= C*b_n.

    Cycles, paths and lattices use stride constructions; other graphs use a
    greedy farthest-point assignment that reports the separation it reached.
    """
    if isinstance(b_n, bool) or not isinstance(b_n, (int, np.integer)):
        raise NetworkError("b_n must be an integer")
    if not 1 <= b_n <= net.n:
        raise NetworkError(f"b_n must lie in 1..{net.n}")
    b_n = int(b_n)
    required = separation * b_n
    if net.kind in {"cycle", "path"}:
        partition = _stride_partition(net, b_n, required)
    elif net.kind == "grid_lattice" and net.lattice_shape is not None:
        partition = _lattice_partition(net, b_n, required)
        if partition is None:
            partition = _greedy_partition(net, b_n, required)
    else:
        partition = _greedy_partition(net, b_n, required)
    if partition.has_tail:
        logger.debug(
            "b_n=%d does not divide n=%d; %d tail node(s) flagged",
            b_n,
            net.n,
            partition.tail.size,
        )
    return partition


def _stride_partition(net: Network, b_n: int, required: float) -> BlockPartition:
    stride = net.n // b_n
    covered = stride * b_n
    blocks = tuple(
        np.arange(start, covered, stride, dtype=np.int64) for start in range(stride)
    )
    achieved = INFINITY if b_n == 1 else float(stride)
    return BlockPartition(
        blocks=blocks,
        block_size=b_n,
        separation=achieved,
        required_separation=required,
        tail=np.arange(covered, net.n, dtype=np.int64),
        method="stride",
    )


def _lattice_partition(
    net: Network, b_n: int, required: float
) -> BlockPartition | None:
    assert net.lattice_shape is not None
    rows, cols = net.lattice_shape
    best: tuple[float, int, int] | None = None
    for count_rows in range(1, b_n + 1):
        if b_n % count_rows:
            continue
        count_cols = b_n // count_rows
        if count_rows > rows or count_cols > cols:
            continue
        stride_rows, stride_cols = rows // count_rows, cols // count_cols
        tail = net.n - stride_rows * stride_cols * b_n
        if tail >= b_n:
            continue
        gaps = [stride_rows] if count_rows > 1 else []
        gaps += [stride_cols] if count_cols > 1 else []
        achieved = float(min(gaps)) if gaps else INFINITY
        if best is None or achieved > best[0]:
            best = (achieved, count_rows, count_cols)
    if best is None:
        return None

    achieved, count_rows, count_cols = best
    stride_rows, stride_cols = rows // count_rows, cols // count_cols
    grid = np.arange(net.n, dtype=np.int64).reshape(rows, cols)
    blocks = tuple(
        np.sort(
            grid[
                u : stride_rows * count_rows : stride_rows,
                v : stride_cols * count_cols : stride_cols,
            ].ravel()
        )
        for u in range(stride_rows)
        for v in range(stride_cols)
    )
    assigned = np.concatenate(blocks)
    tail = np.setdiff1d(np.arange(net.n, dtype=np.int64), assigned)
    return BlockPartition(
        blocks=blocks,
        block_size=b_n,
        separation=achieved,
        required_separation=required,
        tail=tail,
        method="lattice",
    )


def _greedy_partition(net: Network, b_n: int, required: float) -> BlockPartition:
    distances = net.distance_matrix()
    unassigned = np.ones(net.n, dtype=bool)
    blocks: list[np.ndarray] = []
    for _ in range(net.n // b_n):
        first = int(np.flatnonzero(unassigned)[0])
        members = [first]
        unassigned[first] = False
        nearest = distances[first].copy()
        for _ in range(b_n - 1):
            candidates = np.where(unassigned, nearest, -1.0)
            chosen = int(np.argmax(candidates))
            members.append(chosen)
            unassigned[chosen] = False
            nearest = np.minimum(nearest, distances[chosen])
        blocks.append(np.asarray(sorted(members), dtype=np.int64))
    return BlockPartition(
        blocks=tuple(blocks),
        block_size=b_n,
        separation=_exact_separation(distances, blocks),
        required_separation=required,
        tail=np.flatnonzero(unassigned).astype(np.int64),
        method="greedy",
    )


def _exact_separation(distances: np.ndarray, blocks: Sequence[np.ndarray]) -> float:
    achieved = INFINITY
    for block in blocks:
        if block.size < 2:
            continue
        inner = distances[np.ix_(block, block)].copy()
        np.fill_diagonal(inner, INFINITY)
        achieved = min(achieved, float(inner.min()))
    return achieved


def partition_violations(
    net: Network, partition: BlockPartition, min_distance: float
) -> list[tuple[int, int, float]]:
    """In-block pairs closer than ``min_distance``, found by bounded BFS."""
    violations: list[tuple[int, int, float]] = []
    if not math.isfinite(min_distance):
        min_distance = float(net.n)
    limit = min_distance - 0.5
    if limit < 0:
        return violations
    for block in partition.blocks:
        if block.size < 2:
            continue
        distances = _bounded_distances(net, block, limit)[:, block]
        for row, i in enumerate(block.tolist()):
            for col, j in enumerate(block.tolist()):
                if i < j and distances[row, col] < min_distance:
                    violations.append((i, j, float(distances[row, col])))
    return violations


@dataclass(frozen=True)
class NetworkFamily:
    """Generator kind plus its parameters other than the node count."""

    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in _GENERATOR_KEYS:
            raise NetworkError(
                f"unknown network kind '{self.kind}'; expected one of: "
                f"{', '.join(NETWORK_KINDS)}"
            )
        if "n" in self.params:
            raise NetworkError("network family parameters must not fix n")
        unknown = sorted(set(self.params) - _GENERATOR_KEYS[self.kind])
        if unknown:
            raise NetworkError(
                f"{self.kind}: unknown parameter(s): {', '.join(unknown)}"
            )

    def build(self, n: int, master_seed: int) -> Network:
        seed = int_seed(stream_seed(master_seed, "network", n))
        return generate(self.kind, {**self.params, "n": n}, seed=seed)


@dataclass(frozen=True)
class AssumptionConstants:
    """Moment order p, parameter dimension d and the window/separation knobs."""

    p: int = 5
    d: int = 1
    eta: float = 0.05
    c1: float = 0.5
    c2: float = 2.0
    separation: float = 0.5
    amplitude: float = 3.0
    psi_constant: float = 1.0

    def window(self, n: int, b_n: int | None = None) -> SparsityWindow:
        return verify_sparsity_window(
            b_n, n, self.p, self.d, self.eta, self.c1, self.c2
        )

    @property
    def delta_exponent(self) -> float:
        """Exponent of the default net schedule ``delta_n = n^(-p/(p^2-1))``."""
        return self.p / (self.p * self.p - 1.0)

    def delta_for(self, n: int) -> float:
        return float(n ** (-self.delta_exponent))


@dataclass(frozen=True)
class SparsityAudit:
    """Window and partition outcome for one network."""

    n: int
    window: SparsityWindow
    partition: BlockPartition | None
    note: str

    @property
    def feasible(self) -> bool:
        return (
            self.window.feasible
            and self.partition is not None
            and self.partition.feasible
        )


def sparsity_audit(net: Network, constants: AssumptionConstants) -> SparsityAudit:
    """Pick the smallest admissible block size and search for a partition."""
    window = constants.window(net.n)
    block_size = window.smallest_block_size
    if not window.exponents_ordered:
        note = (
            f"window exponents out of order: beta1={window.beta1:.4f} "
            f"> beta2={window.beta2:.4f}"
        )
        return SparsityAudit(net.n, window, None, note)
    if block_size is None or block_size > net.n:
        note = (
            f"no integer block size in [{window.lower:.3f}, {window.upper:.3f}] "
            f"at n={net.n}"
        )
        return SparsityAudit(net.n, window, None, note)
    window = constants.window(net.n, block_size)
    try:
        partition = find_block_partition(net, block_size, constants.separation)
    except NetworkTooLargeError as error:
        return SparsityAudit(net.n, window, None, str(error))
    note = (
        f"b_n={block_size}, separation {partition.separation:g} "
        f"vs required {partition.required_separation:g} ({partition.method})"
    )
    return SparsityAudit(net.n, window, partition, note)
