"""Conditionally dependent network processes, decay profiles and mean oracles."""

from __future__ import annotations

import csv
import logging
import math
import threading
import weakref
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import integrate, sparse, stats

from netulln.errors import ProcessSpecError
from netulln.funcspace import BoundedLipschitzFamily, BoundedLipschitzFunction
from netulln.netgraph import (
    Network,
    check_node,
    shell_matrices,
    shortest_path_distances,
)
from netulln.rng import SeedLike, as_seed_sequence, child, generator, seed_record

logger = logging.getLogger(__name__)

PROCESS_KINDS = ("network_ma", "geometric_weights")
NOISE_LAWS = ("uniform_bounded", "clipped_gaussian", "rademacher")
DECAY_FORMS = ("exact_table", "power_bound")

SHOCK_STREAM = 0
INNOVATION_STREAM = 1
ORACLE_STREAM = 2
ORACLE_SHOCK_STREAM = 3
PAIR_STREAM = 4

_BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class NoiseLaw:
    """Bounded, symmetric, mean-zero law for innovations or common shocks."""

    name: str = "uniform_bounded"
    bound: float = 1.0
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.name not in NOISE_LAWS:
            raise ProcessSpecError(
                f"unknown law '{self.name}'; expected one of: {', '.join(NOISE_LAWS)}"
            )
        if not (math.isfinite(self.bound) and self.bound > 0):
            raise ProcessSpecError("law bound must be a positive finite number")
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise ProcessSpecError("law scale must be a positive finite number")

    def sample(
        self, rng: np.random.Generator, size: int | tuple[int, ...]
    ) -> np.ndarray:
        if self.name == "uniform_bounded":
            return rng.uniform(-self.bound, self.bound, size)
        if self.name == "clipped_gaussian":
            draws = self.scale * rng.standard_normal(size)
            return np.clip(draws, -self.bound, self.bound)
        signs = 2.0 * rng.integers(0, 2, size=size) - 1.0
        return self.bound * signs

    def variance(self) -> float:
        if self.name == "uniform_bounded":
            return self.bound**2 / 3.0
        if self.name == "rademacher":
            return self.bound**2
        c = self.bound / self.scale
        inside = (2.0 * stats.norm.cdf(c) - 1.0) - 2.0 * c * stats.norm.pdf(c)
        return float(self.scale**2 * inside + 2.0 * self.bound**2 * stats.norm.sf(c))

    def abs_moment(self, p: float) -> float:
        """``E|e|^p``."""
        if self.name == "uniform_bounded":
            return self.bound**p / (p + 1.0)
        if self.name == "rademacher":
            return self.bound**p
        return self.expect(lambda e: abs(e) ** p)

    def expect(self, fn: Callable[[float], float]) -> float:
        """``E fn(e)`` by quadrature, including the atoms of the clipped law."""
        if self.name == "rademacher":
            return 0.5 * (fn(-self.bound) + fn(self.bound))
        if self.name == "uniform_bounded":
            value, _ = integrate.quad(
                fn, -self.bound, self.bound, limit=200, epsabs=1e-13, points=[0.0]
            )
            return float(value / (2.0 * self.bound))
        scale = self.scale
        value, _ = integrate.quad(
            lambda e: fn(e) * stats.norm.pdf(e / scale) / scale,
            -self.bound,
            self.bound,
            limit=200,
            epsabs=1e-13,
        )
        tail = float(stats.norm.sf(self.bound / scale))
        return float(value + tail * (fn(-self.bound) + fn(self.bound)))


@dataclass(frozen=True)
class ProcessSpec:
    """``Y_i = mu + rho0_n * C + sum_{d(i,j) <= r} w(d(i,j)) * e_j``."""

    kind: str = "network_ma"
    radius: int = 1
    weights: tuple[float, ...] | None = None
    rho: float | None = None
    shock_loading: float = 0.0
    shock_decay: float = 0.0
    location: float = 0.0
    innovation: NoiseLaw = field(default_factory=NoiseLaw)
    shock: NoiseLaw = field(default_factory=NoiseLaw)

    def __post_init__(self) -> None:
        if self.kind not in PROCESS_KINDS:
            raise ProcessSpecError(
                f"unknown process kind '{self.kind}'; expected one of: "
                f"{', '.join(PROCESS_KINDS)}"
            )
        if isinstance(self.radius, bool) or not isinstance(self.radius, int):
            raise ProcessSpecError("radius must be an integer")
        if self.radius < 0:
            raise ProcessSpecError("radius must be >= 0")
        if self.kind == "network_ma":
            if self.rho is not None:
                raise ProcessSpecError("network_ma takes weights, not rho")
            if self.weights is not None:
                if len(self.weights) != self.radius + 1:
                    raise ProcessSpecError(
                        f"network_ma needs radius + 1 = {self.radius + 1} weights, "
                        f"got {len(self.weights)}"
                    )
                weights = tuple(float(w) for w in self.weights)
                object.__setattr__(self, "weights", weights)
        else:
            if self.weights is not None:
                raise ProcessSpecError("geometric_weights takes rho, not weights")
            if self.rho is None or not abs(self.rho) < 1:
                raise ProcessSpecError("geometric_weights needs rho with |rho| < 1")
        for label in ("shock_loading", "location"):
            if not math.isfinite(getattr(self, label)):
                raise ProcessSpecError(f"{label} must be finite")
        if not (math.isfinite(self.shock_decay) and self.shock_decay >= 0):
            raise ProcessSpecError("shock_decay must be >= 0")

    @property
    def weight_table(self) -> tuple[float, ...]:
        if self.kind == "geometric_weights":
            assert self.rho is not None
            return tuple(float(self.rho**s) for s in range(self.radius + 1))
        if self.weights is None:
            return (1.0,) * (self.radius + 1)
        return self.weights

    def weight(self, s: int) -> float:
        if s < 0:
            raise ProcessSpecError("distance must be >= 0")
        return self.weight_table[s] if s <= self.radius else 0.0

    def loading(self, n: int) -> float:
        """Shock loading for a row of size n."""
        if self.shock_decay == 0:
            return self.shock_loading
        return self.shock_loading * n ** (-self.shock_decay)

    def conditional_location(self, n: int, shock: float) -> float:
        return self.location + self.loading(n) * shock

    def centered_bound(self, max_shell_sizes: Sequence[int]) -> float:
        """Bound on ``|Y_i - E[Y_i | C]|`` given the largest shell sizes."""
        return self.innovation.bound * sum(
            abs(w) * size for w, size in zip(self.weight_table, max_shell_sizes)
        )

    def value_bound(self, n: int, max_shell_sizes: Sequence[int]) -> float:
        return abs(self.loading(n)) * self.shock.bound + self.centered_bound(
            max_shell_sizes
        )


@dataclass(frozen=True, eq=False)
class MixingOperator:
    """Shell matrices of one network up to the process radius."""

    shells: tuple[sparse.csr_array, ...]
    signatures: np.ndarray

    @property
    def radius(self) -> int:
        return len(self.shells) - 1

    @property
    def max_shell_sizes(self) -> tuple[int, ...]:
        return tuple(int(v) for v in self.signatures.max(axis=0))

    def apply(self, weights: Sequence[float], innovations: np.ndarray) -> np.ndarray:
        """``sum_s w(s) * (S_s @ e)``, accumulated shell by shell."""
        total = np.zeros(innovations.shape, dtype=np.float64)
        for weight, shell in zip(weights, self.shells):
            total = total + weight * (shell @ innovations)
        return total

    def restricted(
        self, nodes: np.ndarray
    ) -> tuple[list[sparse.csr_array], np.ndarray]:
        """Shell rows for ``nodes`` and the innovation columns they touch."""
        rows = [shell[nodes] for shell in self.shells]
        support = np.unique(np.concatenate([row.indices for row in rows]))
        return [row[:, support].tocsr() for row in rows], support


_MIXING_CACHE: weakref.WeakKeyDictionary[Network, dict[int, MixingOperator]] = (
    weakref.WeakKeyDictionary()
)
_MIXING_LOCK = threading.Lock()


def mixing_matrices(net: Network, spec: ProcessSpec) -> MixingOperator:
    """Shell matrices for ``spec.radius``, built once per network."""
    with _MIXING_LOCK:
        per_network = _MIXING_CACHE.setdefault(net, {})
        operator = per_network.get(spec.radius)
        if operator is None:
            shells = tuple(shell_matrices(net, spec.radius))
            signatures = np.stack(
                [np.diff(shell.indptr) for shell in shells], axis=1
            ).astype(np.int64)
            operator = MixingOperator(shells=shells, signatures=signatures)
            per_network[spec.radius] = operator
        return operator


@dataclass(frozen=True)
class SampleDraw:
    """One row ``{Y_i}`` with its common shock and the seed that produced it."""

    values: np.ndarray
    common_shock: np.ndarray
    seed_record: tuple[int, ...]
    centered: np.ndarray
    conditional_location: float

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def to_csv(self, path: Path | str) -> Path:
        """Write ``node_id`` (1-indexed), value and shock columns."""
        path = Path(path)
        shock_headers = [f"shock_{k}" for k in range(self.common_shock.size)]
        shocks = [repr(float(value)) for value in self.common_shock]
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["node_id", "value", "centered", *shock_headers])
            for node, (value, centered) in enumerate(zip(self.values, self.centered)):
                writer.writerow(
                    [node + 1, repr(float(value)), repr(float(centered)), *shocks]
                )
        return path


def draw_common_shock(spec: ProcessSpec, seed: SeedLike) -> np.ndarray:
    return spec.shock.sample(generator(child(seed, SHOCK_STREAM)), 1)


def simulate(
    net: Network,
    spec: ProcessSpec,
    seed: SeedLike,
    *,
    common_shock: Any = None,
    mixing: MixingOperator | None = None,
) -> SampleDraw:
    """Draw one row; passing ``common_shock`` holds the shock fixed."""
    sequence = as_seed_sequence(seed)
    if common_shock is None:
        shock = draw_common_shock(spec, sequence)
    else:
        shock = np.atleast_1d(np.asarray(common_shock, dtype=np.float64))
        if shock.shape != (1,):
            raise ProcessSpecError("common shock must be a single value")
    mixing = mixing or mixing_matrices(net, spec)
    innovations = spec.innovation.sample(
        generator(child(sequence, INNOVATION_STREAM)), net.n
    )
    centered = mixing.apply(spec.weight_table, innovations)
    location = spec.conditional_location(net.n, float(shock[0]))
    values = location + centered

    bound = spec.value_bound(net.n, mixing.max_shell_sizes)
    worst = float(np.max(np.abs(values - spec.location)))
    if worst > bound + _BOUND_SLACK:
        raise ProcessSpecError(
            f"simulated value exceeds its bound: {worst} > {bound}"
        )
    return SampleDraw(
        values=values,
        common_shock=shock,
        seed_record=seed_record(sequence),
        centered=centered,
        conditional_location=location,
    )


def centered_draw(draw: SampleDraw) -> np.ndarray:
    """``X_i = Y_i - E[Y_i | C]``, bounded and conditionally mean zero."""
    return draw.centered


@dataclass(frozen=True)
class DecayProfile:
    """Dependence envelope by distance: an exact table or ``A * s^(-p/(p-1))``.

    Tables beyond their last entry take ``tail``; ``tail=None`` leaves them
    undefined there.
    """

    form: str
    table: tuple[float, ...] = ()
    tail: float | None = 0.0
    amplitude: float | None = None
    p: int | None = None

    def __post_init__(self) -> None:
        if self.form not in DECAY_FORMS:
            raise ProcessSpecError(f"unknown decay form '{self.form}'")
        if self.form == "exact_table":
            if not self.table:
                raise ProcessSpecError("exact decay table must be nonempty")
            values = [*self.table, *([] if self.tail is None else [self.tail])]
            if any(not math.isfinite(v) or v < 0 for v in values):
                raise ProcessSpecError("decay values must be finite and >= 0")
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        else:
            if self.amplitude is None or self.amplitude <= 0:
                raise ProcessSpecError("power bound needs a positive amplitude A")
            if self.p is None or self.p <= 1:
                raise ProcessSpecError("power bound needs p > 1")

    @property
    def exponent(self) -> float:
        if self.p is None:
            raise ProcessSpecError("decay profile carries no p")
        return self.p / (self.p - 1.0)

    @property
    def support(self) -> int | None:
        """Largest distance that can carry a nonzero coefficient."""
        if self.form == "exact_table" and self.tail == 0.0:
            return len(self.table) - 1
        return None

    def value(self, s: int) -> float:
        if s < 0:
            raise ProcessSpecError("distance must be >= 0")
        if self.form == "power_bound":
            assert self.amplitude is not None
            return 1.0 if s == 0 else min(1.0, self.amplitude * s ** (-self.exponent))
        if s < len(self.table):
            return self.table[s]
        if self.tail is None:
            raise ProcessSpecError(f"decay is undefined at distance {s}")
        return self.tail

    def values(self, s_max: int) -> np.ndarray:
        return np.array([self.value(s) for s in range(s_max + 1)])

    def violations(self) -> list[str]:
        """Broken profile invariants: a leading one and non-increasing values."""
        if self.form == "power_bound":
            return []
        problems: list[str] = []
        if self.table[0] != 1.0:
            problems.append(f"decay at distance 0 is {self.table[0]}, expected 1")
        sequence = [*self.table, *([] if self.tail is None else [self.tail])]
        for s in range(1, len(sequence)):
            if sequence[s] > sequence[s - 1]:
                problems.append(
                    f"decay increases from s={s - 1} ({sequence[s - 1]}) "
                    f"to s={s} ({sequence[s]})"
                )
        return problems

    def power_bound_violations(
        self, amplitude: float, p: int, s_max: int
    ) -> list[int]:
        """Distances in ``1..s_max`` where the profile exceeds ``A * s^(-p/(p-1))``."""
        exponent = p / (p - 1.0)
        limit = s_max if self.support is None else min(s_max, self.support)
        return [
            s
            for s in range(1, limit + 1)
            if self.value(s) > amplitude * s ** (-exponent) * (1.0 + 1e-12)
        ]


def decay_from_table(values: Sequence[float], tail: float | None = 0.0) -> DecayProfile:
    return DecayProfile(form="exact_table", table=tuple(values), tail=tail)


def theoretical_decay(spec: ProcessSpec) -> DecayProfile:
    """Exact dependency-graph profile: one up to ``2r``, zero beyond."""
    return decay_from_table([1.0] * (2 * spec.radius + 1), tail=0.0)


def ideal_decay(spec: ProcessSpec, p: int) -> DecayProfile:
    """Power envelope of ``|rho|^s`` for untruncated geometric weights."""
    if spec.kind != "geometric_weights" or spec.rho is None:
        raise ProcessSpecError("ideal_decay applies to geometric_weights only")
    if p <= 1:
        raise ProcessSpecError("p must be > 1")
    exponent = p / (p - 1.0)
    magnitude = abs(spec.rho)
    if magnitude == 0:
        return DecayProfile(form="power_bound", amplitude=1.0, p=p)
    peak = exponent / -math.log(magnitude)
    candidates = {max(1, math.floor(peak)), max(1, math.ceil(peak)), 1}
    amplitude = max(magnitude**s * s**exponent for s in candidates)
    return DecayProfile(form="power_bound", amplitude=amplitude, p=p)


@dataclass(frozen=True)
class OracleEstimate:
    """Mean vector with its standard error; ``draws == 0`` means exact."""

    mean: np.ndarray
    se: np.ndarray
    draws: int
    analytic: bool = False

    @property
    def value(self) -> float:
        if self.mean.size != 1:
            raise ProcessSpecError("oracle estimate is not scalar")
        return float(self.mean[0])

    @property
    def max_se(self) -> float:
        return float(self.se.max()) if self.se.size else 0.0


def summarize_draws(values: np.ndarray) -> OracleEstimate:
    """Column means and standard errors; constant columns are returned exactly."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    count = values.shape[0]
    mean = values.mean(axis=0)
    se = values.std(axis=0, ddof=1) / math.sqrt(count) if count > 1 else np.zeros(
        values.shape[1]
    )
    flat = np.all(values == values[0], axis=0)
    mean[flat] = values[0, flat]
    se[flat] = 0.0
    return OracleEstimate(mean=mean, se=se, draws=count)


class InnovationSumSampler:
    """Monte Carlo draws of each node's innovation sum, grouped by signature.

    The law of ``Y_i - E[Y_i | C]`` depends only on the shell sizes around
    i within the radius, so nodes sharing that signature share one sample.
    Samples are drawn lazily under a lock and never change afterwards.
    """

    def __init__(
        self,
        net: Network,
        spec: ProcessSpec,
        n_mc: int,
        seed: SeedLike,
        *,
        mixing: MixingOperator | None = None,
    ) -> None:
        if n_mc < 2:
            raise ProcessSpecError("n_mc must be >= 2")
        self.net = net
        self.spec = spec
        self.n_mc = n_mc
        self.seed = as_seed_sequence(seed)
        operator = mixing or mixing_matrices(net, spec)
        signatures, inverse, counts = np.unique(
            operator.signatures, axis=0, return_inverse=True, return_counts=True
        )
        self.signatures = signatures
        self.node_group = np.asarray(inverse).reshape(-1)
        self.group_counts = counts
        self._samples: dict[int, np.ndarray] = {}
        self._shocks: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    @property
    def group_count(self) -> int:
        return int(self.signatures.shape[0])

    @property
    def group_weights(self) -> np.ndarray:
        return self.group_counts / self.net.n

    def group_of(self, node: int) -> int:
        return int(self.node_group[check_node(self.net, node)])

    def single_innovation(self, group: int) -> bool:
        signature = self.signatures[group]
        return bool(signature[0] == 1 and not signature[1:].any())

    def samples(self, group: int) -> np.ndarray:
        with self._lock:
            cached = self._samples.get(group)
            if cached is None:
                cached = self._draw(group)
                self._samples[group] = cached
            return cached

    def shock_samples(self, group: int) -> np.ndarray:
        with self._lock:
            cached = self._shocks.get(group)
            if cached is None:
                rng = generator(child(self.seed, ORACLE_SHOCK_STREAM, group))
                cached = self.spec.shock.sample(rng, self.n_mc)
                cached.setflags(write=False)
                self._shocks[group] = cached
            return cached

    def warm_up(self, *, with_shocks: bool = False) -> None:
        for group in range(self.group_count):
            self.samples(group)
            if with_shocks:
                self.shock_samples(group)

    def _draw(self, group: int) -> np.ndarray:
        rng = generator(child(self.seed, ORACLE_STREAM, group))
        sizes = [int(size) for size in self.signatures[group]]
        innovations = self.spec.innovation.sample(rng, (self.n_mc, sum(sizes)))
        total = np.zeros(self.n_mc, dtype=np.float64)
        column = 0
        for weight, size in zip(self.spec.weight_table, sizes):
            if size:
                block = innovations[:, column : column + size]
                total = total + weight * block.sum(axis=1)
            column += size
        total.setflags(write=False)
        return total


def _constant_estimate(family: BoundedLipschitzFamily) -> OracleEstimate | None:
    if family.constant_value is None:
        return None
    return OracleEstimate(
        mean=np.full(family.output_dim, family.constant_value),
        se=np.zeros(family.output_dim),
        draws=0,
        analytic=True,
    )


def _analytic_single(
    spec: ProcessSpec,
    family: BoundedLipschitzFamily,
    theta: np.ndarray,
    location: float,
) -> OracleEstimate:
    w0 = spec.weight(0)
    means = [
        spec.innovation.expect(
            lambda e, k=k: float(family.evaluate(location + w0 * e, theta)[0, k])
        )
        for k in range(family.output_dim)
    ]
    return OracleEstimate(
        mean=np.asarray(means), se=np.zeros(family.output_dim), draws=0, analytic=True
    )


def conditional_mean_oracle(
    net: Network,
    spec: ProcessSpec,
    family: BoundedLipschitzFamily,
    theta: Any,
    common_shock: Any,
    node: int,
    n_mc: int,
    seed: SeedLike,
    *,
    sampler: InnovationSumSampler | None = None,
    analytic: bool = True,
) -> OracleEstimate:
    """``E[f(Y_i, theta) | C]`` with the shock held at ``common_shock``."""
    if n_mc < 2:
        raise ProcessSpecError("n_mc must be >= 2")
    point = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    shock = float(np.atleast_1d(np.asarray(common_shock, dtype=np.float64))[0])
    node = check_node(net, node)
    exact = _constant_estimate(family)
    if exact is not None:
        return exact
    sampler = sampler or InnovationSumSampler(net, spec, n_mc, seed)
    location = spec.conditional_location(net.n, shock)
    group = sampler.group_of(node)
    if analytic and sampler.single_innovation(group):
        return _analytic_single(spec, family, point, location)
    return summarize_draws(family.evaluate(location + sampler.samples(group), point))


def unconditional_mean_oracle(
    net: Network,
    spec: ProcessSpec,
    family: BoundedLipschitzFamily,
    theta: Any,
    node: int,
    n_mc: int,
    seed: SeedLike,
    *,
    sampler: InnovationSumSampler | None = None,
    analytic: bool = True,
) -> OracleEstimate:
    """``E f(Y_i, theta)`` with the shock integrated out as well."""
    if n_mc < 2:
        raise ProcessSpecError("n_mc must be >= 2")
    point = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    node = check_node(net, node)
    exact = _constant_estimate(family)
    if exact is not None:
        return exact
    sampler = sampler or InnovationSumSampler(net, spec, n_mc, seed)
    loading = spec.loading(net.n)
    if loading == 0:
        return conditional_mean_oracle(
            net, spec, family, point, 0.0, node, n_mc, seed,
            sampler=sampler, analytic=analytic,
        )
    group = sampler.group_of(node)
    if analytic and sampler.single_innovation(group):
        w0 = spec.weight(0)
        means = [
            spec.shock.expect(
                lambda c, k=k: spec.innovation.expect(
                    lambda e: float(
                        family.evaluate(
                            spec.location + loading * c + w0 * e, point
                        )[0, k]
                    )
                )
            )
            for k in range(family.output_dim)
        ]
        return OracleEstimate(
            mean=np.asarray(means),
            se=np.zeros(family.output_dim),
            draws=0,
            analytic=True,
        )
    shocks = sampler.shock_samples(group)
    values = spec.location + loading * shocks + sampler.samples(group)
    return summarize_draws(family.evaluate(values, point))


@dataclass(frozen=True)
class CovarianceEstimate:
    """Largest sampled ``|Cov(f(Y_i), g(Y_j) | C)|`` at one distance, with its SE."""

    distance: int
    estimate: float
    se: float
    pair: tuple[int, int]
    reps: int
    common_shock: float
    per_pair: tuple[tuple[int, int, float, float], ...] = ()

    @property
    def z_score(self) -> float:
        if self.se == 0:
            return 0.0 if self.estimate == 0 else math.inf
        return self.estimate / self.se


def pairs_at_distance(
    net: Network, s: int, count: int, seed: SeedLike
) -> list[tuple[int, int]]:
    """Up to ``count`` node pairs at distance exactly s, sources in seeded order."""
    if s < 0:
        raise ProcessSpecError("distance must be >= 0")
    order = generator(child(seed, PAIR_STREAM)).permutation(net.n)
    pairs: list[tuple[int, int]] = []
    for source in order.tolist():
        distances = shortest_path_distances(net, source)
        matches = np.flatnonzero(distances == s)
        if matches.size:
            pairs.append((source, int(matches[0])))
            if len(pairs) == count:
                break
    if not pairs:
        raise ProcessSpecError(f"no node pair lies at distance {s}")
    return pairs


def _deviations(values: np.ndarray) -> np.ndarray:
    if np.all(values == values[0]):
        return np.zeros_like(values)
    return values - values.mean()


def empirical_cov_decay(
    net: Network,
    spec: ProcessSpec,
    f: BoundedLipschitzFunction,
    g: BoundedLipschitzFunction,
    s: int,
    n_reps: int,
    seed: SeedLike,
    *,
    n_pairs: int = 1,
    common_shock: Any = None,
) -> CovarianceEstimate:
    """Conditional covariance at distance s, shock fixed across replications."""
    if n_reps < 2:
        raise ProcessSpecError("n_reps must be >= 2")
    if n_pairs < 1:
        raise ProcessSpecError("n_pairs must be >= 1")
    sequence = as_seed_sequence(seed)
    pairs = pairs_at_distance(net, s, n_pairs, sequence)
    if common_shock is None:
        shock = float(draw_common_shock(spec, sequence)[0])
    else:
        shock = float(np.atleast_1d(np.asarray(common_shock, dtype=np.float64))[0])
    location = spec.conditional_location(net.n, shock)
    operator = mixing_matrices(net, spec)

    per_pair: list[tuple[int, int, float, float]] = []
    for index, (i, j) in enumerate(pairs):
        rows, support = operator.restricted(np.array([i, j]))
        rng = generator(child(sequence, INNOVATION_STREAM, index))
        innovations = spec.innovation.sample(rng, (support.size, n_reps))
        total = np.zeros((2, n_reps), dtype=np.float64)
        for weight, row in zip(spec.weight_table, rows):
            total = total + weight * (row @ innovations)
        left = _deviations(f(location + total[0]))
        right = _deviations(g(location + total[1]))
        products = left * right
        covariance = float(products.sum() / (n_reps - 1))
        se = float(products.std(ddof=1) / math.sqrt(n_reps))
        per_pair.append((i, j, covariance, se))

    i, j, covariance, se = max(per_pair, key=lambda item: abs(item[2]))
    return CovarianceEstimate(
        distance=s,
        estimate=abs(covariance),
        se=se,
        pair=(i, j),
        reps=n_reps,
        common_shock=shock,
        per_pair=tuple(per_pair),
    )


def psi_bound(
    f: BoundedLipschitzFunction,
    g: BoundedLipschitzFunction,
    a: int,
    b: int,
    c_const: float,
) -> float:
    """``C * a * b * (R_f + L_f) * (R_g + L_g)``."""
    for label, fn in (("f", f), ("g", g)):
        bounds = (getattr(fn, "sup_bound", None), getattr(fn, "lipschitz", None))
        if None in bounds:
            raise ProcessSpecError(f"{label} carries no certified sup/Lipschitz bounds")
    if a < 1 or b < 1:
        raise ProcessSpecError("group sizes a and b must be >= 1")
    if c_const < 0:
        raise ProcessSpecError("C must be >= 0")
    assert f.sup_bound is not None and f.lipschitz is not None
    assert g.sup_bound is not None and g.lipschitz is not None
    return c_const * a * b * (f.sup_bound + f.lipschitz) * (g.sup_bound + g.lipschitz)
