"""Uniform law of large numbers: sup-deviation over a delta-net and its n-grid runs."""

from __future__ import annotations

import logging
import math
import threading
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import Any, TypeVar

import numpy as np

from netulln.errors import OracleError, VerificationError
from netulln.funcspace import (
    BoundedLipschitzFamily,
    DeltaNet,
    ParamSpace,
    build_delta_net,
)
from netulln.netgraph import AssumptionConstants, Network, NetworkFamily, sparsity_audit
from netulln.process import (
    InnovationSumSampler,
    OracleEstimate,
    ProcessSpec,
    SampleDraw,
    conditional_mean_oracle,
    mixing_matrices,
    simulate,
    summarize_draws,
    unconditional_mean_oracle,
)
from netulln.rng import stream_seed

logger = logging.getLogger(__name__)

ORACLE_MODES = ("conditional", "unconditional")
MIN_ORACLE_FACTOR = 10

T = TypeVar("T")
R = TypeVar("R")
Mapper = Callable[[Callable[[T], R], Iterable[T]], Iterator[R]]


class RowMeanOracle:
    """``(1/n) * sum_i E f(Y_i, theta)``, conditional on a shock or integrated.

    Nodes are grouped by shell signature; each group is evaluated once at a
    representative node and weighted by its size.
    """

    def __init__(
        self,
        net: Network,
        spec: ProcessSpec,
        family: BoundedLipschitzFamily,
        n_mc: int,
        seed: Any,
        *,
        analytic: bool = True,
    ) -> None:
        self.net = net
        self.spec = spec
        self.family = family
        self.n_mc = n_mc
        self.seed = seed
        self.analytic = analytic
        self.sampler = InnovationSumSampler(net, spec, n_mc, seed)
        self._representatives = [
            int(np.flatnonzero(self.sampler.node_group == group)[0])
            for group in range(self.sampler.group_count)
        ]
        self._unconditional: dict[tuple[float, ...], OracleEstimate] = {}
        self._lock = threading.Lock()

    def warm_up(self, mode: str) -> None:
        self.sampler.warm_up(with_shocks=mode == "unconditional")

    def mean(
        self, theta: np.ndarray, mode: str, common_shock: float | None = None
    ) -> OracleEstimate:
        if mode not in ORACLE_MODES:
            raise VerificationError(
                f"oracle mode must be one of: {', '.join(ORACLE_MODES)}"
            )
        if mode == "unconditional":
            key = tuple(float(v) for v in theta)
            with self._lock:
                cached = self._unconditional.get(key)
            if cached is None:
                cached = self._combine(theta, mode, None)
                with self._lock:
                    self._unconditional[key] = cached
            return cached
        if common_shock is None:
            raise VerificationError("conditional oracle needs the realized shock")
        return self._combine(theta, mode, common_shock)

    def _combine(
        self, theta: np.ndarray, mode: str, common_shock: float | None
    ) -> OracleEstimate:
        estimates = []
        for node in self._representatives:
            if mode == "conditional":
                estimate = conditional_mean_oracle(
                    self.net, self.spec, self.family, theta, common_shock, node,
                    self.n_mc, self.seed, sampler=self.sampler, analytic=self.analytic,
                )
            else:
                estimate = unconditional_mean_oracle(
                    self.net, self.spec, self.family, theta, node,
                    self.n_mc, self.seed, sampler=self.sampler, analytic=self.analytic,
                )
            estimates.append(estimate)
        if len(estimates) == 1:
            return estimates[0]
        weights = self.sampler.group_weights
        mean = sum(w * e.mean for w, e in zip(weights, estimates))
        se = np.sqrt(sum((w * e.se) ** 2 for w, e in zip(weights, estimates)))
        return OracleEstimate(
            mean=np.asarray(mean),
            se=np.asarray(se),
            draws=self.n_mc,
            analytic=all(e.analytic for e in estimates),
        )


@dataclass(frozen=True)
class SupDeviation:
    """Largest net-point deviation plus the continuity slack ``2 * Lbar * delta``."""

    value: float
    argmax_index: int
    per_point: np.ndarray
    continuity_slack: float
    oracle_se: float


def sup_deviation(
    sample: SampleDraw,
    family: BoundedLipschitzFamily,
    net: DeltaNet,
    oracle_mode: str,
    oracle: RowMeanOracle,
    *,
    se_ceiling: float | None = None,
) -> SupDeviation:
    """``max_j |(1/n) sum_i f(Y_i, theta_j) - oracle mean at theta_j|``."""
    per_point = np.empty(net.cardinality, dtype=np.float64)
    worst_se = 0.0
    shock = float(sample.common_shock[0])
    for index, theta in enumerate(net.points):
        sample_mean = summarize_draws(family.evaluate(sample.values, theta)).mean
        expected = oracle.mean(theta, oracle_mode, shock)
        per_point[index] = float(np.max(np.abs(sample_mean - expected.mean)))
        worst_se = max(worst_se, expected.max_se)
    if se_ceiling is not None and worst_se > se_ceiling:
        raise OracleError(
            f"oracle standard error {worst_se:.3g} "
            f"exceeds the ceiling {se_ceiling:.3g}; "
            "raise oracle_draws"
        )
    slack = (
        math.inf
        if family.theta_lipschitz is None
        else 2.0 * family.theta_lipschitz * net.delta
    )
    index = int(np.argmax(per_point))
    return SupDeviation(
        value=float(per_point[index]),
        argmax_index=index,
        per_point=per_point,
        continuity_slack=slack,
        oracle_se=worst_se,
    )


@dataclass(frozen=True)
class UllnSettings:
    n_grid: tuple[int, ...]
    network: NetworkFamily
    process: ProcessSpec
    family: BoundedLipschitzFamily
    space: ParamSpace
    replications: int
    seed: int
    mode: str = "conditional"
    constants: AssumptionConstants = field(default_factory=AssumptionConstants)
    delta: float | None = None
    net_anchor: str = "endpoints"
    oracle_draws: int = 100_000
    oracle_se_ceiling: float | None = 0.01
    analytic_oracle: bool = True

    def delta_for(self, n: int) -> float:
        return self.delta if self.delta is not None else self.constants.delta_for(n)


@dataclass(frozen=True)
class UllnResult:
    n_grid: tuple[int, ...]
    per_n: tuple[tuple[float, float], ...]
    mode: str
    net_delta: tuple[float, ...]
    net_size: tuple[int, ...]
    continuity_slack: tuple[float, ...]
    oracle_se: float
    deviations: np.ndarray
    warnings: tuple[str, ...] = ()

    @property
    def medians(self) -> np.ndarray:
        return np.array([median for median, _ in self.per_n])

    @property
    def strictly_decreasing(self) -> bool:
        return is_strictly_decreasing(self.medians)

    @property
    def slope(self) -> float:
        """Log-log slope of the median deviation against n."""
        medians = self.medians
        if len(self.n_grid) < 2 or np.any(medians <= 0):
            return math.nan
        return float(np.polyfit(np.log(self.n_grid), np.log(medians), 1)[0])


def is_strictly_decreasing(values: Sequence[float]) -> bool:
    return all(later < earlier for earlier, later in zip(values, values[1:]))


def run_ulln_experiment(
    settings: UllnSettings, mapper: Mapper[Any, Any] = map
) -> UllnResult:
    """Sup-deviation quantiles across replications for every n in the grid."""
    if settings.mode not in ORACLE_MODES:
        raise VerificationError(f"mode must be one of: {', '.join(ORACLE_MODES)}")
    if settings.replications < 1:
        raise VerificationError("replications must be >= 1")
    if not settings.n_grid:
        raise VerificationError("n_grid must be nonempty")
    if settings.oracle_draws < MIN_ORACLE_FACTOR * settings.replications:
        raise VerificationError(
            f"oracle_draws must be at least {MIN_ORACLE_FACTOR}x replications "
            f"({MIN_ORACLE_FACTOR * settings.replications})"
        )

    warnings: list[str] = []
    per_n: list[tuple[float, float]] = []
    deltas: list[float] = []
    sizes: list[int] = []
    slacks: list[float] = []
    rows: list[np.ndarray] = []
    worst_se = 0.0

    for n in settings.n_grid:
        net = settings.network.build(n, settings.seed)
        if settings.mode == "unconditional":
            audit = sparsity_audit(net, settings.constants)
            if not audit.feasible:
                message = f"n={n}: sparsity window waived ({audit.note})"
                logger.warning(message)
                warnings.append(message)

        delta = settings.delta_for(n)
        dnet = build_delta_net(settings.space, delta, anchor=settings.net_anchor)
        oracle = RowMeanOracle(
            net,
            settings.process,
            settings.family,
            settings.oracle_draws,
            stream_seed(settings.seed, "ulln-oracle", n),
            analytic=settings.analytic_oracle,
        )
        oracle.warm_up(settings.mode)
        mixing = mixing_matrices(net, settings.process)

        def replicate(rep: int, n: int = n, net: Network = net) -> SupDeviation:
            draw = simulate(
                net,
                settings.process,
                stream_seed(settings.seed, "ulln", n, rep),
                mixing=mixing,
            )
            return sup_deviation(
                draw,
                settings.family,
                dnet,
                settings.mode,
                oracle,
                se_ceiling=settings.oracle_se_ceiling,
            )

        outcomes = list(mapper(replicate, range(settings.replications)))
        values = np.array([outcome.value for outcome in outcomes])
        worst_se = max(worst_se, max(outcome.oracle_se for outcome in outcomes))
        per_n.append(
            (float(np.median(values)), float(np.quantile(values, 0.75)))
        )
        deltas.append(delta)
        sizes.append(dnet.cardinality)
        slacks.append(outcomes[0].continuity_slack)
        rows.append(values)
        logger.info(
            "ULLN %s n=%d: median sup-deviation %.5f (J=%d, delta=%.4f)",
            settings.mode,
            n,
            per_n[-1][0],
            dnet.cardinality,
            delta,
        )

    return UllnResult(
        n_grid=tuple(settings.n_grid),
        per_n=tuple(per_n),
        mode=settings.mode,
        net_delta=tuple(deltas),
        net_size=tuple(sizes),
        continuity_slack=tuple(slacks),
        oracle_se=worst_se,
        deviations=np.vstack(rows),
        warnings=tuple(warnings),
    )
