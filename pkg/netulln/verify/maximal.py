"""Maximal inequality engine: block sums, block moments and partial-sum maxima."""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import sparse

from netulln.errors import VerificationError
from netulln.netgraph import (
    AssumptionConstants,
    BlockPartition,
    Network,
    NetworkFamily,
    SparsityAudit,
    sparsity_audit,
)
from netulln.process import (
    INNOVATION_STREAM,
    ProcessSpec,
    SampleDraw,
    mixing_matrices,
)
from netulln.rng import SeedLike, as_seed_sequence, child, generator, stream_seed
from netulln.verify.ulln import Mapper

logger = logging.getLogger(__name__)

MIN_REPLICATIONS = 50
MAX_EXHAUSTIVE_N = 20
_BATCH_CELLS = 1 << 22


@dataclass(frozen=True)
class BlockSums:
    sums: np.ndarray
    tail_sum: float
    total: float

    def reassembled(self) -> float:
        return math.fsum([*self.sums.tolist(), self.tail_sum])


def _as_array(x: SampleDraw | np.ndarray) -> np.ndarray:
    values = x.centered if isinstance(x, SampleDraw) else x
    return np.asarray(values, dtype=np.float64)


def block_sums(x: SampleDraw | np.ndarray, partition: BlockPartition) -> BlockSums:
    """``S_j = sum_{i in I_j} X_i`` per block, plus the tail sum."""
    values = _as_array(x)
    sums = np.array([math.fsum(values[block].tolist()) for block in partition.blocks])
    tail = math.fsum(values[partition.tail].tolist()) if partition.has_tail else 0.0
    return BlockSums(sums=sums, tail_sum=tail, total=math.fsum(values.tolist()))


def cumulative_block_bound(
    sums: Sequence[float] | np.ndarray, p: int
) -> tuple[float, float]:
    """``max_j |T_j|^p`` and ``J^(p-1) * sum_j |S_j|^p``; the first never exceeds
    the second."""
    values = np.asarray(sums, dtype=np.float64)
    if values.size == 0:
        return 0.0, 0.0
    running = np.abs(np.cumsum(values)).max() ** p
    bound = values.size ** (p - 1) * float(np.sum(np.abs(values) ** p))
    return float(running), bound


def _check_order(p: int) -> None:
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p <= 2:
        raise VerificationError("p must be an integer greater than 2")


def _centered_batches(
    net: Network, spec: ProcessSpec, replications: int, seed: SeedLike
) -> Any:
    """Yield ``(n, batch)`` arrays of centered draws, seeded per batch."""
    mixing = mixing_matrices(net, spec)
    sequence = as_seed_sequence(seed)
    batch = max(1, _BATCH_CELLS // net.n)
    for index, start in enumerate(range(0, replications, batch)):
        size = min(batch, replications - start)
        rng = generator(child(sequence, INNOVATION_STREAM, index))
        innovations = spec.innovation.sample(rng, (net.n, size))
        yield mixing.apply(spec.weight_table, innovations)


@dataclass(frozen=True)
class BlockMomentResult:
    block_size: int
    p: int
    ratio: float
    se: float
    block_count: int
    replications: int


def block_moment_check(
    net: Network,
    spec: ProcessSpec,
    partition: BlockPartition,
    p: int,
    replications: int,
    seed: SeedLike,
) -> BlockMomentResult:
    """``E|S_j|^p / b^(p/2)`` pooled over blocks and replications."""
    _check_order(p)
    if replications < 1:
        raise VerificationError("replications must be >= 1")
    if not partition.blocks:
        raise VerificationError("partition has no blocks")
    rows = np.concatenate(partition.blocks)
    cols = np.repeat(np.arange(partition.block_count), partition.block_size)
    indicator = sparse.csr_array(
        (np.ones(rows.size), (cols, rows)), shape=(partition.block_count, net.n)
    )
    scale = partition.block_size ** (p / 2.0)
    pooled: list[np.ndarray] = []
    for centered in _centered_batches(net, spec, replications, seed):
        pooled.append((np.abs(indicator @ centered) ** p / scale).ravel())
    values = np.concatenate(pooled)
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return BlockMomentResult(
        block_size=partition.block_size,
        p=int(p),
        ratio=float(values.mean()),
        se=se,
        block_count=partition.block_count,
        replications=replications,
    )


@dataclass(frozen=True)
class MaximalMoment:
    value: float
    se: float
    n: int
    p: int
    replications: int
    samples: np.ndarray
    warnings: tuple[str, ...] = ()


def maximal_moment(
    net: Network,
    spec: ProcessSpec,
    p: int,
    n: int | None,
    replications: int,
    seed: SeedLike,
) -> MaximalMoment:
    """``E[max_k |sum_{i<=k} X_i|^p | C]`` over the first n nodes."""
    count = net.n if n is None else n
    if not 1 <= count <= net.n:
        raise VerificationError(f"n must lie in 1..{net.n}")
    if p <= 0:
        raise VerificationError("p must be positive")
    if replications < 2:
        raise VerificationError("replications must be >= 2")
    warnings: list[str] = []
    if replications < MIN_REPLICATIONS:
        message = (
            f"only {replications} replications (< {MIN_REPLICATIONS}); "
            "the moment estimate is noisy"
        )
        logger.warning(message)
        warnings.append(message)
    parts = [
        np.abs(np.cumsum(centered[:count], axis=0)).max(axis=0) ** p
        for centered in _centered_batches(net, spec, replications, seed)
    ]
    samples = np.concatenate(parts)
    return MaximalMoment(
        value=float(samples.mean()),
        se=float(samples.std(ddof=1) / math.sqrt(samples.size)),
        n=count,
        p=p,
        replications=replications,
        samples=samples,
        warnings=tuple(warnings),
    )


def exhaustive_rademacher_moment(n: int, p: float) -> float:
    """Exact ``E[max_k |S_k|^p]`` for i.i.d. signs, enumerating all ``2^n`` paths."""
    if not 1 <= n <= MAX_EXHAUSTIVE_N:
        raise VerificationError(f"n must lie in 1..{MAX_EXHAUSTIVE_N}")
    codes = np.arange(2**n, dtype=np.int64)[:, None]
    signs = 1 - 2 * ((codes >> np.arange(n)) & 1)
    peaks = np.abs(np.cumsum(signs, axis=1)).max(axis=1).astype(np.float64)
    return float(np.mean(peaks**p))


@dataclass(frozen=True)
class GrowthFit:
    slope: float
    intercept: float
    ci_low: float
    ci_high: float
    level: float


def _slopes(log_n: np.ndarray, log_moments: np.ndarray) -> np.ndarray:
    centered = log_n - log_n.mean()
    return (log_moments - log_moments.mean(axis=-1, keepdims=True)) @ centered / (
        centered @ centered
    )


def fit_growth_exponent(
    n_grid: Sequence[int],
    moments: Sequence[float],
    *,
    samples: Sequence[np.ndarray] | None = None,
    n_boot: int = 1000,
    level: float = 0.95,
    seed: SeedLike = 0,
) -> GrowthFit:
    """Least-squares slope of log-moment on log-n with a bootstrap CI.

    The CI resamples replications within each n; without ``samples`` it
    collapses to the point estimate.
    """
    if len(n_grid) != len(moments):
        raise VerificationError("n_grid and moments must have equal length")
    if len(n_grid) < 4:
        raise VerificationError("growth fits need at least 4 grid points")
    estimates = np.asarray(moments, dtype=np.float64)
    if np.any(estimates <= 0):
        raise VerificationError("moment estimates must be positive")
    if not 0 < level < 1:
        raise VerificationError("level must lie in (0, 1)")
    log_n = np.log(np.asarray(n_grid, dtype=np.float64))
    slope, intercept = np.polyfit(log_n, np.log(estimates), 1)
    if samples is None:
        return GrowthFit(
            float(slope), float(intercept), float(slope), float(slope), level
        )

    rng = generator(seed)
    boot = np.empty((n_boot, len(n_grid)))
    for column, values in enumerate(samples):
        values = np.asarray(values, dtype=np.float64)
        picks = rng.integers(0, values.size, size=(n_boot, values.size))
        boot[:, column] = values[picks].mean(axis=1)
    boot = np.maximum(boot, np.finfo(np.float64).tiny)
    slopes = _slopes(log_n, np.log(boot))
    tail = (1.0 - level) / 2.0
    low, high = np.quantile(slopes, [tail, 1.0 - tail])
    return GrowthFit(float(slope), float(intercept), float(low), float(high), level)


@dataclass(frozen=True)
class AlternativeRate:
    p: float
    beta: float

    @property
    def exponent(self) -> float:
        return self.p * self.beta


def alternative_rate(eps0: float, eps1: float, eps2: float) -> AlternativeRate:
    """Rate exponent under the ``(eps0, eps1, eps2)`` parameterization."""
    if eps0 <= 0:
        raise VerificationError("eps0 must be positive")
    for label, value in (("eps1", eps1), ("eps2", eps2)):
        if not 0 < value < 1:
            raise VerificationError(f"{label} must lie in (0, 1)")
    return AlternativeRate(p=(1.0 + eps0) / eps0, beta=max(1.0 - eps1 / 2.0, 1.0 - eps2))


def unconditional_rate_exponent(p: int, d: int, beta: float) -> tuple[float, bool]:
    """Exponent of ``n`` in the net-union tail bound and whether it is summable."""
    _check_order(p)
    exponent = p * (beta + d / (p * p - 1.0) - 1.0)
    return exponent, exponent < -1.0


@dataclass(frozen=True)
class MaximalSettings:
    n_grid: tuple[int, ...]
    network: NetworkFamily
    process: ProcessSpec
    replications: int
    seed: int
    constants: AssumptionConstants = field(default_factory=AssumptionConstants)
    moment_order: int | None = None
    n_boot: int = 1000
    tolerance: float = 0.15


@dataclass(frozen=True)
class MaximalResult:
    n_grid: tuple[int, ...]
    p: int
    moments: tuple[float, ...]
    moment_se: tuple[float, ...]
    fit: GrowthFit
    beta: float
    audits: tuple[SparsityAudit, ...]
    tolerance: float = 0.15
    warnings: tuple[str, ...] = ()

    @property
    def cap(self) -> float:
        return self.p * self.beta

    @property
    def passes(self) -> bool:
        return self.fit.ci_high <= self.cap + self.tolerance


def run_maximal_experiment(
    settings: MaximalSettings, mapper: Mapper[Any, Any] = map
) -> MaximalResult:
    """Moment growth across the n-grid against the cap ``p * beta``."""
    constants = settings.constants
    p = settings.moment_order or constants.p
    _check_order(p)
    if len(settings.n_grid) < 4:
        raise VerificationError("the maximal experiment needs at least 4 grid points")

    def measure(n: int) -> tuple[SparsityAudit, MaximalMoment]:
        net = settings.network.build(n, settings.seed)
        audit = sparsity_audit(net, constants)
        moment = maximal_moment(
            net,
            settings.process,
            p,
            None,
            settings.replications,
            stream_seed(settings.seed, "maximal", n),
        )
        return audit, moment

    outcomes = list(mapper(measure, settings.n_grid))
    warnings: list[str] = []
    for audit, moment in outcomes:
        warnings.extend(moment.warnings)
        if not audit.feasible:
            message = f"n={audit.n}: block partition check failed ({audit.note})"
            logger.warning(message)
            warnings.append(message)

    moments = [moment.value for _, moment in outcomes]
    fit = fit_growth_exponent(
        settings.n_grid,
        moments,
        samples=[moment.samples for _, moment in outcomes],
        n_boot=settings.n_boot,
        seed=stream_seed(settings.seed, "maximal-bootstrap"),
    )
    beta = outcomes[0][0].window.beta
    logger.info(
        "Maximal moments: slope %.3f (CI %.3f..%.3f) vs cap p*beta=%.3f",
        fit.slope,
        fit.ci_low,
        fit.ci_high,
        p * beta,
    )
    return MaximalResult(
        n_grid=tuple(settings.n_grid),
        p=p,
        moments=tuple(moments),
        moment_se=tuple(moment.se for _, moment in outcomes),
        fit=fit,
        beta=beta,
        audits=tuple(audit for audit, _ in outcomes),
        tolerance=settings.tolerance,
        warnings=tuple(warnings),
    )
