"""M and GMM estimators over a compact box and their consistency experiments."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from netulln.errors import EstimationError, IdentificationError
from netulln.funcspace import (
    BoundedLipschitzFamily,
    DeltaNet,
    ParamSpace,
    build_delta_net,
)
from netulln.netgraph import NetworkFamily
from netulln.process import ProcessSpec, SampleDraw, mixing_matrices, simulate
from netulln.rng import stream_seed
from netulln.verify.ulln import Mapper, is_strictly_decreasing

logger = logging.getLogger(__name__)

ESTIMATORS = ("m", "gmm")
WEIGHTINGS = ("identity", "inverse_variance")
_SYMMETRIC_TOLERANCE = 1e-12
_INVERSE_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_MAX_REFINE_EVALUATIONS = 10_000


def _values(sample: SampleDraw | np.ndarray) -> np.ndarray:
    values = sample.values if isinstance(sample, SampleDraw) else sample
    return np.atleast_1d(np.asarray(values, dtype=np.float64))


def _column_means(values: np.ndarray) -> np.ndarray:
    means = values.mean(axis=0)
    flat = np.all(values == values[0], axis=0)
    means[flat] = values[0, flat]
    return means


@dataclass(frozen=True, eq=False)
class WeightingScheme:
    """Symmetric positive-definite ``W_n`` with its declared limit."""

    matrix: np.ndarray
    limit: np.ndarray | None = None
    label: str = "custom"
    _factor: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        matrix = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise EstimationError("weighting matrix must be square")
        if not np.allclose(matrix, matrix.T, rtol=0, atol=_SYMMETRIC_TOLERANCE):
            raise EstimationError("weighting matrix must be symmetric")
        try:
            factor = np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError as error:
            raise EstimationError(
                "weighting matrix must be positive definite"
            ) from error
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "_factor", factor)

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def quadratic_form(self, vector: np.ndarray) -> float:
        """``v' W v`` as a squared norm, so never negative."""
        return float(np.sum((self._factor.T @ vector) ** 2))

    @classmethod
    def identity(cls, m: int) -> WeightingScheme:
        eye = np.eye(m)
        return cls(matrix=eye, limit=eye, label="identity")

    @classmethod
    def inverse_variance(
        cls,
        sample: SampleDraw | np.ndarray,
        family: BoundedLipschitzFamily,
        space: ParamSpace,
    ) -> WeightingScheme:
        """Diagonal inverse moment variances at the box centre."""
        moments = family.evaluate(_values(sample), space.center)
        variances = moments.var(axis=0, ddof=1)
        if np.any(variances <= 0):
            raise EstimationError(
                "a moment has zero sample variance at the box centre"
            )
        return cls(
            matrix=np.diag(1.0 / variances), limit=None, label="inverse_variance"
        )


def as_weighting(weighting: WeightingScheme | Any) -> WeightingScheme:
    if isinstance(weighting, WeightingScheme):
        return weighting
    return WeightingScheme(matrix=np.asarray(weighting, dtype=np.float64))


@dataclass(frozen=True)
class EstimationResult:
    theta_hat: np.ndarray
    criterion_value: float
    net_index: int
    net_stage: np.ndarray
    refine_stage: np.ndarray | None
    evaluations: int
    converged: bool
    refined: bool
    net_size: int


def m_criterion(
    sample: SampleDraw | np.ndarray, family: BoundedLipschitzFamily, theta: Any
) -> float:
    """``Q_n(theta) = (1/n) sum_i f(Y_i, theta)``."""
    if family.output_dim != 1:
        raise EstimationError("the M criterion needs a scalar family")
    return float(_column_means(family.evaluate(_values(sample), theta))[0])


def sample_moments(
    sample: SampleDraw | np.ndarray, family: BoundedLipschitzFamily, theta: Any
) -> np.ndarray:
    return _column_means(family.evaluate(_values(sample), theta))


def gmm_criterion(
    sample: SampleDraw | np.ndarray,
    family: BoundedLipschitzFamily,
    theta: Any,
    weighting: WeightingScheme | Any,
) -> float:
    """``fbar(theta)' W fbar(theta)``."""
    scheme = as_weighting(weighting)
    if scheme.size != family.output_dim:
        raise EstimationError(
            f"weighting is {scheme.size}x{scheme.size} but the family has "
            f"{family.output_dim} moments"
        )
    return scheme.quadratic_form(sample_moments(sample, family, theta))


def _golden_section(
    objective: Callable[[np.ndarray], float],
    low: float,
    high: float,
    refine_tol: float,
) -> tuple[np.ndarray, float, int, bool]:
    """Bracket shrink on ``[low, high]`` driven only by value comparisons."""
    a, b = low, high
    c = b - _INVERSE_GOLDEN * (b - a)
    d = a + _INVERSE_GOLDEN * (b - a)
    fc = objective(np.array([c]))
    fd = objective(np.array([d]))
    evaluations = 2
    while b - a > refine_tol:
        if evaluations >= _MAX_REFINE_EVALUATIONS:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVERSE_GOLDEN * (b - a)
            fc = objective(np.array([c]))
        else:
            a, c, fc = c, d, fd
            d = a + _INVERSE_GOLDEN * (b - a)
            fd = objective(np.array([d]))
        evaluations += 1
    converged = b - a <= refine_tol
    if fc <= fd:
        return np.array([c]), fc, evaluations, converged
    return np.array([d]), fd, evaluations, converged


def _compass_search(
    objective: Callable[[np.ndarray], float],
    start: np.ndarray,
    start_score: float,
    low: np.ndarray,
    high: np.ndarray,
    refine_tol: float,
) -> tuple[np.ndarray, float, int, bool]:
    """Axis polls with step halving; a move needs a strictly lower value."""
    point = start.copy()
    score = start_score
    step = (high - low) / 4.0
    evaluations = 0
    while step.max() > refine_tol:
        if evaluations >= _MAX_REFINE_EVALUATIONS:
            return point, score, evaluations, False
        moved = False
        for axis in range(point.size):
            for direction in (1.0, -1.0):
                trial = point.copy()
                trial[axis] = min(
                    max(point[axis] + direction * step[axis], low[axis]), high[axis]
                )
                if trial[axis] == point[axis]:
                    continue
                trial_score = objective(trial)
                evaluations += 1
                if trial_score < score:
                    point, score, moved = trial, trial_score, True
                    break
        if not moved:
            step = step / 2.0
    return point, score, evaluations, True


def _two_stage_minimum(
    objective: Callable[[np.ndarray], float],
    space: ParamSpace,
    net: DeltaNet,
    refine_tol: float,
) -> tuple[np.ndarray, float, int, np.ndarray | None, int, bool, bool]:
    scores = np.array([objective(point) for point in net.points])
    evaluations = net.cardinality
    best = int(np.argmin(scores))
    start = net.points[best]
    best_score = float(scores[best])
    if net.cardinality == 1:
        return start.copy(), best_score, best, None, evaluations, True, False

    spacing = np.asarray(net.spacing)
    low = np.maximum(start - spacing, space.lower_array)
    high = np.minimum(start + spacing, space.upper_array)
    active = high > low
    if not active.any():
        return start.copy(), best_score, best, None, evaluations, True, False

    if space.dimension == 1:
        candidate, candidate_score, used, converged = _golden_section(
            objective, float(low[0]), float(high[0]), refine_tol
        )
    else:
        candidate, candidate_score, used, converged = _compass_search(
            objective, start, best_score, low, high, refine_tol
        )
    evaluations += used

    if candidate_score < best_score:
        return candidate, candidate_score, best, candidate, evaluations, converged, True
    return start.copy(), best_score, best, candidate, evaluations, converged, False


def _estimate(
    objective: Callable[[np.ndarray], float],
    sign: float,
    space: ParamSpace,
    net_delta: float,
    refine_tol: float,
) -> EstimationResult:
    if not refine_tol > 0:
        raise EstimationError("refine_tol must be positive")
    net = build_delta_net(space, net_delta)
    theta, score, index, refined_point, evaluations, converged, refined = (
        _two_stage_minimum(objective, space, net, refine_tol)
    )
    return EstimationResult(
        theta_hat=theta,
        criterion_value=sign * score,
        net_index=index,
        net_stage=net.points[index].copy(),
        refine_stage=refined_point,
        evaluations=evaluations,
        converged=converged,
        refined=refined,
        net_size=net.cardinality,
    )


def m_estimate(
    sample: SampleDraw | np.ndarray,
    family: BoundedLipschitzFamily,
    space: ParamSpace,
    net_delta: float,
    refine_tol: float,
) -> EstimationResult:
    """Argmax of ``Q_n``: delta-net scan, then bounded refinement in the winning cell.

    Net-stage ties go to the lowest index; the refined point replaces the net
    point only when it is strictly better.
    """
    values = _values(sample)
    return _estimate(
        lambda theta: -m_criterion(values, family, theta),
        -1.0,
        space,
        net_delta,
        refine_tol,
    )


def gmm_estimate(
    sample: SampleDraw | np.ndarray,
    family: BoundedLipschitzFamily,
    space: ParamSpace,
    weighting: WeightingScheme | Any,
    net_delta: float,
    refine_tol: float,
) -> EstimationResult:
    """Argmin of the GMM criterion with the same two-stage search."""
    values = _values(sample)
    scheme = as_weighting(weighting)
    return _estimate(
        lambda theta: gmm_criterion(values, family, theta, scheme),
        1.0,
        space,
        net_delta,
        refine_tol,
    )


@dataclass(frozen=True)
class IdentificationAudit:
    """The four consistency conditions, recorded per configuration."""

    unique_theta0: bool
    compact_space: bool
    continuous_criterion: bool
    ulln_passed: bool | None
    notes: tuple[str, ...] = ()

    @property
    def complete(self) -> bool:
        return (
            self.unique_theta0
            and self.compact_space
            and self.continuous_criterion
            and self.ulln_passed is True
        )

    def as_dict(self) -> dict[str, Any]:
        return {
            "unique_theta0": self.unique_theta0,
            "compact_space": self.compact_space,
            "continuous_criterion": self.continuous_criterion,
            "ulln_passed": self.ulln_passed,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class ConsistencySettings:
    estimator: str
    n_grid: tuple[int, ...]
    network: NetworkFamily
    process: ProcessSpec
    family: BoundedLipschitzFamily
    space: ParamSpace
    theta0: tuple[float, ...]
    replications: int
    seed: int
    net_delta: float = 0.05
    refine_tol: float = 1e-6
    weighting: str = "identity"
    ulln_passed: bool | None = None


@dataclass(frozen=True)
class ConsistencyRow:
    n: int
    bias: float
    median_bias: float
    rmse: float
    abs_error_q50: float
    abs_error_q90: float
    abs_error_max: float
    errors: np.ndarray


@dataclass(frozen=True)
class ConsistencyResult:
    estimator: str
    weighting: str
    theta0: tuple[float, ...]
    rows: tuple[ConsistencyRow, ...]
    audit: IdentificationAudit

    @property
    def rmse(self) -> np.ndarray:
        return np.array([row.rmse for row in self.rows])

    @property
    def rmse_decreasing(self) -> bool | None:
        """None for a single grid point, where no trend is claimed."""
        if len(self.rows) < 2:
            return None
        return is_strictly_decreasing(self.rmse)

    @property
    def final_ratio(self) -> float:
        first = self.rows[0].rmse
        return math.nan if first == 0 else self.rows[-1].rmse / first


def _base_name(family: BoundedLipschitzFamily) -> str:
    return family.name.rsplit("*", 1)[-1]


def identification_audit(settings: ConsistencySettings) -> IdentificationAudit:
    """Refuse configs whose population criterion may have several optima."""
    space = settings.space
    theta0 = np.asarray(settings.theta0, dtype=np.float64)
    spec = settings.process
    family = settings.family
    if settings.estimator not in ESTIMATORS:
        raise IdentificationError(f"estimator must be one of: {', '.join(ESTIMATORS)}")
    if theta0.shape != (space.dimension,) or not space.contains(theta0):
        raise IdentificationError("theta0 must lie inside the parameter box")
    if space.dimension != 1 or family.param_dim != 1:
        raise IdentificationError("built-in identification covers scalar location only")
    if not math.isclose(float(theta0[0]), spec.location, abs_tol=1e-12):
        raise IdentificationError(
            f"theta0={float(theta0[0])} differs from the process location "
            f"{spec.location}; built-in families identify the location"
        )
    if spec.shock_loading != 0 and spec.shock_decay == 0:
        raise IdentificationError(
            "a common shock with shock_decay 0 does not average out; "
            "the estimator would track mu + rho0 * C, not theta0"
        )

    name = _base_name(family)
    notes: list[str] = []
    ends = np.array([space.lower[0], space.upper[0]])
    reach = float(np.max(np.abs(ends - theta0[0])))
    clip = float(family.params.get("clip", 0.0))
    if settings.estimator == "m":
        if name != "neg_clipped_quadratic":
            raise IdentificationError(
                "M estimation supports neg_clipped_quadratic only"
            )
        notes.append("criterion -E min((Y - theta)^2, R) peaks at the location")
    else:
        if name not in {"clipped_location", "clipped_location_pair"}:
            raise IdentificationError(
                "GMM supports clipped_location and clipped_location_pair only"
            )
        if not clip > reach:
            raise IdentificationError(
                f"clip level {clip} must exceed the largest "
                f"|theta - theta0| = {reach}; "
                "otherwise the moment is flat and has many roots"
            )
        notes.append(
            "symmetric bounded moment with a single sign change at the location"
        )
    if settings.estimator == "m":
        net = settings.network.build(settings.n_grid[0], settings.seed)
        shells = mixing_matrices(net, spec).max_shell_sizes
        reach_y = spec.value_bound(settings.n_grid[0], shells)
        if clip < (reach_y + reach) ** 2:
            raise IdentificationError(
                f"clip level {clip} is below (value bound + box reach)^2 = "
                f"{(reach_y + reach) ** 2:g}; clipping could create extra maxima"
            )
    return IdentificationAudit(
        unique_theta0=True,
        compact_space=True,
        continuous_criterion=family.theta_lipschitz is not None,
        ulln_passed=settings.ulln_passed,
        notes=tuple(notes),
    )


def run_consistency_experiment(
    settings: ConsistencySettings, mapper: Mapper[Any, Any] = map
) -> ConsistencyResult:
    """Bias, RMSE and error quantiles of the estimator across the n-grid."""
    if settings.replications < 1:
        raise EstimationError("replications must be >= 1")
    if not settings.n_grid:
        raise EstimationError("n_grid must be nonempty")
    if settings.weighting not in WEIGHTINGS:
        raise EstimationError(f"weighting must be one of: {', '.join(WEIGHTINGS)}")
    audit = identification_audit(settings)
    theta0 = np.asarray(settings.theta0, dtype=np.float64)
    stage = f"estimate-{settings.estimator}"

    rows: list[ConsistencyRow] = []
    for n in settings.n_grid:
        net = settings.network.build(n, settings.seed)
        mixing = mixing_matrices(net, settings.process)

        def replicate(rep: int, n: int = n) -> float:
            draw = simulate(
                net,
                settings.process,
                stream_seed(settings.seed, stage, n, rep),
                mixing=mixing,
            )
            if settings.estimator == "m":
                result = m_estimate(
                    draw,
                    settings.family,
                    settings.space,
                    settings.net_delta,
                    settings.refine_tol,
                )
            else:
                if settings.weighting == "identity":
                    scheme = WeightingScheme.identity(settings.family.output_dim)
                else:
                    scheme = WeightingScheme.inverse_variance(
                        draw, settings.family, settings.space
                    )
                result = gmm_estimate(
                    draw,
                    settings.family,
                    settings.space,
                    scheme,
                    settings.net_delta,
                    settings.refine_tol,
                )
            return float(result.theta_hat[0] - theta0[0])

        errors = np.array(list(mapper(replicate, range(settings.replications))))
        magnitudes = np.abs(errors)
        rows.append(
            ConsistencyRow(
                n=n,
                bias=float(errors.mean()),
                median_bias=float(np.median(errors)),
                rmse=float(np.sqrt(np.mean(errors**2))),
                abs_error_q50=float(np.quantile(magnitudes, 0.5)),
                abs_error_q90=float(np.quantile(magnitudes, 0.9)),
                abs_error_max=float(magnitudes.max()),
                errors=errors,
            )
        )
        logger.info(
            "%s estimator n=%d: bias %.5f, RMSE %.5f",
            settings.estimator.upper(),
            n,
            rows[-1].bias,
            rows[-1].rmse,
        )

    return ConsistencyResult(
        estimator=settings.estimator,
        weighting=settings.weighting,
        theta0=tuple(float(v) for v in theta0),
        rows=tuple(rows),
        audit=audit,
    )
