"""Compact parameter boxes, delta-nets and bounded Lipschitz function families."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from netulln.errors import FunctionSpaceError
from netulln.rng import SeedLike, generator

logger = logging.getLogger(__name__)

NET_ANCHORS = ("endpoints", "centers")
FAMILY_NAMES = (
    "clipped_quadratic",
    "neg_clipped_quadratic",
    "clipped_location",
    "clipped_location_pair",
    "constant",
)
_PROBE_BATCH = 100_000
_COVER_TOLERANCE = 1e-12

Evaluator = Callable[[np.ndarray, np.ndarray], np.ndarray]
YSampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class ParamSpace:
    """Closed box ``[lower_k, upper_k]`` in R^d."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lower) != len(self.upper) or not self.lower:
            raise FunctionSpaceError(
                "parameter space needs matching, nonempty lower and upper bounds"
            )
        for index, (low, high) in enumerate(zip(self.lower, self.upper)):
            if not (math.isfinite(low) and math.isfinite(high)):
                raise FunctionSpaceError(f"interval {index} must be finite")
            if low > high:
                raise FunctionSpaceError(
                    f"interval {index} is empty: lower {low} > upper {high}"
                )
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))

    @classmethod
    def from_bounds(cls, bounds: Sequence[Sequence[float]]) -> ParamSpace:
        pairs = [tuple(interval) for interval in bounds]
        if any(len(pair) != 2 for pair in pairs):
            raise FunctionSpaceError("each interval must be a [lower, upper] pair")
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def lower_array(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=np.float64)

    @property
    def upper_array(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=np.float64)

    @property
    def widths(self) -> np.ndarray:
        return self.upper_array - self.lower_array

    @property
    def center(self) -> np.ndarray:
        return (self.lower_array + self.upper_array) / 2.0

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def as_point(self, theta: Any) -> np.ndarray:
        point = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if point.shape != (self.dimension,):
            raise FunctionSpaceError(
                f"theta must have dimension {self.dimension}, got shape {point.shape}"
            )
        return point

    def contains(self, theta: Any, tolerance: float = 0.0) -> bool:
        point = self.as_point(theta)
        return bool(
            np.all(point >= self.lower_array - tolerance)
            and np.all(point <= self.upper_array + tolerance)
        )

    def clip(self, theta: Any) -> np.ndarray:
        return np.clip(self.as_point(theta), self.lower_array, self.upper_array)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(
            self.lower_array, self.upper_array, size=(size, self.dimension)
        )

    def corners(self) -> np.ndarray:
        axes = [np.array([low, high]) for low, high in zip(self.lower, self.upper)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([axis.ravel() for axis in mesh], axis=1)


@dataclass(frozen=True)
class DeltaNet:
    """Finite lattice ``points`` covering ``space`` within ``delta``."""

    space: ParamSpace
    points: np.ndarray
    delta: float
    spacing: tuple[float, ...]
    anchor: str

    @property
    def cardinality(self) -> int:
        return int(self.points.shape[0])

    @property
    def cardinality_constant(self) -> float:
        """``c`` in ``J <= c * delta^-d`` for this net."""
        return self.cardinality * self.delta**self.space.dimension

    @property
    def covering_radius(self) -> float:
        return 0.5 * float(np.linalg.norm(self.spacing))

    def to_rows(self) -> list[tuple[float, ...]]:
        return [tuple(float(value) for value in point) for point in self.points]


@dataclass(frozen=True)
class BoundedLipschitzFunction:
    """One scalar slice ``y -> f(y, theta)[component]`` with its bounds."""

    fn: Callable[[np.ndarray], np.ndarray]
    sup_bound: float | None
    lipschitz: float | None
    label: str = ""

    def __call__(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(self.fn(np.asarray(y, dtype=np.float64)), dtype=np.float64)


@dataclass(frozen=True)
class BoundedLipschitzFamily:
    """Parameter-indexed family ``f(y, theta)`` with values in R^m.

    ``sup_bound`` (R), ``y_lipschitz`` (L) and ``theta_lipschitz`` (L-bar) hold
    per component in the sup norm. ``analytic`` marks closed-form bounds; any
    other family is only probe-certified.
    """

    name: str
    evaluator: Evaluator
    sup_bound: float | None
    y_lipschitz: float | None
    theta_lipschitz: float | None
    output_dim: int = 1
    param_dim: int = 1
    analytic: bool = False
    shift_invariant: bool = False
    constant_value: float | None = None
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.output_dim < 1 or self.param_dim < 1:
            raise FunctionSpaceError("output_dim and param_dim must be >= 1")
        for label in ("sup_bound", "y_lipschitz", "theta_lipschitz"):
            value = getattr(self, label)
            if value is not None and value < 0:
                raise FunctionSpaceError(f"{self.name}: {label} must be >= 0")

    def evaluate(self, y: Any, theta: Any) -> np.ndarray:
        """Values with shape ``(len(y), output_dim)``."""
        values = np.atleast_1d(np.asarray(y, dtype=np.float64))
        point = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        if point.shape != (self.param_dim,):
            raise FunctionSpaceError(
                f"{self.name}: theta must have dimension {self.param_dim}"
            )
        result = np.asarray(self.evaluator(values, point), dtype=np.float64)
        return result.reshape(values.shape[0], self.output_dim)

    def at(self, theta: Any, component: int = 0) -> BoundedLipschitzFunction:
        if not 0 <= component < self.output_dim:
            raise FunctionSpaceError(f"{self.name}: component {component} out of range")
        point = np.atleast_1d(np.asarray(theta, dtype=np.float64))
        return BoundedLipschitzFunction(
            fn=lambda y: self.evaluate(y, point)[:, component],
            sup_bound=self.sup_bound,
            lipschitz=self.y_lipschitz,
            label=f"{self.name}[{component}]",
        )

    def scaled(self, factor: float) -> BoundedLipschitzFamily:
        """``factor * f`` with bounds scaled accordingly."""
        if factor <= 0:
            raise FunctionSpaceError("scale factor must be positive")
        inner = self.evaluator

        def scale_bound(value: float | None) -> float | None:
            return None if value is None else factor * value

        return replace(
            self,
            name=f"{factor:g}*{self.name}",
            evaluator=lambda y, theta: factor * inner(y, theta),
            sup_bound=scale_bound(self.sup_bound),
            y_lipschitz=scale_bound(self.y_lipschitz),
            theta_lipschitz=scale_bound(self.theta_lipschitz),
            constant_value=(
                None if self.constant_value is None else factor * self.constant_value
            ),
        )


@dataclass(frozen=True)
class BoundCertificate:
    """Largest observed ratios from a randomized probe of the declared bounds."""

    family: str
    n_probe: int
    analytic: bool
    sup_observed: float
    y_ratio: float
    theta_ratio: float
    sup_margin: float
    y_margin: float
    theta_margin: float
    witness: dict[str, Any] | None = None

    @property
    def ok(self) -> bool:
        return self.witness is None

    @property
    def kind(self) -> str:
        return "analytic" if self.analytic else "probe"


def _clip_level(params: dict[str, Any], name: str) -> float:
    clip = float(params.get("clip", 1.0))
    if not clip > 0:
        raise FunctionSpaceError(f"{name}: clip must be positive")
    return clip


def clipped_quadratic(clip: float = 1.0) -> BoundedLipschitzFamily:
    """``min((y - theta)^2, clip)``."""
    root = math.sqrt(clip)
    return BoundedLipschitzFamily(
        name="clipped_quadratic",
        evaluator=lambda y, theta: np.minimum((y - theta[0]) ** 2, clip),
        sup_bound=clip,
        y_lipschitz=2.0 * root,
        theta_lipschitz=2.0 * root,
        analytic=True,
        shift_invariant=True,
        params={"clip": clip},
    )


def neg_clipped_quadratic(clip: float = 1.0) -> BoundedLipschitzFamily:
    """``-min((y - theta)^2, clip)``, the M-estimation criterion."""
    root = math.sqrt(clip)
    return BoundedLipschitzFamily(
        name="neg_clipped_quadratic",
        evaluator=lambda y, theta: -np.minimum((y - theta[0]) ** 2, clip),
        sup_bound=clip,
        y_lipschitz=2.0 * root,
        theta_lipschitz=2.0 * root,
        analytic=True,
        shift_invariant=True,
        params={"clip": clip},
    )


def clipped_location(clip: float = 1.0) -> BoundedLipschitzFamily:
    """``clip(y - theta, -clip, clip)``, a single GMM moment."""
    return BoundedLipschitzFamily(
        name="clipped_location",
        evaluator=lambda y, theta: np.clip(y - theta[0], -clip, clip),
        sup_bound=clip,
        y_lipschitz=1.0,
        theta_lipschitz=1.0,
        analytic=True,
        shift_invariant=True,
        params={"clip": clip},
    )


def clipped_location_pair(clip: float = 1.0) -> BoundedLipschitzFamily:
    """Two moments: ``clip(y - theta)`` and ``clip * tanh((y - theta) / clip)``."""

    def evaluate(y: np.ndarray, theta: np.ndarray) -> np.ndarray:
        shifted = y - theta[0]
        return np.stack(
            [np.clip(shifted, -clip, clip), clip * np.tanh(shifted / clip)], axis=1
        )

    return BoundedLipschitzFamily(
        name="clipped_location_pair",
        evaluator=evaluate,
        sup_bound=clip,
        y_lipschitz=1.0,
        theta_lipschitz=1.0,
        output_dim=2,
        analytic=True,
        shift_invariant=True,
        params={"clip": clip},
    )


def constant(value: float = 0.0, param_dim: int = 1) -> BoundedLipschitzFamily:
    return BoundedLipschitzFamily(
        name="constant",
        evaluator=lambda y, theta: np.full(y.shape[0], value, dtype=np.float64),
        sup_bound=abs(value),
        y_lipschitz=0.0,
        theta_lipschitz=0.0,
        param_dim=param_dim,
        analytic=True,
        shift_invariant=True,
        constant_value=value,
        params={"value": value},
    )


def builtin_family(
    name: str, params: dict[str, Any] | None = None
) -> BoundedLipschitzFamily:
    params = dict(params or {})
    if name == "constant":
        unknown = set(params) - {"value"}
        if unknown:
            raise FunctionSpaceError(
                f"constant: unknown parameter(s) {sorted(unknown)}"
            )
        return constant(float(params.get("value", 0.0)))
    builders: dict[str, Callable[[float], BoundedLipschitzFamily]] = {
        "clipped_quadratic": clipped_quadratic,
        "neg_clipped_quadratic": neg_clipped_quadratic,
        "clipped_location": clipped_location,
        "clipped_location_pair": clipped_location_pair,
    }
    if name not in builders:
        raise FunctionSpaceError(
            f"unknown family '{name}'; expected one of: {', '.join(FAMILY_NAMES)}"
        )
    unknown = set(params) - {"clip"}
    if unknown:
        raise FunctionSpaceError(f"{name}: unknown parameter(s) {sorted(unknown)}")
    return builders[name](_clip_level(params, name))


def build_delta_net(
    space: ParamSpace, delta: float, anchor: str = "endpoints"
) -> DeltaNet:
    """Axis-aligned lattice whose Euclidean covering radius is at most ``delta``.

    ``endpoints`` uses spacing ``<= delta/sqrt(d)`` and contains every box
    endpoint; ``centers`` places cell midpoints at spacing ``<= 2*delta/sqrt(d)``.
    """
    if not delta > 0:
        raise FunctionSpaceError("delta must be positive")
    if anchor not in NET_ANCHORS:
        raise FunctionSpaceError(f"anchor must be one of: {', '.join(NET_ANCHORS)}")

    d = space.dimension
    if delta >= space.diameter / 2.0:
        return DeltaNet(
            space=space,
            points=space.center.reshape(1, d),
            delta=delta,
            spacing=tuple(float(w) for w in space.widths),
            anchor=anchor,
        )

    step = (delta if anchor == "endpoints" else 2.0 * delta) / math.sqrt(d)
    axes: list[np.ndarray] = []
    spacing: list[float] = []
    for low, high in zip(space.lower, space.upper):
        width = high - low
        if width == 0:
            axes.append(np.array([low]))
            spacing.append(0.0)
            continue
        cells = math.ceil(width / step)
        if anchor == "endpoints":
            axes.append(np.linspace(low, high, cells + 1))
        else:
            axes.append(low + (np.arange(cells) + 0.5) * (width / cells))
        spacing.append(width / cells)
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([axis.ravel() for axis in mesh], axis=1)
    logger.debug("Built %s delta-net: delta=%g, J=%d", anchor, delta, points.shape[0])
    return DeltaNet(
        space=space, points=points, delta=delta, spacing=tuple(spacing), anchor=anchor
    )


def nearest_net_point(net: DeltaNet, theta: Any) -> tuple[int, float]:
    """Closest net point; ties go to the lowest index."""
    point = net.space.as_point(theta)
    if not net.space.contains(point, tolerance=_COVER_TOLERANCE):
        raise FunctionSpaceError(
            f"theta {point.tolist()} lies outside the parameter box"
        )
    distances = np.linalg.norm(net.points - point, axis=1)
    index = int(np.argmin(distances))
    return index, float(distances[index])


def uniform_y_sampler(bound: float) -> YSampler:
    return lambda rng, size: rng.uniform(-bound, bound, size)


def certify_bounds(
    family: BoundedLipschitzFamily,
    y_sampler: YSampler,
    space: ParamSpace,
    n_probe: int,
    seed: SeedLike,
) -> BoundCertificate:
    """Randomized check of the declared R, L and L-bar on sampled pairs.

    A passing certificate is probabilistic only; a failing one carries the
    first witness pair found.
    """
    if n_probe < 1:
        raise FunctionSpaceError("n_probe must be >= 1")
    if space.dimension != family.param_dim:
        raise FunctionSpaceError("family and parameter space dimensions differ")
    rng = generator(seed)
    sup_observed = y_ratio = theta_ratio = 0.0
    witness: dict[str, Any] | None = None

    done = 0
    while done < n_probe:
        size = min(_PROBE_BATCH, n_probe - done)
        done += size
        y = np.asarray(y_sampler(rng, size), dtype=np.float64)
        y_other = np.asarray(y_sampler(rng, size), dtype=np.float64)
        theta = space.sample(rng, size)
        theta_other = space.sample(rng, size)

        base = _evaluate_rows(family, y, theta)
        moved_y = _evaluate_rows(family, y_other, theta)
        moved_theta = _evaluate_rows(family, y, theta_other)

        sup = np.abs(base).max(axis=1)
        y_gap = np.abs(y - y_other)
        y_change = np.abs(base - moved_y).max(axis=1)
        theta_gap = np.linalg.norm(theta - theta_other, axis=1)
        theta_change = np.abs(base - moved_theta).max(axis=1)
        y_ratios = np.divide(y_change, y_gap, out=np.zeros(size), where=y_gap > 0)
        theta_ratios = np.divide(
            theta_change, theta_gap, out=np.zeros(size), where=theta_gap > 0
        )

        sup_observed = max(sup_observed, float(sup.max()))
        y_ratio = max(y_ratio, float(y_ratios.max()))
        theta_ratio = max(theta_ratio, float(theta_ratios.max()))

        if witness is None:
            witness = _first_violation(
                family, sup, y_ratios, theta_ratios, y, y_other, theta, theta_other
            )

    if witness is not None:
        logger.warning("%s violates its declared bounds: %s", family.name, witness)
    return BoundCertificate(
        family=family.name,
        n_probe=n_probe,
        analytic=family.analytic,
        sup_observed=sup_observed,
        y_ratio=y_ratio,
        theta_ratio=theta_ratio,
        sup_margin=_margin(family.sup_bound, sup_observed),
        y_margin=_margin(family.y_lipschitz, y_ratio),
        theta_margin=_margin(family.theta_lipschitz, theta_ratio),
        witness=witness,
    )


def _evaluate_rows(
    family: BoundedLipschitzFamily, y: np.ndarray, theta: np.ndarray
) -> np.ndarray:
    if family.shift_invariant and family.param_dim == 1:
        return family.evaluate(y - theta[:, 0], np.zeros(1))
    return np.vstack([family.evaluate(y[k : k + 1], theta[k]) for k in range(y.size)])


def _margin(bound: float | None, observed: float) -> float:
    return math.inf if bound is None else bound - observed


def _exceeds(observed: np.ndarray, bound: float | None) -> np.ndarray:
    if bound is None:
        return np.zeros(observed.shape, dtype=bool)
    return observed > bound * (1.0 + 1e-12) + 1e-15


def _first_violation(
    family: BoundedLipschitzFamily,
    sup: np.ndarray,
    y_ratios: np.ndarray,
    theta_ratios: np.ndarray,
    y: np.ndarray,
    y_other: np.ndarray,
    theta: np.ndarray,
    theta_other: np.ndarray,
) -> dict[str, Any] | None:
    checks = (
        ("sup_bound", sup, family.sup_bound),
        ("y_lipschitz", y_ratios, family.y_lipschitz),
        ("theta_lipschitz", theta_ratios, family.theta_lipschitz),
    )
    for bound_name, observed, bound in checks:
        hits = np.flatnonzero(_exceeds(observed, bound))
        if hits.size:
            k = int(hits[0])
            return {
                "bound": bound_name,
                "declared": bound,
                "observed": float(observed[k]),
                "y": float(y[k]),
                "y_other": float(y_other[k]),
                "theta": theta[k].tolist(),
                "theta_other": theta_other[k].tolist(),
            }
    return None
