"""Assumption diagnostics for one configuration, each marked PASS/FAIL/WAIVED."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass
from typing import Any

import numpy as np
from scipy import spatial

from netulln.config import RunConfig
from netulln.errors import ProcessSpecError
from netulln.funcspace import BoundedLipschitzFamily, build_delta_net, certify_bounds
from netulln.harness.audit import Check, Status
from netulln.netgraph import (
    denseness_decay_sum,
    partition_violations,
    shell_stats,
    sparsity_audit,
)
from netulln.process import (
    DecayProfile,
    empirical_cov_decay,
    mixing_matrices,
    psi_bound,
    theoretical_decay,
)
from netulln.rng import generator, stream_seed

logger = logging.getLogger(__name__)

Mapper = Callable[[Callable[[Any], Any], Iterable[Any]], Iterator[Any]]

SECTION = "diagnose"
ACCEPTANCE = "acceptance"
DEPENDENCE_CHECKS = frozenset({"decay_profile", "decay_power_bound", "denseness_decay"})
_COVER_SLACK = 1e-12


@dataclass(frozen=True)
class ShellRow:
    n: int
    s: int
    average: float
    largest: int


@dataclass(frozen=True)
class DiagnoseReport:
    checks: tuple[Check, ...]
    shells: tuple[ShellRow, ...]

    def failed(self) -> set[str]:
        return {check.name for check in self.checks if check.status is Status.FAIL}

    def waived(self) -> set[str]:
        return {check.name for check in self.checks if check.status is Status.WAIVED}

    def csv_rows(self) -> list[tuple[Any, ...]]:
        rows: list[tuple[Any, ...]] = [
            (
                "shells",
                "shell_size",
                row.n,
                row.s,
                "",
                row.average,
                f"max {row.largest}",
            )
            for row in self.shells
        ]
        rows.extend(
            (
                check.section,
                check.name,
                check.n,
                check.s,
                check.status.label,
                check.value,
                check.detail,
            )
            for check in self.checks
        )
        return rows


def effective_decay(config: RunConfig) -> DecayProfile:
    return config.decay_override or theoretical_decay(config.process)


def family_roles(config: RunConfig) -> dict[str, BoundedLipschitzFamily]:
    roles = {"family": config.family.build()}
    if "m" in config.estimation.estimators:
        roles["m_family"] = config.estimation.m_family.build()
    if "gmm" in config.estimation.estimators:
        roles["gmm_family"] = config.estimation.gmm_family.build()
    return roles


def run_diagnose(config: RunConfig, mapper: Mapper = map) -> DiagnoseReport:
    decay = effective_decay(config)
    checks: list[Check] = []
    shells: list[ShellRow] = []

    per_n = list(
        mapper(lambda n: _network_checks(config, decay, n), config.diagnose.n_grid)
    )
    previous: float | None = None
    for rows, denseness, n_checks in per_n:
        shells.extend(rows)
        n = rows[0].n
        shrinking = previous is None or denseness < previous
        checks.append(
            Check(
                SECTION,
                "denseness_decay",
                Status.of(shrinking),
                detail=(
                    "first grid point"
                    if previous is None
                    else f"previous {previous:.6g}"
                ),
                n=n,
                value=denseness,
            )
        )
        previous = denseness
        checks.extend(n_checks)

    checks.extend(_decay_checks(config, decay))
    checks.append(_shock_check(config))
    checks.extend(_family_checks(config))
    checks.extend(_net_checks(config))
    checks.extend(_covariance_checks(config, mapper))

    failing = sum(check.status is Status.FAIL for check in checks)
    logger.info("Diagnose finished: %d check(s), %d failing", len(checks), failing)
    return DiagnoseReport(checks=tuple(checks), shells=tuple(shells))


def _network_checks(
    config: RunConfig, decay: DecayProfile, n: int
) -> tuple[list[ShellRow], float, list[Check]]:
    net = config.network.build(n, config.seed)
    stats = shell_stats(net, config.diagnose.shell_s_max)
    largest = stats.per_node_shell_sizes.max(axis=0)
    rows = [
        ShellRow(n=n, s=s, average=float(stats.average(s)), largest=int(largest[s]))
        for s in range(stats.s_max + 1)
    ]
    denseness = denseness_decay_sum(net, decay)

    audit = sparsity_audit(net, config.assumptions)
    status = Status.of(audit.feasible)
    detail = audit.note
    if audit.feasible and audit.partition is not None:
        violations = partition_violations(
            net, audit.partition, audit.partition.required_separation
        )
        if violations:
            i, j, distance = violations[0]
            status = Status.FAIL
            detail = (
                f"{detail}; recheck found nodes {i + 1},{j + 1} "
                f"at distance {distance:g}"
            )
    window = audit.window
    checks = [
        Check(
            SECTION,
            "sparsity_window",
            status,
            detail=(
                f"{detail}; window [{window.lower:.3f}, {window.upper:.3f}], "
                f"beta={window.beta:.4f}"
            ),
            n=n,
            value=None if audit.partition is None else audit.partition.separation,
        )
    ]
    return rows, denseness, checks


def _decay_checks(config: RunConfig, decay: DecayProfile) -> list[Check]:
    problems = decay.violations()
    checks = [
        Check(
            SECTION,
            "decay_profile",
            Status.of(not problems),
            detail="; ".join(problems) or f"{decay.form} profile is monotone from 1",
        )
    ]
    constants = config.assumptions
    s_max = max(config.diagnose.shell_s_max, 2 * config.process.radius)
    exceeded = decay.power_bound_violations(constants.amplitude, constants.p, s_max)
    detail = (
        f"exceeds A*s^(-p/(p-1)) at s={', '.join(str(s) for s in exceeded)}"
        if exceeded
        else (
            f"within A*s^(-p/(p-1)) for s<={s_max} "
            f"(A={constants.amplitude:g}, p={constants.p})"
        )
    )
    checks.append(
        Check(SECTION, "decay_power_bound", Status.of(not exceeded), detail=detail)
    )
    return checks


def _shock_check(config: RunConfig) -> Check:
    spec = config.process
    if spec.shock_loading != 0 and spec.shock_decay == 0:
        return Check(
            SECTION,
            "shock_averaging",
            Status.WAIVED,
            detail=(
                "shock loading does not decay with n; "
                "unconditional results are waived"
            ),
        )
    return Check(
        SECTION,
        "shock_averaging",
        Status.PASS,
        detail=f"loading {spec.shock_loading:g} * n^(-{spec.shock_decay:g})",
    )


def _family_checks(config: RunConfig) -> list[Check]:
    net = config.network.build(config.diagnose.n_grid[0], config.seed)
    spec = config.process
    reach = spec.value_bound(net.n, mixing_matrices(net, spec).max_shell_sizes)
    location = spec.location

    def sample(rng: np.random.Generator, size: int) -> np.ndarray:
        return location + rng.uniform(-reach, reach, size)

    checks: list[Check] = []
    for role, family in family_roles(config).items():
        certificate = certify_bounds(
            family,
            sample,
            config.parameter_space,
            config.diagnose.probes,
            stream_seed(config.seed, "certify", len(checks)),
        )
        if certificate.ok:
            detail = (
                f"{family.name} ({certificate.kind}): "
                f"sup {certificate.sup_observed:.4g} "
                f"<= R={family.sup_bound}, L ratio {certificate.y_ratio:.4g}, "
                f"Lbar ratio {certificate.theta_ratio:.4g}"
            )
        else:
            detail = f"{family.name}: witness {certificate.witness}"
        checks.append(
            Check(
                SECTION,
                f"family_bounds:{role}",
                Status.of(certificate.ok),
                detail=detail,
                value=certificate.sup_observed,
            )
        )
        center = family.at(config.parameter_space.center)
        constant = psi_bound(center, center, 1, 1, config.assumptions.psi_constant)
        checks.append(
            Check(
                SECTION,
                f"psi_bound:{role}",
                Status.PASS,
                detail="C * (R + L)^2 for singleton groups at the box centre",
                value=constant,
            )
        )
    return checks


def _net_checks(config: RunConfig) -> list[Check]:
    """Covering radius of the ULLN net and the ``J ~ delta^-d`` cardinality scaling."""
    space = config.parameter_space
    deltas = config.diagnose.net_deltas
    rng = generator(stream_seed(config.seed, "net-probe"))
    probes = space.sample(rng, config.diagnose.probes)
    checks: list[Check] = []
    for delta in deltas:
        net = build_delta_net(space, delta, anchor=config.ulln.net_anchor)
        worst = float(spatial.cKDTree(net.points).query(probes)[0].max())
        checks.append(
            Check(
                ACCEPTANCE,
                "delta_net_covering",
                Status.of(worst <= delta + _COVER_SLACK),
                detail=(
                    f"delta={delta:g}, J={net.cardinality}, "
                    f"farthest probe {worst:.6g}"
                ),
                value=worst,
            )
        )

    fine = [delta for delta in deltas if delta < space.diameter / 2.0]
    if len(fine) < 2:
        checks.append(
            Check(
                ACCEPTANCE,
                "delta_net_cardinality",
                Status.WAIVED,
                detail="needs two deltas below half the box diameter",
            )
        )
        return checks
    sizes = [
        build_delta_net(space, delta, anchor="centers").cardinality for delta in fine
    ]
    slope = float(np.polyfit(-np.log(fine), np.log(sizes), 1)[0])
    tolerance = config.acceptance.net_slope_tolerance
    checks.append(
        Check(
            ACCEPTANCE,
            "delta_net_cardinality",
            Status.of(abs(slope - space.dimension) <= tolerance),
            detail=(
                f"log J vs log(1/delta) slope {slope:.3f}, "
                f"d={space.dimension} +/- {tolerance:g}"
            ),
            value=slope,
        )
    )
    return checks


def _covariance_checks(config: RunConfig, mapper: Mapper) -> list[Check]:
    """Conditional covariance at distances beyond the dependence radius."""
    options = config.diagnose
    spec = config.process
    net = config.network.build(options.covariance_network_n, config.seed)
    family = config.family.build()
    f = family.at(config.parameter_space.center)
    z = config.acceptance.covariance_z
    checks: list[Check] = []
    for s in options.covariance_distances:
        if s <= 2 * spec.radius:
            checks.append(
                Check(
                    ACCEPTANCE,
                    "covariance_decay",
                    Status.WAIVED,
                    detail=f"s={s} lies within 2r={2 * spec.radius}",
                    n=net.n,
                    s=s,
                )
            )
            continue

        def draw(k: int, s: int = s) -> tuple[float, float]:
            estimate = empirical_cov_decay(
                net,
                spec,
                f,
                f,
                s,
                options.covariance_replications,
                stream_seed(config.seed, "covariance", s, k),
            )
            return estimate.estimate, estimate.se

        try:
            outcomes = list(mapper(draw, range(options.covariance_shock_draws)))
        except ProcessSpecError as error:
            checks.append(
                Check(
                    ACCEPTANCE,
                    "covariance_decay",
                    Status.WAIVED,
                    detail=str(error),
                    n=net.n,
                    s=s,
                )
            )
            continue
        within = [estimate == 0 or estimate < z * se for estimate, se in outcomes]
        rate = float(np.mean(within))
        worst = max(
            (estimate / se if se > 0 else (0.0 if estimate == 0 else math.inf))
            for estimate, se in outcomes
        )
        checks.append(
            Check(
                ACCEPTANCE,
                "covariance_decay",
                Status.of(rate >= config.acceptance.covariance_pass_rate),
                detail=(
                    f"{sum(within)}/{len(within)} shock draws with |cov| < {z:g} SE "
                    f"(largest |z| {worst:.3g})"
                ),
                n=net.n,
                value=rate,
                s=s,
            )
        )
    return checks
