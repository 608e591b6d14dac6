"""Run one experiment verb end to end: stages, checks, output files, manifest."""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable, Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from netulln.config import RunConfig
from netulln.errors import IdentificationError, NetworkTooLargeError
from netulln.estimate import (
    ConsistencyResult,
    ConsistencySettings,
    run_consistency_experiment,
)
from netulln.harness.audit import Check, Status, exit_code, waive_if
from netulln.harness.diagnose import DEPENDENCE_CHECKS, DiagnoseReport, run_diagnose
from netulln.harness.manifest import (
    CheckRecord,
    OutputRecord,
    RunManifest,
    get_version,
    output_record,
    package_versions,
    seed_records,
    write_manifest,
)
from netulln.harness.outputs import (
    DIAGNOSE_FILE,
    DIAGNOSE_HEADERS,
    PLOT_DATA_FILE,
    PLOT_DATA_HEADERS,
    RESULTS_FILE,
    RESULTS_HEADERS,
    SUMMARY_FILE,
    SUMMARY_HEADERS,
    SummaryRow,
    Tables,
    write_csv,
)
from netulln.netgraph import find_block_partition, generate
from netulln.process import NoiseLaw, ProcessSpec
from netulln.rng import stream_seed
from netulln.verify.maximal import (
    MaximalSettings,
    block_moment_check,
    exhaustive_rademacher_moment,
    maximal_moment,
    run_maximal_experiment,
)
from netulln.verify.ulln import UllnSettings, run_ulln_experiment

logger = logging.getLogger(__name__)

Mapper = Callable[[Callable[[Any], Any], Iterable[Any]], Iterator[Any]]

ACCEPTANCE = "acceptance"
VERB_STAGES = {
    "diagnose": ("diagnose",),
    "verify-ulln": ("ulln",),
    "verify-maximal": ("maximal",),
    "estimate": ("estimate",),
    "full-suite": ("diagnose", "ulln", "maximal", "estimate"),
}
# Stage name -> counters appended to its stream key.
SEED_STAGES = {
    "diagnose": {
        "network": "n",
        "certify": "family index",
        "net-probe": "",
        "covariance": "s, shock draw",
    },
    "ulln": {"network": "n", "ulln": "n, replication", "ulln-oracle": "n"},
    "maximal": {
        "network": "n",
        "maximal": "n",
        "maximal-bootstrap": "",
        "block-moment": "block size",
        "rademacher": "n",
    },
    "estimate": {
        "network": "n",
        "estimate-m": "n, replication",
        "estimate-gmm": "n, replication",
    },
}


@dataclass
class StageOutcome:
    checks: list[Check] = field(default_factory=list)
    tables: Tables = field(default_factory=Tables)
    identification: list[dict[str, Any]] = field(default_factory=list)


@dataclass(frozen=True)
class RunOutcome:
    exit_code: int
    out_dir: Path
    outputs: tuple[OutputRecord, ...]
    checks: tuple[Check, ...]
    diagnose: DiagnoseReport | None


@contextmanager
def worker_map(threads: int) -> Iterator[Mapper]:
    """Order-preserving map over a thread pool; plain ``map`` for one thread."""
    if threads <= 1:
        yield map
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield pool.map


def run(config: RunConfig, experiment: str | None = None) -> RunOutcome:
    verb = experiment or config.experiment
    if verb not in VERB_STAGES:
        raise ValueError(f"unknown experiment '{verb}'")
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stages = VERB_STAGES[verb]
    timings: dict[str, float] = {}
    checks: list[Check] = []
    tables = Tables()
    identification: list[dict[str, Any]] = []
    report: DiagnoseReport | None = None
    ulln_passed: bool | None = None

    logger.info("Running %s (seed %d, %d thread(s))", verb, config.seed, config.threads)
    with worker_map(config.threads) as mapper:
        for stage in stages:
            started = time.perf_counter()
            if stage == "diagnose":
                report = run_diagnose(config, mapper)
                checks.extend(report.checks)
                timings[stage] = time.perf_counter() - started
                continue
            if stage == "ulln":
                outcome = ulln_stage(config, mapper, report)
                conditional = [
                    c for c in outcome.checks if c.name == "ulln_conditional"
                ]
                if conditional:
                    ulln_passed = conditional[0].status is Status.PASS
            elif stage == "maximal":
                outcome = maximal_stage(config, mapper, report)
            else:
                outcome = estimate_stage(config, mapper, report, ulln_passed)
            checks.extend(outcome.checks)
            tables.extend(outcome.tables)
            identification.extend(outcome.identification)
            timings[stage] = time.perf_counter() - started

    if verb == "diagnose":
        code = exit_code(checks, strict=config.strict)
    else:
        code = exit_code(
            (check for check in checks if check.section == ACCEPTANCE),
            strict=config.strict,
        )

    outputs: list[OutputRecord] = []
    if report is not None:
        path = out_dir / DIAGNOSE_FILE
        rows_written = write_csv(path, DIAGNOSE_HEADERS, report.csv_rows())
        outputs.append(output_record(path, rows_written))
    if verb != "diagnose":
        for name, headers, rows in (
            (RESULTS_FILE, RESULTS_HEADERS, tables.results),
            (SUMMARY_FILE, SUMMARY_HEADERS, [row.cells() for row in tables.summary]),
            (PLOT_DATA_FILE, PLOT_DATA_HEADERS, tables.plot_data),
        ):
            path = out_dir / name
            outputs.append(output_record(path, write_csv(path, headers, rows)))

    seeds: dict[str, str] = {}
    for stage in stages:
        seeds.update(SEED_STAGES[stage])
    manifest = RunManifest(
        netulln_version=get_version(),
        experiment=verb,
        strict=config.strict,
        exit_code=code,
        config=config.to_mapping(),
        seeds=seed_records(config.seed, seeds),
        checks=[CheckRecord(**check.as_dict()) for check in checks],
        identification=identification,
        versions=package_versions(),
        timings={stage: round(seconds, 3) for stage, seconds in timings.items()},
        outputs=outputs,
    )
    write_manifest(out_dir, manifest)
    logger.info("Wrote %d output file(s) to %s", len(outputs) + 1, out_dir)
    return RunOutcome(
        exit_code=code,
        out_dir=out_dir,
        outputs=tuple(outputs),
        checks=tuple(checks),
        diagnose=report,
    )


def _diagnose_reasons(report: DiagnoseReport | None, names: Iterable[str]) -> list[str]:
    if report is None:
        return []
    failed = report.failed()
    return [f"diagnose check {name} failed" for name in sorted(set(names) & failed)]


def ulln_stage(
    config: RunConfig, mapper: Mapper, report: DiagnoseReport | None = None
) -> StageOutcome:
    outcome = StageOutcome()
    options = config.ulln
    family = config.family.build()
    ceiling = config.acceptance.ulln_slope_ceiling
    for mode in options.modes:
        settings = UllnSettings(
            n_grid=options.n_grid,
            network=config.network,
            process=config.process,
            family=family,
            space=config.parameter_space,
            replications=options.replications,
            seed=config.seed,
            mode=mode,
            constants=config.assumptions,
            delta=options.delta,
            net_anchor=options.net_anchor,
            oracle_draws=options.oracle_draws,
            oracle_se_ceiling=options.oracle_se_ceiling,
        )
        result = run_ulln_experiment(settings, mapper)
        medians = result.medians
        slope = result.slope
        passed = result.strictly_decreasing and slope <= ceiling
        check = Check(
            ACCEPTANCE,
            f"ulln_{mode}",
            Status.of(passed),
            detail=(
                f"medians {', '.join(f'{m:.4g}' for m in medians)}; "
                f"slope {slope:.3f} (ceiling {ceiling:g})"
            ),
            value=slope,
        )
        reasons = _diagnose_reasons(
            report, {*DEPENDENCE_CHECKS, "family_bounds:family"}
        )
        if mode == "unconditional":
            reasons.extend(result.warnings)
            spec = config.process
            if spec.shock_loading != 0 and spec.shock_decay == 0:
                reasons.append("common shock does not average out (shock_decay 0)")
        outcome.checks.append(waive_if(check, reasons))

        for index, n in enumerate(result.n_grid):
            deviations = result.deviations[index]
            outcome.tables.add_results("ulln", mode, n, deviations)
            median, q75 = result.per_n[index]
            outcome.tables.summary.append(
                SummaryRow(
                    experiment="ulln",
                    variant=mode,
                    n=n,
                    median=median,
                    q75=q75,
                    mean=float(np.mean(deviations)),
                    se=result.oracle_se,
                    net_size=result.net_size[index],
                    delta=result.net_delta[index],
                )
            )
        outcome.tables.add_series(f"ulln-{mode}-median", zip(result.n_grid, medians))
        outcome.tables.add_series(
            f"ulln-{mode}-q75",
            ((n, q75) for n, (_, q75) in zip(result.n_grid, result.per_n)),
        )
    return outcome


def _rademacher_spec() -> ProcessSpec:
    return ProcessSpec(
        kind="network_ma",
        radius=0,
        weights=(1.0,),
        innovation=NoiseLaw(name="rademacher", bound=1.0),
    )


def maximal_stage(
    config: RunConfig, mapper: Mapper, report: DiagnoseReport | None = None
) -> StageOutcome:
    outcome = StageOutcome()
    options = config.maximal
    acceptance = config.acceptance
    constants = config.assumptions
    p = options.moment_order or constants.p

    result = run_maximal_experiment(
        MaximalSettings(
            n_grid=options.n_grid,
            network=config.network,
            process=config.process,
            replications=options.replications,
            seed=config.seed,
            constants=constants,
            moment_order=options.moment_order,
            n_boot=options.bootstrap,
            tolerance=acceptance.maximal_tolerance,
        ),
        mapper,
    )
    fit = result.fit
    check = Check(
        ACCEPTANCE,
        "maximal_growth",
        Status.of(result.passes),
        detail=(
            f"slope {fit.slope:.3f}, "
            f"{fit.level:.0%} CI [{fit.ci_low:.3f}, {fit.ci_high:.3f}] "
            f"vs cap p*beta={result.cap:.3f} + {result.tolerance:g}"
        ),
        value=fit.ci_high,
    )
    reasons = _diagnose_reasons(report, DEPENDENCE_CHECKS)
    reasons.extend(
        f"n={audit.n}: {audit.note}" for audit in result.audits if not audit.feasible
    )
    outcome.checks.append(waive_if(check, reasons))
    for index, n in enumerate(result.n_grid):
        outcome.tables.summary.append(
            SummaryRow(
                experiment="maximal",
                variant=f"p={result.p}",
                n=n,
                mean=result.moments[index],
                se=result.moment_se[index],
            )
        )
    log_n = np.log(np.asarray(result.n_grid, dtype=np.float64))
    outcome.tables.add_series("maximal-loglog", zip(log_n, np.log(result.moments)))
    outcome.tables.add_series(
        "maximal-fit", zip(log_n, fit.intercept + fit.slope * log_n)
    )

    outcome.checks.append(_block_moment(config, mapper, p, outcome.tables))
    outcome.checks.extend(_rademacher(config, outcome.tables))
    return outcome


def _block_moment(config: RunConfig, mapper: Mapper, p: int, tables: Tables) -> Check:
    options = config.maximal
    n = options.block_network_n
    net = config.network.build(n, config.seed)

    def measure(b: int) -> tuple[int, Any, str | None]:
        try:
            partition = find_block_partition(net, b, config.assumptions.separation)
        except NetworkTooLargeError as error:
            return b, None, str(error)
        if not partition.feasible:
            return b, None, (
                f"b={b}: separation {partition.separation:g} "
                f"< {partition.required_separation:g}"
            )
        moment = block_moment_check(
            net,
            config.process,
            partition,
            p,
            options.block_replications,
            stream_seed(config.seed, "block-moment", b),
        )
        return b, moment, None

    outcomes = list(mapper(measure, options.block_sizes))
    reasons = [reason for _, _, reason in outcomes if reason is not None]
    ratios = [moment.ratio for _, moment, _ in outcomes if moment is not None]
    for b, moment, _ in outcomes:
        if moment is None:
            continue
        tables.summary.append(
            SummaryRow(
                experiment="block_moment",
                variant=f"b={b}",
                n=n,
                mean=moment.ratio,
                se=moment.se,
            )
        )
        tables.add_series("block-moment-ratio", [(b, moment.ratio)])
    if not ratios:
        return Check(
            ACCEPTANCE, "block_moment", Status.WAIVED, detail="; ".join(reasons), n=n
        )
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else math.inf
    factor = config.acceptance.block_ratio_factor
    check = Check(
        ACCEPTANCE,
        "block_moment",
        Status.of(spread < factor),
        detail=(
            f"E|S_j|^p / b^(p/2) = {', '.join(f'{r:.4g}' for r in ratios)}; "
            f"max/min {spread:.3f} (limit {factor:g})"
        ),
        n=n,
        value=spread,
    )
    return waive_if(check, reasons)


def _rademacher(config: RunConfig, tables: Tables) -> list[Check]:
    """Monte Carlo maximal moments of i.i.d. signs against exact enumeration."""
    options = config.maximal
    spec = _rademacher_spec()
    multiple = config.acceptance.rademacher_se_multiple
    checks: list[Check] = []
    for n in options.rademacher_n:
        net = generate("path", {"n": n})
        estimate = maximal_moment(
            net,
            spec,
            options.rademacher_order,
            None,
            options.rademacher_replications,
            stream_seed(config.seed, "rademacher", n),
        )
        exact = exhaustive_rademacher_moment(n, options.rademacher_order)
        gap = abs(estimate.value - exact)
        tables.summary.append(
            SummaryRow(
                experiment="rademacher",
                variant=f"p={options.rademacher_order}",
                n=n,
                mean=estimate.value,
                se=estimate.se,
                bias=estimate.value - exact,
            )
        )
        checks.append(
            Check(
                ACCEPTANCE,
                "rademacher_exact",
                Status.of(gap <= multiple * estimate.se),
                detail=(
                    f"Monte Carlo {estimate.value:.5g} (SE {estimate.se:.3g}) "
                    f"vs exact {exact:.5g}"
                ),
                n=n,
                value=gap / estimate.se if estimate.se > 0 else 0.0,
            )
        )
    return checks


def estimate_stage(
    config: RunConfig,
    mapper: Mapper,
    report: DiagnoseReport | None = None,
    ulln_passed: bool | None = None,
) -> StageOutcome:
    outcome = StageOutcome()
    options = config.estimation
    results: dict[str, ConsistencyResult] = {}
    for estimator in options.estimators:
        choice = options.m_family if estimator == "m" else options.gmm_family
        role = f"{estimator}_family"
        weightings = ("identity",) if estimator == "m" else options.weightings
        for weighting in weightings:
            variant = "m" if estimator == "m" else f"gmm-{weighting}"
            settings = ConsistencySettings(
                estimator=estimator,
                n_grid=options.n_grid,
                network=config.network,
                process=config.process,
                family=choice.build(),
                space=config.parameter_space,
                theta0=options.theta0,
                replications=options.replications,
                seed=config.seed,
                net_delta=options.net_delta,
                refine_tol=options.refine_tol,
                weighting=weighting,
                ulln_passed=ulln_passed,
            )
            try:
                result = run_consistency_experiment(settings, mapper)
            except IdentificationError as error:
                logger.warning("Estimator %s refused: %s", variant, error)
                outcome.identification.append(
                    {"variant": variant, "refused": str(error)}
                )
                outcome.checks.append(
                    Check(
                        ACCEPTANCE,
                        f"estimate_{variant}",
                        Status.WAIVED,
                        detail=f"refused: {error}",
                    )
                )
                continue
            results[variant] = result
            outcome.identification.append(
                {"variant": variant, **result.audit.as_dict()}
            )
            outcome.checks.append(
                _consistency_check(config, variant, result, report, role)
            )
            _consistency_tables(outcome.tables, variant, result)

    if "gmm-identity" in results and "gmm-inverse_variance" in results:
        outcome.checks.append(
            _weighting_agreement(
                config, results["gmm-identity"], results["gmm-inverse_variance"]
            )
        )
    return outcome


def _consistency_check(
    config: RunConfig,
    variant: str,
    result: ConsistencyResult,
    report: DiagnoseReport | None,
    role: str,
) -> Check:
    rmse = result.rmse
    ratio_limit = config.acceptance.rmse_ratio
    decreasing = result.rmse_decreasing
    if decreasing is None:
        passed = True
        trend = "single grid point"
    else:
        passed = decreasing and result.final_ratio < ratio_limit
        trend = f"final/first {result.final_ratio:.3f} (limit {ratio_limit:g})"
    check = Check(
        ACCEPTANCE,
        f"estimate_{variant}",
        Status.of(passed),
        detail=f"RMSE {', '.join(f'{r:.4g}' for r in rmse)}; {trend}",
        value=float(rmse[-1]),
    )
    reasons = _diagnose_reasons(report, {f"family_bounds:{role}"})
    if result.audit.ulln_passed is False:
        reasons.append("ULLN conditional check did not pass")
    return waive_if(check, reasons)


def _consistency_tables(
    tables: Tables, variant: str, result: ConsistencyResult
) -> None:
    for row in result.rows:
        tables.add_results("estimate", variant, row.n, row.errors)
        tables.summary.append(
            SummaryRow(
                experiment="estimate",
                variant=variant,
                n=row.n,
                median=row.abs_error_q50,
                bias=row.bias,
                rmse=row.rmse,
            )
        )
    tables.add_series(
        f"estimate-{variant}-rmse", ((row.n, row.rmse) for row in result.rows)
    )


def _weighting_agreement(
    config: RunConfig, identity: ConsistencyResult, weighted: ConsistencyResult
) -> Check:
    """Both weightings see the same draws, so their estimates pair up."""
    last_identity = identity.rows[-1]
    last_weighted = weighted.rows[-1]
    gap = float(np.sqrt(np.mean((last_identity.errors - last_weighted.errors) ** 2)))
    scale = max(last_identity.rmse, last_weighted.rmse)
    limit = config.acceptance.gmm_agreement * scale
    return Check(
        ACCEPTANCE,
        "gmm_weighting_agreement",
        Status.of(gap <= limit),
        detail=f"root mean squared gap {gap:.4g} vs limit {limit:.4g}",
        n=last_identity.n,
        value=gap,
    )
