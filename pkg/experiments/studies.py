"""
Parameter Studies

Sweeps built on the offline and online stages: relative errors over a
fine Pe grid for both inner products, the wider-overlap geometry, Pe values
outside the training range, the ablation without H1 products and
enrichment, and the perturbed-transmission plateau study.
"""

from enum import Enum
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from helpers.config_loader import RunConfig, overlap_variant
from helpers.csv_report import (
    CONTRACTION_COLUMNS,
    PERTURBATION_COLUMNS,
    STUDY_COLUMNS,
    emit_plot_data,
    write_iteration_csv,
    write_rows,
)
from hub.errors import ConfigurationError, EstimationError
from hub.logger import get_logger
from hub.orchestrator import (
    ExperimentOrchestrator,
    ExperimentReport,
    OnlineRun,
    build_meshes,
    build_problem,
    pe_tag,
    uniform_pe,
)
from numerics.fem_core import InnerProductKind
from numerics.schwarz import estimate_contraction, run_full_schwarz, run_perturbed_schwarz, solve_monolithic


logger = get_logger("studies")

PRODUCTS = (InnerProductKind.L2D, InnerProductKind.H1D)

# consecutive-iterate norm the contraction runs iterate down to
CONTRACTION_TOL = 1e-10


class StudyName(str, Enum):
    """Studies available to the sweep command"""
    PE_SWEEP = "pe-sweep"
    OVERLAP = "overlap"
    EXTRAPOLATION = "extrapolation"
    ABLATION = "ablation"
    PERTURBATION = "perturbation"


def _rows(study: StudyName, runs: List[OnlineRun], kind: InnerProductKind, enrichment: bool,
          config: RunConfig) -> List[Dict[str, Any]]:
    delta = config.geometry.pipe().overlap_12
    return [
        {
            'study': study.value,
            'Pe': run.pe,
            'delta': delta,
            'product_kind': InnerProductKind(kind).value,
            'enrichment': enrichment,
            'relerr_omega1': run.row['relL2_omega1'],
            'relerr_omega3': run.row['relL2_omega3'],
            'sweeps': run.row['sweeps'],
            'converged': run.row['converged'],
            'extrapolated': run.row['extrapolated'],
        }
        for run in runs
    ]


def _online_rows(orch: ExperimentOrchestrator, study: StudyName, pes: List[float],
                 kind: InnerProductKind, enrichment: bool = True,
                 config: Optional[RunConfig] = None) -> List[Dict[str, Any]]:
    config = config or orch.config
    rom = orch.rom_for(config, kind, enrichment)
    runs = orch.run_online(rom, pes, config=config)
    return _rows(study, runs, kind, enrichment, config)


def run_pe_sweep(orch: ExperimentOrchestrator) -> ExperimentReport:
    """Relative errors on a uniform Pe grid over D for the L2d and H1d products"""
    config = orch.config
    pes = uniform_pe(*config.parameters.d_range, config.studies.pe_sweep_count)
    rows = []
    for kind in PRODUCTS:
        rows += _online_rows(orch, StudyName.PE_SWEEP, pes, kind)
    files = [write_rows(rows, orch.out_dir / "pe_sweep.csv", STUDY_COLUMNS)]
    files += emit_plot_data(rows, orch.out_dir, "figure2")

    by_pe = {}
    for row in rows:
        by_pe.setdefault(row['Pe'], {})[row['product_kind']] = row['relerr_omega1']
    pairs = [v for v in by_pe.values() if len(v) == 2]
    h1_better = sum(1 for v in pairs if v['H1d'] <= v['L2d']) / len(pairs) if pairs else float('nan')
    return orch.study_report(StudyName.PE_SWEEP.value, rows, files,
                             {'pe_values': len(pes), 'omega1_h1_not_worse': h1_better},
                             pe_sweep_violations(h1_better, config.studies.h1_not_worse_fraction))


def pe_sweep_violations(h1_not_worse: float, required: float) -> List[str]:
    if not h1_not_worse >= required:
        return [f"H1d not worse than L2d on Omega1 for {h1_not_worse:.0%} of Pe, required {required:.0%}"]
    return []


def _contraction_row(config: RunConfig, pe: float) -> Dict[str, Any]:
    problem = build_problem(config, build_meshes(config), pe)
    report = run_full_schwarz(problem, config.online.init.rule(),
                              tol=min(config.parameters.offline_tol, CONTRACTION_TOL),
                              max_sweeps=config.parameters.max_sweeps)
    try:
        rho = estimate_contraction(report, skip=1).rho_fit
    except EstimationError as e:
        logger.warning("contraction not estimated", pe=pe, error=str(e))
        rho = float('nan')
    return {'delta': config.geometry.pipe().overlap_12, 'Pe': pe, 'rho_fit': rho, 'sweeps': report.sweeps}


def run_overlap(orch: ExperimentOrchestrator) -> ExperimentReport:
    """Base overlap against the wider-overlap cuts: contraction and online errors"""
    base = orch.config
    wide = overlap_variant(base, tuple(base.studies.overlap_cuts))
    pe_mid = 0.5 * sum(base.parameters.d_range)
    contraction = orch.scheduler.map("contraction", lambda cfg: _contraction_row(cfg, pe_mid), [base, wide])

    rows, base_rows, wide_rows = [], [], []
    for config in (base, wide):
        for kind in PRODUCTS:
            block = _online_rows(orch, StudyName.OVERLAP, base.online.trial_pe, kind, config=config)
            rows += block
            (wide_rows if config is wide else base_rows).extend(block)
    files = [
        write_rows(rows, orch.out_dir / "overlap.csv", STUDY_COLUMNS),
        write_rows(contraction, orch.out_dir / "overlap_contraction.csv", CONTRACTION_COLUMNS),
    ]
    files += emit_plot_data(wide_rows, orch.out_dir, "figure3")
    violations = overlap_violations(contraction[0]['rho_fit'], contraction[1]['rho_fit'],
                                    base_rows, wide_rows, base.studies.overlap_error_slack)
    return orch.study_report(StudyName.OVERLAP.value, rows, files,
                             {'rho_fit': {str(r['delta']): r['rho_fit'] for r in contraction}},
                             violations)


def overlap_violations(rho_base: float, rho_wide: float, base_rows: List[Dict[str, Any]],
                       wide_rows: List[Dict[str, Any]], slack: float) -> List[str]:
    """Wider overlap must contract faster and not raise the online errors beyond `slack`"""
    violations = []
    if not (np.isfinite(rho_base) and np.isfinite(rho_wide)):
        violations.append(f"contraction factor not estimated (base {rho_base}, wide {rho_wide})")
    elif not rho_wide < rho_base:
        violations.append(f"wider overlap contraction {rho_wide:.3g} not below base {rho_base:.3g}")
    base = {(r['Pe'], r['product_kind']): r for r in base_rows}
    for row in wide_rows:
        ref = base.get((row['Pe'], row['product_kind']))
        if ref is None:
            continue
        for column in ('relerr_omega1', 'relerr_omega3'):
            if not row[column] <= (1.0 + slack) * ref[column]:
                violations.append(f"Pe={row['Pe']:g} {row['product_kind']}: wider overlap {column} "
                                  f"{row[column]:.3g} above base {ref[column]:.3g}")
    return violations


def run_extrapolation(orch: ExperimentOrchestrator) -> ExperimentReport:
    """Online errors on a Pe grid reaching outside the training range"""
    config = orch.config
    pes = uniform_pe(*config.studies.extrapolation_range, config.studies.extrapolation_count)
    rows = _online_rows(orch, StudyName.EXTRAPOLATION, pes, config.parameters.inner_product)
    files = [write_rows(rows, orch.out_dir / "extrapolation.csv", STUDY_COLUMNS)]
    files += emit_plot_data(rows, orch.out_dir, "figure4")
    below = [r['Pe'] for r in rows if r['relerr_omega1'] < 0.02]
    return orch.study_report(StudyName.EXTRAPOLATION.value, rows, files,
                             {'omega1_below_2pct': [min(below), max(below)] if below else None})


def run_ablation(orch: ExperimentOrchestrator) -> ExperimentReport:
    """H1d with enrichment against L2d without enrichment on the trial Pe list"""
    config = orch.config
    trial = config.online.trial_pe
    enriched = _online_rows(orch, StudyName.ABLATION, trial, InnerProductKind.H1D, True)
    ablated = _online_rows(orch, StudyName.ABLATION, trial, InnerProductKind.L2D, False)
    rows = enriched + ablated
    files = [write_rows(rows, orch.out_dir / "ablation.csv", STUDY_COLUMNS)]

    largest = sorted(trial)[-3:]
    ratios = {}
    for pe in largest:
        e = next(r['relerr_omega3'] for r in enriched if r['Pe'] == pe)
        a = next(r['relerr_omega3'] for r in ablated if r['Pe'] == pe)
        ratios[f"{pe:g}"] = a / e if e > 0 else float('inf')
    return orch.study_report(StudyName.ABLATION.value, rows, files, {'omega3_ratio': ratios},
                             ablation_violations(ratios, config.studies.ablation_ratio))


def ablation_violations(ratios: Dict[str, float], required: float) -> List[str]:
    return [f"Pe={pe}: ablated Omega3 error only {ratio:.3g}x the enriched one, required {required:g}x"
            for pe, ratio in ratios.items() if not ratio >= required]


def run_perturbation(orch: ExperimentOrchestrator) -> ExperimentReport:
    """Perturbed full Schwarz plateau for every configured mu"""
    config = orch.config
    studies = config.studies
    problem = orch.problem(studies.perturbation_pe)
    reference = solve_monolithic(problem).values
    init = config.online.init.rule()

    def run_one(mu: float):
        return run_perturbed_schwarz(problem, init, tol=1e-14, max_sweeps=studies.perturbation_sweeps,
                                     mu=mu, seed=config.seed, reference=reference)

    reports = orch.scheduler.map("perturbation", run_one, list(studies.perturbation_mu))
    rows, files = [], []
    for mu, report in zip(studies.perturbation_mu, reports):
        plateau = report.plateau if report.plateau is not None else float('nan')
        rows.append({
            'mu': mu,
            'Pe': problem.pe,
            'sweeps': report.sweeps,
            'plateau': plateau,
            'plateau_over_mu': plateau / mu if mu > 0 else float('nan'),
            'error_iter': report.errors[-1],
            'error_rela': float(np.nansum(report.final_relerrs)),
        })
        files.append(write_iteration_csv(report, orch.out_dir / f"perturbation_mu{pe_tag(mu)}.csv"))
    files.insert(0, write_rows(rows, orch.out_dir / "perturbation.csv", PERTURBATION_COLUMNS))
    scaled = [r['plateau_over_mu'] for r in rows]
    return orch.study_report(StudyName.PERTURBATION.value, rows, files, {'plateau_over_mu': scaled},
                             perturbation_violations(scaled, studies.plateau_spread))


def perturbation_violations(plateau_over_mu: List[float], spread: float) -> List[str]:
    """Plateaus scale linearly in mu: plateau/mu stays within `spread` across the grid"""
    values = np.asarray(plateau_over_mu, dtype=float)
    if values.size == 0:
        return []
    if not np.all(np.isfinite(values) & (values > 0)):
        return [f"plateau not measured for every mu: {values.tolist()}"]
    ratio = float(values.max() / values.min())
    if ratio > spread:
        return [f"plateau over mu varies by {ratio:.3g}x across the mu grid, allowed {spread:g}x"]
    return []


STUDIES: Dict[StudyName, Callable[[ExperimentOrchestrator], ExperimentReport]] = {
    StudyName.PE_SWEEP: run_pe_sweep,
    StudyName.OVERLAP: run_overlap,
    StudyName.EXTRAPOLATION: run_extrapolation,
    StudyName.ABLATION: run_ablation,
    StudyName.PERTURBATION: run_perturbation,
}


def run_study(orch: ExperimentOrchestrator, study: str) -> ExperimentReport:
    try:
        name = StudyName(study)
    except ValueError:
        raise ConfigurationError(
            f"unknown study '{study}', expected one of {', '.join(s.value for s in StudyName)}"
        ) from None
    logger.info("study started", study=name.value)
    report = STUDIES[name](orch)
    logger.info("study finished", study=name.value, rows=len(report.rows), files=len(report.files))
    return report
