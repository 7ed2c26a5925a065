"""
romschwarz Orchestrator

Turns a validated RunConfig into runs: the 1D rate table, the offline
stage, the online reduced iteration over the trial Pe list, and the
studies. Independent per-Pe runs go through the RunScheduler; every file is
written here, after the results are gathered.
"""

from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from helpers.config_loader import RunConfig
from helpers.csv_report import (
    summarize_frame,
    write_iteration_csv,
    write_rate_table,
    write_rows,
    write_summary_csv,
)
from hub.errors import ConfigurationError
from hub.logger import get_logger
from hub.scheduler import RunScheduler
from numerics.analytic1d import reproduce_rate_table
from numerics.fem_core import InnerProductKind
from numerics.geometry_mesh import DecomposedMeshes, build_decomposed_meshes, build_pipe_decomposition
from numerics.reduced_schwarz import exact_tau_oracle, run_reduced_schwarz, summary_row
from numerics.schwarz import PipeProblem, SchwarzReport, solve_monolithic
from rom.trace_rom import (
    OfflineResult,
    OfflineSettings,
    RomArtifact,
    check_compatibility,
    load_rom,
    run_offline,
    save_rom,
)


logger = get_logger("orchestrator")


class ExperimentReport(BaseModel):
    """Outcome of one command: rows, emitted files and the exit code"""
    run_id: str
    command: str
    config_hash: str
    rows: List[Dict[str, Any]] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list)
    exit_code: int = 0
    warnings: List[str] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict)
    timestamp: datetime = Field(default_factory=datetime.utcnow)

    def missing_files(self) -> List[str]:
        return [f for f in self.files if not Path(f).exists()]


def build_meshes(config: RunConfig) -> DecomposedMeshes:
    decomposition = build_pipe_decomposition(config.geometry.pipe())
    return build_decomposed_meshes(decomposition, config.geometry.resolution())


def build_problem(config: RunConfig, meshes: DecomposedMeshes, pe: float) -> PipeProblem:
    return PipeProblem(meshes=meshes, pe=float(pe), diffusion=config.physics.diffusion,
                       beta_y=config.physics.beta_y, source=config.physics.source,
                       inlet=config.inlet(), method=config.solver.method,
                       solver_tol=config.solver.tol)


def offline_settings(config: RunConfig, kind: Optional[InnerProductKind] = None,
                     enrichment: Optional[bool] = None) -> OfflineSettings:
    p = config.parameters
    return OfflineSettings(
        d_train=p.d_train(),
        d_tilde=p.d_tilde(),
        sigma=p.sigma,
        kind=InnerProductKind(kind or p.inner_product),
        offline_tol=p.offline_tol,
        max_sweeps=p.max_sweeps,
        grid_counts=p.interface_grid_counts(),
        n_hidden=config.network.n_hidden,
        seed=config.seed,
        max_iter=config.network.max_iter,
        val_fraction=config.network.val_fraction,
        include_pe=p.include_pe_feature,
        enrichment=p.enrichment if enrichment is None else enrichment,
        init=config.online.init.rule(),
    )


def pe_tag(pe: float) -> str:
    return f"{pe:.6g}".replace('.', 'p')


@dataclass
class OnlineRun:
    pe: float
    report: SchwarzReport
    row: Dict[str, Any]


class ExperimentOrchestrator:
    """
    Runs the commands of one configuration into one output directory
    """

    def __init__(self, config: RunConfig, out_dir: Union[str, Path], workers: Optional[int] = None):
        self.config = config
        self.out_dir = Path(out_dir)
        self.workers = workers or config.workers
        self.scheduler = RunScheduler(self.workers)
        self.config_hash = config.config_hash()
        self._meshes: Optional[DecomposedMeshes] = None
        self._roms: Dict[Tuple[str, str, bool], RomArtifact] = {}
        self.logger = logger.bind(config_hash=self.config_hash[:12])

    @property
    def meshes(self) -> DecomposedMeshes:
        if self._meshes is None:
            self._meshes = build_meshes(self.config)
        return self._meshes

    def problem(self, pe: float) -> PipeProblem:
        return build_problem(self.config, self.meshes, pe)

    def _report(self, command: str, **fields) -> ExperimentReport:
        return ExperimentReport(run_id=f"{command}-{self.config_hash[:12]}", command=command,
                                config_hash=self.config_hash, **fields)

    def _write_manifest(self, report: ExperimentReport, directory: Path) -> Path:
        path = directory / f"{report.command}_report.json"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(report.model_dump_json(indent=1) + "\n")
        return path

    def verify1d(self) -> ExperimentReport:
        """Rate table over the configured (Pe, delta) cells"""
        oned = self.config.oned
        rows = reproduce_rate_table(oned.pe_list, oned.delta_list,
                                    max_sweeps=oned.max_sweeps, warmup=oned.warmup)
        path = write_rate_table(rows, self.out_dir / "table1.csv")
        warnings = []
        for row in rows:
            if row['diverged']:
                warnings.append(f"cell Pe={row['Pe']:g}, delta={row['delta']:g} diverged")
            elif row['rel_dev'] > oned.max_rel_dev:
                warnings.append(f"cell Pe={row['Pe']:g}, delta={row['delta']:g} deviates by "
                                f"{row['rel_dev']:.1%} (budget {oned.max_rel_dev:.0%})")
        report = self._report("verify1d", rows=rows, files=[str(path)], exit_code=1 if warnings else 0,
                              warnings=warnings,
                              summary={'cells': len(rows), 'max_rel_dev': max(r['rel_dev'] for r in rows)})
        self.logger.info("verify1d finished", cells=len(rows), exit_code=report.exit_code)
        return report

    def train(self, config: Optional[RunConfig] = None, kind: Optional[InnerProductKind] = None,
              enrichment: Optional[bool] = None) -> OfflineResult:
        config = config or self.config
        meshes = self.meshes if config is self.config else build_meshes(config)
        problem = build_problem(config, meshes, config.parameters.d_range[0])
        return run_offline(problem, offline_settings(config, kind, enrichment), self.workers)

    def rom_for(self, config: Optional[RunConfig] = None, kind: Optional[InnerProductKind] = None,
                enrichment: Optional[bool] = None) -> RomArtifact:
        """Trained artifact, cached per (config, product, enrichment)"""
        config = config or self.config
        kind = InnerProductKind(kind or config.parameters.inner_product)
        enrichment = config.parameters.enrichment if enrichment is None else enrichment
        key = (config.config_hash(), kind.value, enrichment)
        if key not in self._roms:
            self._roms[key] = self.train(config, kind, enrichment).rom
        return self._roms[key]

    def offline(self, rom_path: Optional[Union[str, Path]] = None) -> Tuple[ExperimentReport, OfflineResult]:
        """Steps 1-3 end to end; the artifact is written only when every stage succeeded"""
        result = self.train()
        rom_path = Path(rom_path) if rom_path else self.out_dir / "rom.json"
        save_rom(result.rom, rom_path)
        self._roms[(self.config_hash, result.rom.kind.value, result.rom.training['enrichment'])] = result.rom

        summary = result.summary
        mode_rows = [
            {'interface': name, 'modes': summary['modes'][name], 'energy': summary['energy'][name]}
            for name in summary['modes']
        ]
        bound_rows = [{'latent_dim': j + 1, 'lower': lo, 'upper': hi} for j, (lo, hi) in enumerate(summary['bounds'])]
        files = [
            str(rom_path),
            str(write_rows(mode_rows, self.out_dir / "offline_modes.csv", ['interface', 'modes', 'energy'])),
            str(write_rows(bound_rows, self.out_dir / "offline_bounds.csv", ['latent_dim', 'lower', 'upper'])),
        ]
        report = self._report("offline", rows=mode_rows, files=files, warnings=result.warnings,
                              summary={k: v for k, v in summary.items() if k != 'energy'})
        files.append(str(self._write_manifest(report, self.out_dir)))
        report.files = files
        self.logger.info("offline finished", rom=str(rom_path), modes=summary['modes'],
                         enrichment_rows=summary['enrichment_rows'])
        return report, result

    def run_online(self, rom: Optional[RomArtifact], trial_pe: List[float], oracle: bool = False,
                   config: Optional[RunConfig] = None) -> List[OnlineRun]:
        """Reduced Schwarz per Pe (trained map or exact oracle), in parallel"""
        config = config or self.config
        meshes = self.meshes if config is self.config else build_meshes(config)
        if rom is not None and not oracle:
            check_compatibility(rom, meshes, build_problem(config, meshes, trial_pe[0]))
        online = config.online

        def run_one(pe: float) -> OnlineRun:
            problem = build_problem(config, meshes, pe)
            reference = solve_monolithic(problem).values
            trace_map = exact_tau_oracle(problem) if oracle else rom
            report = run_reduced_schwarz(problem, trace_map, online.init.rule(), online.eps_stop,
                                         online.max_sweeps, reference=reference)
            return OnlineRun(pe=float(pe), report=report, row=summary_row(report))

        return self.scheduler.map("online", run_one, list(trial_pe))

    def online(self, rom_path: Optional[Union[str, Path]], oracle: bool = False) -> ExperimentReport:
        if rom_path is None and not oracle:
            raise ConfigurationError("online stage needs a ROM artifact unless the oracle is used")
        rom = load_rom(rom_path) if rom_path else None
        runs = self.run_online(rom, self.config.online.trial_pe, oracle)
        files = []
        for run in runs:
            files.append(str(write_iteration_csv(run.report, self.out_dir / f"iterations_pe{pe_tag(run.pe)}.csv")))
        rows = [run.row for run in runs]
        files.insert(0, str(write_summary_csv(rows, self.out_dir / "summary.csv")))

        budget = self.config.online
        violations = []
        for row in rows:
            if row['extrapolated']:
                continue
            if not (row['relL2_omega1'] <= budget.budget_omega1 and row['relL2_omega3'] <= budget.budget_omega3):
                violations.append(f"Pe={row['Pe']:g}: relL2 ({row['relL2_omega1']:.3g}, "
                                  f"{row['relL2_omega3']:.3g}) above budget")
        warnings = violations + [w for run in runs for w in run.report.warnings]
        report = self._report("online", rows=rows, files=files, exit_code=1 if violations else 0,
                              warnings=warnings,
                              summary={'oracle': oracle, 'trial_pe': len(rows),
                                       'omega2_solves': sum(r['omega2_solves'] for r in rows)})
        report.files.append(str(self._write_manifest(report, self.out_dir)))
        self.logger.info("online finished", rows=len(rows), oracle=oracle, exit_code=report.exit_code,
                         errors=summarize_frame(rows, ["relL2_omega1", "relL2_omega3"]))
        return report

    def study_report(self, study: str, rows: List[Dict[str, Any]], files: List[Path],
                     summary: Optional[Dict[str, Any]] = None,
                     violations: Optional[List[str]] = None) -> ExperimentReport:
        """A study report; any budget violation gives exit code 1"""
        violations = list(violations or [])
        report = self._report(f"sweep-{study}", rows=rows, files=[str(f) for f in files],
                              exit_code=1 if violations else 0, warnings=violations,
                              summary=summary or {})
        report.files.append(str(self._write_manifest(report, self.out_dir)))
        if violations:
            self.logger.warning("study budget violated", study=study, violations=violations)
        return report


def uniform_pe(low: float, high: float, count: int) -> List[float]:
    if count < 1:
        raise ConfigurationError("Pe grid needs at least one value")
    return np.linspace(low, high, count).tolist() if count > 1 else [0.5 * (low + high)]
