"""
Offline trace reduction

Step 1 collects Omega2 interface traces from full Schwarz runs over the
training set and compresses each interface by POD. Step 2 projects the
snapshots to latent coefficients, bounds them and enriches the dataset with
direct Omega2 solves on a coefficient grid. Step 3 trains the latent map.
The result is a self-describing JSON artifact evaluating the reduced trace
map without touching the Omega2 interior.
"""

import itertools
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ValidationError, field_validator

from hub.errors import (
    ArtifactParseError,
    CompatibilityError,
    ConfigurationError,
    DimensionError,
    SolverError,
    UnsupportedVersionError,
)
from hub.logger import get_logger
from numerics.fem_core import InnerProductKind, TraceVector
from numerics.geometry_mesh import DecomposedMeshes, InterfaceId
from numerics.schwarz import InitRule, PipeProblem, SubdomainSolver, run_full_schwarz
from rom.latent_map import LatentMap, finite_or_none, train_latent_map
from rom.pod import PodBasis, compute_pod_basis


logger = get_logger("trace_rom")

FORMAT_VERSION = 1

INPUT_INTERFACES = (InterfaceId.GAMMA_2IN, InterfaceId.GAMMA_2OUT)
OUTPUT_INTERFACES = (InterfaceId.GAMMA_1OUT, InterfaceId.GAMMA_3IN)


@dataclass
class SnapshotSet:
    """Omega2 traces on the four interfaces, one row per (Pe, sweep)"""
    traces: Dict[InterfaceId, np.ndarray]
    tags: List[Tuple[float, int]]
    spacing: float
    d_train: List[float]
    offline_tol: float
    excluded: List[float] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tags)


def collect_snapshots(problem: PipeProblem, d_train: Sequence[float], offline_tol: float = 1e-6,
                      init: Optional[InitRule] = None, max_sweeps: int = 200,
                      workers: int = 1) -> SnapshotSet:
    """Run full Schwarz per training Pe and keep the Omega2 traces of every sweep"""
    d_train = [float(pe) for pe in d_train]
    if not d_train:
        raise ConfigurationError("training set D_train is empty")
    if len(set(d_train)) != len(d_train):
        raise ConfigurationError("training set D_train has repeated values")
    if offline_tol <= 0:
        raise ConfigurationError(f"offline tolerance must be positive, got {offline_tol}")
    meshes = problem.meshes

    def run_one(pe: float):
        rows = []

        def keep(sweep: int, fields: Dict[int, np.ndarray]):
            rows.append((sweep, {r: fields[2][meshes.trace(2, r).nodes].copy() for r in InterfaceId}))

        report = run_full_schwarz(problem.with_pe(pe), init, tol=offline_tol,
                                  max_sweeps=max_sweeps, on_sweep=keep)
        return pe, report.converged, rows

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run_one, d_train))
    else:
        results = [run_one(pe) for pe in d_train]

    traces: Dict[InterfaceId, List[np.ndarray]] = {r: [] for r in InterfaceId}
    tags: List[Tuple[float, int]] = []
    excluded, warnings = [], []
    for pe, converged, rows in results:
        if not converged:
            excluded.append(pe)
            message = f"Schwarz run at Pe={pe!r} did not reach {offline_tol:g}; snapshots excluded"
            warnings.append(message)
            logger.warning("snapshot run excluded", pe=pe, offline_tol=offline_tol)
            continue
        for sweep, values in rows:
            tags.append((pe, sweep))
            for r in InterfaceId:
                traces[r].append(values[r])

    width = meshes.decomposition.geometry.width
    spacing = width / meshes.resolution.ny
    stacked = {
        r: np.vstack(rows) if rows else np.zeros((0, meshes.trace(2, r).size))
        for r, rows in traces.items()
    }
    logger.info("snapshots collected", runs=len(d_train), excluded=len(excluded), snapshots=len(tags))
    return SnapshotSet(traces=stacked, tags=tags, spacing=spacing, d_train=d_train,
                       offline_tol=offline_tol, excluded=excluded, warnings=warnings)


class RowOrigin(str, Enum):
    SNAPSHOT = "snapshot"
    ENRICHMENT = "enrichment"


@dataclass
class LatentDataset:
    """
    Rows (alpha_2in, alpha_2out[, Pe]) -> (alpha_1out, alpha_3in)

    `bounds` holds [min, max] per input latent dimension over snapshot rows.
    """
    latents: np.ndarray
    pe: np.ndarray
    targets: np.ndarray
    provenance: List[RowOrigin]
    bounds: np.ndarray
    include_pe: bool = True

    def __len__(self) -> int:
        return self.latents.shape[0]

    @property
    def inputs(self) -> np.ndarray:
        if self.include_pe:
            return np.hstack([self.latents, self.pe[:, None]])
        return self.latents

    @property
    def input_dim(self) -> int:
        return self.latents.shape[1] + (1 if self.include_pe else 0)

    def count(self, origin: RowOrigin) -> int:
        return sum(1 for p in self.provenance if p == origin)

    def merge(self, other: "LatentDataset") -> "LatentDataset":
        if other.latents.shape[1] != self.latents.shape[1] or other.targets.shape[1] != self.targets.shape[1]:
            raise DimensionError("latent datasets of different dimensions cannot be merged")
        return LatentDataset(
            latents=np.vstack([self.latents, other.latents]),
            pe=np.concatenate([self.pe, other.pe]),
            targets=np.vstack([self.targets, other.targets]),
            provenance=list(self.provenance) + list(other.provenance),
            bounds=self.bounds,
            include_pe=self.include_pe,
        )


def snapshot_dataset(snapshots: SnapshotSet, bases: Dict[InterfaceId, PodBasis],
                     include_pe: bool = True) -> LatentDataset:
    """Project every snapshot row and bound the input coefficients"""
    if len(snapshots) == 0:
        raise ConfigurationError("no converged snapshot runs to build a dataset from")
    alpha = {r: bases[r].project(snapshots.traces[r]) for r in InterfaceId}
    latents = np.hstack([alpha[r] for r in INPUT_INTERFACES])
    targets = np.hstack([alpha[r] for r in OUTPUT_INTERFACES])
    bounds = np.column_stack([latents.min(axis=0), latents.max(axis=0)])
    return LatentDataset(latents=latents, pe=np.array([pe for pe, _ in snapshots.tags]),
                         targets=targets, provenance=[RowOrigin.SNAPSHOT] * len(snapshots),
                         bounds=bounds, include_pe=include_pe)


def _grid_axes(bounds: np.ndarray, bases: Dict[InterfaceId, PodBasis],
               grid_counts: Dict[InterfaceId, Sequence[int]]) -> List[np.ndarray]:
    axes = []
    dim = 0
    for r in INPUT_INTERFACES:
        counts = list(grid_counts.get(r, ()))
        for j in range(bases[r].n_modes):
            n = int(counts[j]) if j < len(counts) else 1
            if n < 1:
                raise ConfigurationError(f"grid count for {r.value} mode {j + 1} must be >= 1, got {n}")
            lo, hi = bounds[dim]
            axes.append(np.linspace(lo, hi, n) if n > 1 else np.array([0.5 * (lo + hi)]))
            dim += 1
    return axes


def build_enrichment_dataset(bounds: np.ndarray, grid_counts: Dict[InterfaceId, Sequence[int]],
                             d_tilde: Sequence[float], problem: PipeProblem,
                             bases: Dict[InterfaceId, PodBasis], include_pe: bool = True,
                             workers: int = 1) -> Tuple[LatentDataset, List[str]]:
    """
    Solve Omega2 for every coefficient grid point and every Pe in D~.

    Boundary data is the POD reconstruction on Gamma_2in / Gamma_2out (zero
    on the side walls); one factorization per Pe serves the whole grid.
    """
    bounds = np.asarray(bounds, dtype=float)
    if not np.all(np.isfinite(bounds)):
        raise ConfigurationError("enrichment bounds must be finite")
    axes = _grid_axes(bounds, bases, grid_counts)
    grid = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(axes))
    n_in = bases[InterfaceId.GAMMA_2IN].n_modes
    data_2in = bases[InterfaceId.GAMMA_2IN].reconstruct(grid[:, :n_in]).T
    data_2out = bases[InterfaceId.GAMMA_2OUT].reconstruct(grid[:, n_in:]).T
    meshes = problem.meshes

    def run_one(pe: float):
        try:
            solver = SubdomainSolver(problem.with_pe(pe), 2)
            U = solver.solve_many({InterfaceId.GAMMA_2IN: data_2in, InterfaceId.GAMMA_2OUT: data_2out})
        except SolverError as e:
            return pe, None, str(e)
        targets = np.hstack([bases[r].project(U[meshes.trace(2, r).nodes, :].T) for r in OUTPUT_INTERFACES])
        return pe, targets, None

    d_tilde = [float(pe) for pe in d_tilde]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run_one, d_tilde))
    else:
        results = [run_one(pe) for pe in d_tilde]

    latents, pes, targets, warnings = [], [], [], []
    for pe, rows, error in results:
        if rows is None:
            message = f"Omega2 enrichment solve failed at Pe={pe!r}: {error}; rows skipped"
            warnings.append(message)
            logger.warning("enrichment rows skipped", pe=pe, error=error)
            continue
        latents.append(grid)
        pes.append(np.full(grid.shape[0], pe))
        targets.append(rows)

    n_out = sum(bases[r].n_modes for r in OUTPUT_INTERFACES)
    dataset = LatentDataset(
        latents=np.vstack(latents) if latents else np.zeros((0, grid.shape[1])),
        pe=np.concatenate(pes) if pes else np.zeros(0),
        targets=np.vstack(targets) if targets else np.zeros((0, n_out)),
        provenance=[RowOrigin.ENRICHMENT] * sum(len(p) for p in pes),
        bounds=bounds,
        include_pe=include_pe,
    )
    logger.info("enrichment dataset", grid_points=grid.shape[0], pe_values=len(d_tilde), rows=len(dataset))
    return dataset, warnings


@dataclass(frozen=True, eq=False)
class RomArtifact:
    """Four POD bases, the latent map and the fingerprints they were trained for"""
    bases: Dict[InterfaceId, PodBasis]
    latent_map: LatentMap
    geometry: Dict[str, Any]
    problem: Dict[str, Any]
    training: Dict[str, Any]
    version: int = FORMAT_VERSION

    @property
    def include_pe(self) -> bool:
        return bool(self.training.get('include_pe', True))

    @property
    def d_range(self) -> Tuple[float, float]:
        d_train = self.training['d_train']
        return float(min(d_train)), float(max(d_train))

    @property
    def bounds(self) -> np.ndarray:
        return np.asarray(self.training['bounds'], dtype=float)

    @property
    def kind(self) -> InnerProductKind:
        return self.bases[InterfaceId.GAMMA_2IN].kind

    def is_extrapolated(self, pe: float) -> bool:
        lo, hi = self.d_range
        slack = 1e-12 * max(1.0, abs(hi))
        return not (lo - slack <= pe <= hi + slack)

    def to_document(self) -> Dict[str, Any]:
        return {
            'version': self.version,
            'geometry': self.geometry,
            'problem': self.problem,
            'bases': [
                {
                    'interface': r.value,
                    'kind': self.bases[r].kind.value,
                    'sigma': self.bases[r].sigma,
                    'spacing': self.bases[r].spacing,
                    'eigenvalues': self.bases[r].eigenvalues.tolist(),
                    'modes': self.bases[r].modes.tolist(),
                }
                for r in InterfaceId
            ],
            'network': self.latent_map.to_dict(),
            'training': self.training,
        }


class BasisDocument(BaseModel):
    interface: InterfaceId
    kind: InnerProductKind
    sigma: float
    spacing: float
    eigenvalues: List[float]
    modes: List[List[float]]

    @field_validator('modes')
    @classmethod
    def modes_not_empty(cls, v):
        if not v or len({len(row) for row in v}) != 1:
            raise ValueError("modes must be a non-empty rectangular array")
        return v


class WeightsDocument(BaseModel):
    w_hidden: List[List[float]]
    b_hidden: List[float]
    w_out: List[List[float]]
    b_out: List[float]


class NormalizersDocument(BaseModel):
    in_mean: List[float]
    in_scale: List[float]
    out_mean: List[float]
    out_scale: List[float]


class NetworkDocument(BaseModel):
    dims: List[int]
    activation: str
    weights: WeightsDocument
    normalizers: NormalizersDocument
    seed: int
    loss_history: List[float]
    train_loss: Optional[float] = None
    val_loss: Optional[float] = None
    recipe: Dict[str, Any]


class RomDocument(BaseModel):
    """Schema of the persisted artifact"""
    version: int
    geometry: Dict[str, Any]
    problem: Dict[str, Any]
    bases: List[BasisDocument]
    network: NetworkDocument
    training: Dict[str, Any]

    @field_validator('bases')
    @classmethod
    def four_interfaces(cls, v):
        if sorted(b.interface.value for b in v) != sorted(r.value for r in InterfaceId):
            raise ValueError("artifact must hold exactly one basis per interface")
        return v


def save_rom(rom: RomArtifact, path: Union[str, Path]) -> Path:
    """Write the artifact as canonical JSON (sorted keys, round-trip floats)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(rom.to_document(), sort_keys=True, indent=1, allow_nan=False)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text + "\n")
    os.replace(tmp, path)
    logger.info("rom artifact saved", path=str(path), bytes=len(text) + 1)
    return path


def load_rom(path: Union[str, Path]) -> RomArtifact:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ArtifactParseError(f"cannot read ROM artifact {path}: {e}") from e
    if not isinstance(raw, dict) or not isinstance(raw.get('version'), int):
        raise ArtifactParseError(f"ROM artifact {path} has no integer version")
    if raw['version'] != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"ROM artifact {path} has format version {raw['version']}, supported: {FORMAT_VERSION}"
        )
    try:
        doc = RomDocument.model_validate(raw)
    except ValidationError as e:
        raise ArtifactParseError(f"invalid ROM artifact {path}: {e}") from e

    bases = {
        b.interface: PodBasis(interface=b.interface, kind=b.kind, sigma=b.sigma, spacing=b.spacing,
                              modes=np.array(b.modes, dtype=float),
                              eigenvalues=np.array(b.eigenvalues, dtype=float))
        for b in doc.bases
    }
    try:
        latent_map = LatentMap.from_dict(doc.network.model_dump())
    except (KeyError, ValueError) as e:
        raise ArtifactParseError(f"invalid network block in {path}: {e}") from e
    return RomArtifact(bases=bases, latent_map=latent_map, geometry=raw['geometry'],
                       problem=raw['problem'], training=raw['training'], version=doc.version)


def _normalized(document: Dict[str, Any]) -> Any:
    return json.loads(json.dumps(document, sort_keys=True))


def check_compatibility(rom: RomArtifact, meshes: DecomposedMeshes,
                        problem: Optional[PipeProblem] = None):
    """Raise CompatibilityError unless the artifact was built for these meshes (and problem)"""
    expected = _normalized(meshes.geometry_fingerprint())
    if _normalized(rom.geometry) != expected:
        raise CompatibilityError(f"ROM geometry {rom.geometry} does not match meshes {expected}")
    if problem is not None:
        fingerprint = _normalized(problem.fingerprint())
        mismatched = sorted(k for k, v in fingerprint.items() if rom.problem.get(k) != v)
        if mismatched:
            raise CompatibilityError(f"ROM trained for different problem data: {', '.join(mismatched)}")


@dataclass(frozen=True, eq=False)
class TauTildeResult:
    t_1out: TraceVector
    t_3in: TraceVector
    extrapolated: bool


def _as_values(trace: Union[TraceVector, np.ndarray], basis: PodBasis, interface: InterfaceId) -> np.ndarray:
    values = trace.values if isinstance(trace, TraceVector) else np.asarray(trace, dtype=float)
    if values.shape != (basis.n_nodes,):
        raise CompatibilityError(
            f"trace on {interface.value} has {values.shape} values, ROM expects {basis.n_nodes}"
        )
    return values


def _evaluate(rom: RomArtifact, v_2in: np.ndarray, v_2out: np.ndarray, pe: float) -> Tuple[np.ndarray, np.ndarray]:
    b = rom.bases
    latent = [b[InterfaceId.GAMMA_2IN].project(v_2in), b[InterfaceId.GAMMA_2OUT].project(v_2out)]
    if rom.include_pe:
        latent.append(np.array([pe], dtype=float))
    out = rom.latent_map(np.concatenate(latent))
    n1 = b[InterfaceId.GAMMA_1OUT].n_modes
    return b[InterfaceId.GAMMA_1OUT].reconstruct(out[:n1]), b[InterfaceId.GAMMA_3IN].reconstruct(out[n1:])


def evaluate_tau_tilde(rom: RomArtifact, t_2in: Union[TraceVector, np.ndarray],
                       t_2out: Union[TraceVector, np.ndarray], pe: float) -> TauTildeResult:
    """Project the inputs, run the latent map with the Pe feature and reconstruct"""
    v_2in = _as_values(t_2in, rom.bases[InterfaceId.GAMMA_2IN], InterfaceId.GAMMA_2IN)
    v_2out = _as_values(t_2out, rom.bases[InterfaceId.GAMMA_2OUT], InterfaceId.GAMMA_2OUT)
    v_1out, v_3in = _evaluate(rom, v_2in, v_2out, pe)
    return TauTildeResult(
        t_1out=TraceVector(v_1out, rom.bases[InterfaceId.GAMMA_1OUT].spacing, InterfaceId.GAMMA_1OUT),
        t_3in=TraceVector(v_3in, rom.bases[InterfaceId.GAMMA_3IN].spacing, InterfaceId.GAMMA_3IN),
        extrapolated=rom.is_extrapolated(pe),
    )


class RomTraceMap:
    """Reduced trace map bound to one Pe"""

    solves_omega2 = False

    def __init__(self, rom: RomArtifact, pe: float, meshes: Optional[DecomposedMeshes] = None,
                 problem: Optional[PipeProblem] = None):
        if meshes is not None:
            check_compatibility(rom, meshes, problem)
        self.rom = rom
        self.pe = float(pe)
        self.extrapolated = rom.is_extrapolated(self.pe)
        self.evaluations = 0
        if self.extrapolated:
            lo, hi = rom.d_range
            logger.warning("extrapolated pe", pe=self.pe, trained_range=[lo, hi])

    def __call__(self, t_2in: np.ndarray, t_2out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        v_2in = _as_values(t_2in, self.rom.bases[InterfaceId.GAMMA_2IN], InterfaceId.GAMMA_2IN)
        v_2out = _as_values(t_2out, self.rom.bases[InterfaceId.GAMMA_2OUT], InterfaceId.GAMMA_2OUT)
        self.evaluations += 1
        return _evaluate(self.rom, v_2in, v_2out, self.pe)


@dataclass(frozen=True)
class ReductionBound:
    """Monte-Carlo estimate of the relative trace-reduction error"""
    mu: float
    errors: Tuple[float, ...]


TraceMapFn = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


def estimate_reduction_bound(rom: RomArtifact, reference_map: TraceMapFn, pe: float,
                             n_samples: int = 20, seed: int = 0) -> ReductionBound:
    """
    Largest relative difference between the reduced map and `reference_map`
    over random latent points inside the training bounds.
    """
    if n_samples < 1:
        raise ConfigurationError("need at least one sample")
    rng = np.random.default_rng(seed)
    bounds = rom.bounds
    b = rom.bases
    n_in = b[InterfaceId.GAMMA_2IN].n_modes
    reduced = RomTraceMap(rom, pe)
    errors = []
    for _ in range(n_samples):
        point = rng.uniform(bounds[:, 0], bounds[:, 1])
        t_2in = b[InterfaceId.GAMMA_2IN].reconstruct(point[:n_in])
        t_2out = b[InterfaceId.GAMMA_2OUT].reconstruct(point[n_in:])
        approx = reduced(t_2in, t_2out)
        exact = reference_map(t_2in, t_2out)
        num = den = 0.0
        for r, a, e in zip(OUTPUT_INTERFACES, approx, exact):
            W = b[r].weights
            d = np.asarray(a) - np.asarray(e)
            num += float(d @ W @ d)
            den += float(np.asarray(e) @ W @ np.asarray(e))
        errors.append(float(np.sqrt(num / den)) if den > 0 else float('nan'))
    mu = float(np.nanmax(errors)) if np.any(np.isfinite(errors)) else float('nan')
    logger.info("reduction bound", pe=pe, samples=n_samples, mu=mu)
    return ReductionBound(mu=mu, errors=tuple(errors))


@dataclass
class OfflineSettings:
    """Offline stage parameters (defaults reproduce the pipe experiment)"""
    d_train: List[float] = field(default_factory=lambda: np.linspace(5.0, 14.0, 50).tolist())
    d_tilde: List[float] = field(default_factory=lambda: np.linspace(5.0, 14.0, 30).tolist())
    sigma: float = 1e-5
    kind: InnerProductKind = InnerProductKind.H1D
    offline_tol: float = 1e-6
    max_sweeps: int = 200
    grid_counts: Dict[InterfaceId, List[int]] = field(default_factory=lambda: {
        InterfaceId.GAMMA_2IN: [7, 3],
        InterfaceId.GAMMA_2OUT: [7, 3],
    })
    n_hidden: int = 10
    seed: int = 0
    max_iter: int = 1000
    val_fraction: float = 0.1
    include_pe: bool = True
    enrichment: bool = True
    init: InitRule = field(default_factory=InitRule)


@dataclass
class OfflineResult:
    rom: RomArtifact
    snapshots: SnapshotSet
    dataset: LatentDataset
    summary: Dict[str, Any]
    warnings: List[str] = field(default_factory=list)


def run_offline(problem: PipeProblem, settings: Optional[OfflineSettings] = None,
                workers: int = 1) -> OfflineResult:
    """Snapshots, POD, latent dataset (with enrichment), training and artifact assembly"""
    settings = settings or OfflineSettings()
    snapshots = collect_snapshots(problem, settings.d_train, settings.offline_tol,
                                  settings.init, settings.max_sweeps, workers)
    bases = {
        r: compute_pod_basis(snapshots.traces[r], settings.kind, settings.sigma,
                             spacing=snapshots.spacing, interface=r)
        for r in InterfaceId
    }
    dataset = snapshot_dataset(snapshots, bases, settings.include_pe)
    warnings = list(snapshots.warnings)
    if settings.enrichment:
        enriched, enrichment_warnings = build_enrichment_dataset(
            dataset.bounds, settings.grid_counts, settings.d_tilde, problem, bases,
            settings.include_pe, workers)
        dataset = dataset.merge(enriched)
        warnings.extend(enrichment_warnings)

    latent_map = train_latent_map(dataset.inputs, dataset.targets, settings.n_hidden,
                                  settings.seed, settings.max_iter, settings.val_fraction)

    converged_d = [pe for pe in snapshots.d_train if pe not in snapshots.excluded]
    training = {
        'd_train': converged_d,
        'd_tilde': list(settings.d_tilde) if settings.enrichment else [],
        'grid_counts': {r.value: list(c) for r, c in settings.grid_counts.items()},
        'offline_tol': settings.offline_tol,
        'sigma': settings.sigma,
        'kind': InnerProductKind(settings.kind).value,
        'include_pe': settings.include_pe,
        'enrichment': settings.enrichment,
        'bounds': dataset.bounds.tolist(),
        'rows': {'snapshot': dataset.count(RowOrigin.SNAPSHOT),
                 'enrichment': dataset.count(RowOrigin.ENRICHMENT)},
        'loss': {'train': finite_or_none(latent_map.train_loss), 'val': finite_or_none(latent_map.val_loss)},
    }
    rom = RomArtifact(bases=bases, latent_map=latent_map,
                      geometry=_normalized(problem.meshes.geometry_fingerprint()),
                      problem=_normalized(problem.fingerprint()), training=training)

    summary = {
        'modes': {r.value: bases[r].n_modes for r in InterfaceId},
        'energy': {r.value: bases[r].energy for r in InterfaceId},
        'bounds': dataset.bounds.tolist(),
        'snapshots': len(snapshots),
        'snapshot_rows': dataset.count(RowOrigin.SNAPSHOT),
        'enrichment_rows': dataset.count(RowOrigin.ENRICHMENT),
        'train_loss': latent_map.train_loss,
        'val_loss': latent_map.val_loss,
        'excluded': list(snapshots.excluded),
    }
    logger.info("offline stage complete", **{k: v for k, v in summary.items() if k != 'bounds'})
    return OfflineResult(rom=rom, snapshots=snapshots, dataset=dataset, summary=summary, warnings=warnings)
