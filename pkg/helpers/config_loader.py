"""
Configuration Loader for romschwarz runs

YAML run configuration with environment variable substitution, validated
into the RunConfig model. One file describes geometry, physics, the
parameter sets, training, the online stage, the 1D laboratory and the studies.
"""

import hashlib
import json
import os
import re
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from hub.errors import ConfigurationError
from hub.logger import get_logger
from numerics.fem_core import InnerProductKind, SolverMethod
from numerics.geometry_mesh import InterfaceId, MeshResolution, PipeGeometry
from numerics.schwarz import InitKind, InitRule, InletProfile

logger = get_logger("config_loader")

DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config" / "romschwarz.yaml"

TABLE2_PE = [5.09091, 6.18182, 7.27273, 8.36364, 9.45455, 10.5455, 11.6364, 12.7273, 13.9091]


class LatticeConfig(BaseModel):
    nx1: int = Field(120, ge=1)
    nx2: int = Field(240, ge=1)
    nx3: int = Field(140, ge=1)
    ny: int = Field(50, ge=1)


class GeometryConfig(BaseModel):
    width: float = Field(5.0, gt=0)
    length: float = Field(40.0, gt=0)
    cuts: List[float] = Field(default_factory=lambda: [7.0, 12.0, 26.0, 31.0])
    lattice: LatticeConfig = Field(default_factory=LatticeConfig)

    @field_validator('cuts')
    @classmethod
    def four_cuts(cls, v):
        if len(v) != 4:
            raise ValueError(f"cuts must hold L1..L4, got {len(v)} values")
        return v

    def pipe(self) -> PipeGeometry:
        return PipeGeometry(width=self.width, length=self.length, cuts=tuple(self.cuts))

    def resolution(self) -> MeshResolution:
        lat = self.lattice
        return MeshResolution(nx1=lat.nx1, nx2=lat.nx2, nx3=lat.nx3, ny=lat.ny)


class InletConfig(BaseModel):
    kind: str = "parabolic"
    peak: float = 1.0

    @field_validator('kind')
    @classmethod
    def known_kind(cls, v):
        if v not in ("parabolic", "constant"):
            raise ValueError(f"inlet kind must be parabolic or constant, got '{v}'")
        return v


class PhysicsConfig(BaseModel):
    diffusion: float = Field(1.0, gt=0)
    beta_y: float = 0.2
    source: float = 0.0
    inlet: InletConfig = Field(default_factory=InletConfig)


class ParametersConfig(BaseModel):
    d_range: List[float] = Field(default_factory=lambda: [5.0, 14.0])
    d_train_count: int = Field(50, ge=1)
    d_tilde_count: int = Field(30, ge=1)
    grid_counts: Dict[str, List[int]] = Field(default_factory=lambda: {"2in": [7, 3], "2out": [7, 3]})
    sigma: float = Field(1e-5, gt=0, lt=1)
    inner_product: InnerProductKind = InnerProductKind.H1D
    offline_tol: float = Field(1e-6, gt=0)
    max_sweeps: int = Field(200, ge=1)
    include_pe_feature: bool = True
    enrichment: bool = True

    @field_validator('d_range')
    @classmethod
    def ordered_range(cls, v):
        if len(v) != 2 or not v[0] < v[1]:
            raise ValueError(f"d_range must be [low, high] with low < high, got {v}")
        return v

    @field_validator('grid_counts')
    @classmethod
    def counts_positive(cls, v):
        allowed = {InterfaceId.GAMMA_2IN.value, InterfaceId.GAMMA_2OUT.value}
        for key, counts in v.items():
            if key not in allowed:
                raise ValueError(f"grid counts are given for 2in / 2out only, got '{key}'")
            if any(c < 1 for c in counts):
                raise ValueError(f"grid counts for {key} must be >= 1, got {counts}")
        return v

    def _nodes(self, count: int) -> List[float]:
        if count == 1:
            return [0.5 * (self.d_range[0] + self.d_range[1])]
        return np.linspace(self.d_range[0], self.d_range[1], count).tolist()

    def d_train(self) -> List[float]:
        return self._nodes(self.d_train_count)

    def d_tilde(self) -> List[float]:
        return self._nodes(self.d_tilde_count)

    def interface_grid_counts(self) -> Dict[InterfaceId, List[int]]:
        return {InterfaceId(k): list(v) for k, v in self.grid_counts.items()}


class NetworkConfig(BaseModel):
    n_hidden: int = Field(10, ge=1)
    max_iter: int = Field(1000, ge=1)
    val_fraction: float = Field(0.1, ge=0, lt=1)


class InitConfig(BaseModel):
    kind: InitKind = InitKind.SCALED_REFERENCE
    value: float = 0.5

    def rule(self) -> InitRule:
        return InitRule(kind=self.kind, value=self.value)


class OnlineConfig(BaseModel):
    eps_stop: float = Field(1e-9, gt=0)
    max_sweeps: int = Field(200, ge=1)
    init: InitConfig = Field(default_factory=InitConfig)
    trial_pe: List[float] = Field(default_factory=lambda: list(TABLE2_PE))
    budget_omega1: float = Field(1e-2, gt=0)
    budget_omega3: float = Field(3e-2, gt=0)


class SolverConfig(BaseModel):
    method: SolverMethod = SolverMethod.DIRECT
    tol: float = Field(1e-10, gt=0)


class OneDConfig(BaseModel):
    pe_list: List[float] = Field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0])
    delta_list: List[float] = Field(default_factory=lambda: [1.0, 2.0, 4.0])
    max_sweeps: int = Field(20, ge=2)
    warmup: int = Field(8, ge=0)
    max_rel_dev: float = Field(0.10, gt=0)

    @model_validator(mode='after')
    def warmup_fits(self):
        if self.warmup + 3 > self.max_sweeps:
            raise ValueError("1D max_sweeps must exceed warmup by at least 3")
        return self


class StudiesConfig(BaseModel):
    pe_sweep_count: int = Field(100, ge=1)
    overlap_cuts: List[float] = Field(default_factory=lambda: [7.0, 17.0, 21.0, 31.0])
    extrapolation_range: List[float] = Field(default_factory=lambda: [2.0, 20.0])
    extrapolation_count: int = Field(19, ge=2)
    perturbation_mu: List[float] = Field(default_factory=lambda: [1e-6, 1e-4, 1e-2])
    perturbation_pe: float = 5.0
    perturbation_sweeps: int = Field(60, ge=3)
    # acceptance budgets enforced through the sweep exit code
    h1_not_worse_fraction: float = Field(0.75, ge=0.0, le=1.0)
    ablation_ratio: float = Field(3.0, gt=0.0)
    overlap_error_slack: float = Field(0.10, ge=0.0)
    plateau_spread: float = Field(10.0, ge=1.0)


class LoggingConfig(BaseModel):
    level: str = "INFO"
    format: str = "console"
    file: Optional[str] = None
    max_size: str = "10MB"
    backup_count: int = 5


class RunConfig(BaseModel):
    """Validated run configuration"""
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    physics: PhysicsConfig = Field(default_factory=PhysicsConfig)
    parameters: ParametersConfig = Field(default_factory=ParametersConfig)
    network: NetworkConfig = Field(default_factory=NetworkConfig)
    online: OnlineConfig = Field(default_factory=OnlineConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    oned: OneDConfig = Field(default_factory=OneDConfig)
    studies: StudiesConfig = Field(default_factory=StudiesConfig)
    logging: LoggingConfig = Field(default_factory=LoggingConfig)
    seed: int = 0
    workers: int = Field(1, ge=1)

    def inlet(self) -> InletProfile:
        return InletProfile(kind=self.physics.inlet.kind, peak=self.physics.inlet.peak,
                            width=self.geometry.width)

    def config_hash(self) -> str:
        """SHA-256 of the canonical dump of the semantic blocks"""
        semantic = self.model_dump(mode='json', exclude={'logging', 'workers'})
        canonical = json.dumps(semantic, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode()).hexdigest()


class ConfigurationLoader:
    """
    Configuration loader with environment variable support
    """

    def __init__(self, config_dir: Optional[Union[str, Path]] = None):
        self.config_dir = Path(config_dir or DEFAULT_CONFIG.parent)
        self.config_cache: Dict[str, Dict[str, Any]] = {}

    def _resolve(self, config: Union[str, Path]) -> Path:
        path = Path(config)
        if path.suffix in (".yaml", ".yml") or path.exists():
            return path
        return self.config_dir / f"{config}.yaml"

    def load_config(self, config: Union[str, Path], use_cache: bool = True) -> Dict[str, Any]:
        """
        Load a YAML file (path, or name under config_dir) with ${VAR:-default} substitution
        """
        path = self._resolve(config)
        key = str(path)
        if use_cache and key in self.config_cache:
            return self.config_cache[key]
        if not path.exists():
            raise ConfigurationError(f"configuration file not found: {path}")

        try:
            content = self._substitute_env_vars(path.read_text())
            data = yaml.safe_load(content) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"malformed YAML in {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError(f"configuration {path} must be a mapping at top level")

        if use_cache:
            self.config_cache[key] = data
        logger.info("configuration loaded", path=key)
        return data

    def _substitute_env_vars(self, content: str) -> str:
        """
        Substitute environment variables in configuration content

        Supports format: ${VAR_NAME:-default_value}
        """
        def replace_env_var(match):
            var_expr = match.group(1)
            if ":-" in var_expr:
                var_name, default_value = var_expr.split(":-", 1)
                return os.getenv(var_name, default_value)
            return os.getenv(var_expr, "")

        return re.sub(r'\$\{([^}]+)\}', replace_env_var, content)

    def load_run_config(self, config: Optional[Union[str, Path]] = None,
                        overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
        data = self.load_config(config or DEFAULT_CONFIG, use_cache=False)
        if overrides:
            data = _merge(data, overrides)
        try:
            run_config = RunConfig.model_validate(data)
        except ValidationError as e:
            raise ConfigurationError(f"invalid run configuration: {e}") from e
        # geometry invariants are checked where they are defined
        run_config.geometry.pipe()
        return run_config


def _merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


# Global configuration loader instance
config_loader = ConfigurationLoader()


def load_run_config(path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    return config_loader.load_run_config(path, overrides)


def run_config_from_dict(data: Dict[str, Any]) -> RunConfig:
    try:
        run_config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid run configuration: {e}") from e
    run_config.geometry.pipe()
    return run_config


def dump_run_config(run_config: RunConfig) -> str:
    """YAML text of a validated config (enums as plain values)"""
    return yaml.safe_dump(run_config.model_dump(mode='json'), sort_keys=True)


def overlap_variant(run_config: RunConfig, cuts: Tuple[float, float, float, float]) -> RunConfig:
    """Same run with different cut positions and the same axial cell size"""
    data = run_config.model_dump(mode='json')
    geometry = data['geometry']
    hx = geometry['cuts'][1] / geometry['lattice']['nx1']
    L1, L2, L3, L4 = cuts
    geometry['cuts'] = list(cuts)
    geometry['lattice'].update(
        nx1=int(round(L2 / hx)),
        nx2=int(round((L4 - L1) / hx)),
        nx3=int(round((geometry['length'] - L3) / hx)),
    )
    return run_config_from_dict(data)
