"""Experiment configuration: dataclasses, defaults, and TOML round-trip.

Every constant the algorithms need but the benchmark does not pin lives here
with an inspectable default, so a resolved config file fully determines a run.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .dynamics import SystemSpec, lorenz_spec, pendulum_spec, sample_initial
from .planner import PlannerConfig

EVAL_START_SEED = 90217  # dedicated stream for the frozen evaluation starts
DEFAULT_SEEDS = tuple(range(10))

STATE_BOXES = {
    "lorenz": ([-20.0, -20.0, 0.0], [20.0, 20.0, 50.0]),
    "pendulum": ([-math.pi, -8.0], [math.pi, 8.0]),
}


class ConfigError(ValueError):
    """A config file or override failed validation."""


@dataclass(frozen=True)
class SystemConfig:
    name: str = "lorenz"
    sigma_e: float | None = None
    sigma_process: float | None = None
    u_max: float | None = None
    dt: float | None = None


@dataclass(frozen=True)
class ModeConfig:
    mode: str = "smtip"
    t_max: int = 4

    def __post_init__(self):
        if self.mode not in ("barl", "tip", "smtip"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.t_max < 1:
            raise ConfigError("t_max must be >= 1")


@dataclass(frozen=True)
class GPConfig:
    init_lengthscale: float = 5.0
    init_signal_variance: float = 1.0
    init_noise_variance: float = 0.01
    refit_every: int = 5
    refit_restarts: int = 3
    fit_max_iters: int = 40

    def __post_init__(self):
        if self.refit_every < 1:
            raise ConfigError("refit_every must be >= 1")
        if min(self.init_lengthscale, self.init_signal_variance, self.init_noise_variance) <= 0:
            raise ConfigError("initial kernel hyperparameters must be positive")


@dataclass(frozen=True)
class AcquisitionConfig:
    n_candidates: int = 100
    m: int = 5
    traj_horizon: int = 25
    traj_start: str = "initial"
    state_box_lo: tuple = ()
    state_box_hi: tuple = ()

    def __post_init__(self):
        if self.n_candidates < 1 or self.m < 1 or self.traj_horizon < 1:
            raise ConfigError("n_candidates, m and traj_horizon must be >= 1")
        if self.traj_start not in ("initial", "current"):
            raise ConfigError("traj_start must be 'initial' or 'current'")


@dataclass(frozen=True)
class ExperimentSettings:
    n_max: int = 100
    eval_every: int = 2
    eval_horizon: int = 200
    eval_starts: tuple = ()
    seeds: tuple = DEFAULT_SEEDS
    output_dir: str = "runs/out"

    def __post_init__(self):
        if self.n_max < 1 or self.eval_every < 1 or self.eval_horizon < 1:
            raise ConfigError("n_max, eval_every and eval_horizon must be >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")


@dataclass(frozen=True)
class ExperimentConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    mode: ModeConfig = field(default_factory=ModeConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    gp: GPConfig = field(default_factory=GPConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)


def build_system(cfg: SystemConfig) -> SystemSpec:
    kwargs = {}
    if cfg.sigma_e is not None:
        kwargs["sigma_e"] = cfg.sigma_e
    if cfg.sigma_process is not None:
        kwargs["sigma_process"] = cfg.sigma_process
    if cfg.u_max is not None:
        kwargs["u_max"] = cfg.u_max
    if cfg.dt is not None:
        kwargs["dt"] = cfg.dt
    if cfg.name == "lorenz":
        return lorenz_spec(**kwargs)
    if cfg.name == "pendulum":
        return pendulum_spec(**kwargs)
    raise ConfigError(f"unknown system {cfg.name!r}")


def _frozen_eval_starts(spec: SystemSpec, count: int = 5) -> tuple:
    rng = np.random.default_rng(EVAL_START_SEED)
    return tuple(tuple(float(v) for v in sample_initial(spec, rng)) for _ in range(count))


def default_config(system: str = "lorenz") -> ExperimentConfig:
    """Shipped defaults per system; all downstream constants resolved."""
    if system == "lorenz":
        sys_cfg = SystemConfig(name="lorenz")
        planner = PlannerConfig(horizon=25, noise_beta=2.0, init_std=5.0)
        gp = GPConfig(init_lengthscale=5.0, init_signal_variance=1.0, init_noise_variance=0.09)
        n_max = 100
    elif system == "pendulum":
        sys_cfg = SystemConfig(name="pendulum")
        planner = PlannerConfig(horizon=15, noise_beta=1.0, init_std=1.0)
        gp = GPConfig(init_lengthscale=2.0, init_signal_variance=0.25, init_noise_variance=0.001)
        n_max = 200
    else:
        raise ConfigError(f"unknown system {system!r}")
    spec = build_system(sys_cfg)
    box_lo, box_hi = STATE_BOXES[system]
    acq = AcquisitionConfig(
        traj_horizon=planner.horizon,
        state_box_lo=tuple(box_lo),
        state_box_hi=tuple(box_hi),
    )
    exp = ExperimentSettings(
        n_max=n_max,
        eval_starts=_frozen_eval_starts(spec),
        output_dir=f"runs/{system}",
    )
    return ExperimentConfig(
        system=sys_cfg, mode=ModeConfig(), planner=planner, gp=gp, acquisition=acq, experiment=exp
    )


_SECTION_TYPES = {
    "system": SystemConfig,
    "mode": ModeConfig,
    "planner": PlannerConfig,
    "gp": GPConfig,
    "acquisition": AcquisitionConfig,
    "experiment": ExperimentSettings,
}

def parse_config(data: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from parsed TOML, layered over system defaults."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    unknown = set(data) - set(_SECTION_TYPES)
    if unknown:
        raise ConfigError(f"unknown section(s): {sorted(unknown)}")
    system_name = data.get("system", {}).get("name", base.system.name if base else "lorenz")
    cfg = base if base is not None else default_config(system_name)
    sections = {}
    for section, cls in _SECTION_TYPES.items():
        current = getattr(cfg, section)
        overrides = data.get(section, {})
        if not isinstance(overrides, dict):
            raise ConfigError(f"[{section}] must be a table")
        known = set(cls.__dataclass_fields__)
        unknown = set(overrides) - known
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
        coerced = {}
        for key, value in overrides.items():
            if key == "eval_starts":
                value = tuple(tuple(float(v) for v in row) for row in value)
            elif key == "seeds":
                value = tuple(int(v) for v in value)
            elif key in ("state_box_lo", "state_box_hi"):
                value = tuple(float(v) for v in value)
            coerced[key] = value
        try:
            sections[section] = replace(current, **coerced)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad [{section}] section: {exc}") from exc
    return ExperimentConfig(**sections)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(v) for v in value) + "]"
    raise ConfigError(f"cannot encode {value!r} as TOML")


def to_toml(cfg: ExperimentConfig) -> str:
    """Serialize a resolved config; re-parsing reproduces identical settings."""
    lines = []
    for section in _SECTION_TYPES:
        lines.append(f"[{section}]")
        for key, value in asdict(getattr(cfg, section)).items():
            if value is None:
                continue
            lines.append(f"{key} = {_toml_value(value)}")
        lines.append("")
    return "\n".join(lines)
