"""Experiment configuration and its YAML file format.

Keys (all optional, defaults in :class:`ExperimentConfig`)::

    distribution: gaussian        # gaussian | student_t | contaminated | fixed_spectrum
    dof: 10                       # student_t degrees of freedom, > 4
    contamination_rate: 0.02      # contaminated: fraction of scaled points, [0, 0.5)
    contamination_scale: 100      # contaminated: multiplier of the scaled points
    spectrum: [5, 4, 3, 2, 1]     # default: d, d-1, ..., 1
    n: 2000
    d: 5                          # inferred from spectrum when omitted
    trials: 200
    epsilon: 0.05
    a: 1.0
    sigma: null                   # null = smallest admissible on a log grid
    delta: null                   # null = nominal net delta, else measured radius
    net_strategy: randomized      # exhaustive | randomized | eigen-augmented
    net_size: 500
    net_delta: null
    method: mom                   # mom | truncated
    blocks: null
    width: null
    moments: population           # population | estimated  (kappa and s4_sq)
    gram_frobenius: population    # population | plugin
    rank: null                    # projector rank r, null = largest true gap
    offnet_probes: 500
    seed: 0
    workers: 1
    output: null                  # JSON report path
    summary_csv: null             # CSV summary path
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

import yaml

from robpca.errors import ValidationError
from robpca.gram_estimator import METHODS, STRATEGIES, MethodConfig, NetConfig

DISTRIBUTIONS = ("gaussian", "student_t", "contaminated", "fixed_spectrum")


@dataclass(frozen=True)
class ExperimentConfig:
    distribution: str = "gaussian"
    dof: float = 10.0
    contamination_rate: float = 0.02
    contamination_scale: float = 100.0
    spectrum: tuple | None = None
    n: int = 2000
    d: int | None = None
    trials: int = 200
    epsilon: float = 0.05
    a: float = 1.0
    sigma: float | None = None
    delta: float | None = None
    net_strategy: str = "randomized"
    net_size: int = 500
    net_delta: float | None = None
    method: str = "mom"
    blocks: int | None = None
    width: float | None = None
    moments: str = "population"
    gram_frobenius: str = "population"
    rank: int | None = None
    offnet_probes: int = 500
    seed: int = 0
    workers: int = 1
    output: str | None = None
    summary_csv: str | None = None

    def __post_init__(self):
        if self.spectrum is None:
            d = 5 if self.d is None else self.d
            spectrum = tuple(float(d - i) for i in range(d))
        else:
            spectrum = tuple(float(v) for v in self.spectrum)
        object.__setattr__(self, "spectrum", spectrum)
        if self.d is None:
            object.__setattr__(self, "d", len(spectrum))
        self.validate()

    def validate(self) -> None:
        if self.distribution not in DISTRIBUTIONS:
            raise ValidationError(f"unknown distribution {self.distribution!r}")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        if self.n < 1 or self.d < 1:
            raise ValidationError("n and d must be >= 1")
        if len(self.spectrum) != self.d:
            raise ValidationError(
                f"spectrum has {len(self.spectrum)} values but d = {self.d}"
            )
        if any(v < 0 for v in self.spectrum):
            raise ValidationError("spectrum must be non-negative")
        if self.distribution == "student_t" and not self.dof > 4:
            raise ValidationError("student_t needs dof > 4 (finite fourth moments)")
        if not 0 <= self.contamination_rate < 0.5:
            raise ValidationError("contamination rate must lie in [0, 0.5)")
        if not 0 < self.epsilon < 0.5:
            raise ValidationError("epsilon must lie in (0, 1/2)")
        if self.net_strategy not in STRATEGIES:
            raise ValidationError(f"unknown net strategy {self.net_strategy!r}")
        if self.method not in METHODS:
            raise ValidationError(f"unknown method {self.method!r}")
        if self.moments not in ("population", "estimated"):
            raise ValidationError("moments must be 'population' or 'estimated'")
        if self.gram_frobenius not in ("population", "plugin"):
            raise ValidationError("gram_frobenius must be 'population' or 'plugin'")
        if self.rank is not None and not 1 <= self.rank < self.d:
            raise ValidationError("rank must lie in [1, d)")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")

    @property
    def net_config(self) -> NetConfig:
        return NetConfig(self.net_strategy, self.net_size, self.net_delta, 0)

    @property
    def method_config(self) -> MethodConfig:
        return MethodConfig(self.method, self.blocks, self.width, 0)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["spectrum"] = list(self.spectrum)
        return out


_FIELDS = {f.name for f in dataclasses.fields(ExperimentConfig)}


def config_from_mapping(data: dict | None, **overrides) -> ExperimentConfig:
    """Build a config from a mapping; ``None``-valued overrides are ignored."""
    data = dict(data or {})
    unknown = set(data) - _FIELDS
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**data)
    except TypeError as exc:
        raise ValidationError(str(exc)) from exc


def load_config(path: str | Path | None, **overrides) -> ExperimentConfig:
    """Read a YAML (or JSON) config file and apply overrides."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a mapping")
    return config_from_mapping(data, **overrides)
