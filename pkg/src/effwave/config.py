"""Run configuration: JSON parsing, validation and defaults."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Any

import jsonschema

DEFAULT_EPSILONS = [1 / 8, 1 / 16, 1 / 32]


class ConfigError(ValueError):
    """Configuration rejected; ``path`` names the offending JSON location."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class Numerics:
    K: int = 16
    M: int = 64                 # torus grid for coefficient samples
    n_theta: int = 65
    n_bands: int = 4
    L: float = 1.0
    T: float = 0.5
    dt: float = 1e-4
    epsilons: list[float] = field(default_factory=lambda: list(DEFAULT_EPSILONS))
    points_per_cell: int = 64
    homog_points: int = 0       # 0: homogenized solve on the eps-grid
    replicas: int = 1
    seed: int = 0
    n_samples: int = 16
    chunk: int = 16
    gap_tol: float = 1e-6
    slope_tol: float = 1e-7
    fd_step: float = 1e-2
    lambda_mode: str = "discrete"


@dataclass
class RunConfig:
    scenario: str
    sigma: dict
    c: dict
    d: dict = field(default_factory=lambda: {"kind": "zero"})
    noise: dict = field(default_factory=lambda: {"kind": "none"})
    initial: dict = field(default_factory=lambda: {"named": "bump",
                                                   "params": {"center": 0.5, "half_width": 0.35}})
    test_function: dict = field(default_factory=lambda: {"named": "sine", "params": {"amplitude": 1.0}})
    band: dict = field(default_factory=lambda: {"n": 1, "theta_candidates": [0.0, 0.5]})
    numerics: Numerics = field(default_factory=Numerics)
    output_dir: str = "out"
    options: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.band.get("n", 1))

    @property
    def noise_kind(self) -> str:
        return self.noise.get("kind", "none")

    @property
    def noise_scheme(self) -> str:
        return self.noise.get("scheme", "exponential")

    @property
    def qs(self) -> list[int]:
        return [int(round(1 / e)) for e in self.numerics.epsilons]

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()


def load_schema() -> dict:
    text = resources.files("effwave").joinpath("data/config.schema.json").read_text()
    return json.loads(text)


def _check_reciprocal(values: list[float]) -> None:
    for i, e in enumerate(values):
        q = 1.0 / e
        if abs(q - round(q)) > 1e-9 * q or round(q) < 1:
            raise ConfigError(f"$.numerics.epsilons[{i}]",
                              f"epsilon {e} is not the reciprocal of an integer")


def parse_config(text: str | dict, overrides: dict | None = None) -> RunConfig:
    """Validate a JSON document (strict: unknown keys are errors) and fill defaults."""
    if isinstance(text, str):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("$", f"malformed JSON: {exc}") from exc
    else:
        raw = copy.deepcopy(text)
    if overrides:
        for key, value in overrides.items():
            raw.setdefault("numerics", {})[key] = value
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise ConfigError(err.json_path, err.message)
    numerics = Numerics(**raw.get("numerics", {}))
    _check_reciprocal(numerics.epsilons)
    if numerics.homog_points == 1:
        raise ConfigError("$.numerics.homog_points", "need 0 (match the eps-grid) or at least 2")
    if abs(numerics.T / numerics.dt - round(numerics.T / numerics.dt)) > 1e-6:
        raise ConfigError("$.numerics.dt", "T must be an integer multiple of dt")
    noise = raw.get("noise", {"kind": "none"})
    if noise.get("kind", "none") != "none" and "g" not in noise:
        raise ConfigError("$.noise.g", "noise amplitude g is required for a noisy run")
    d = raw.get("d", {"kind": "zero"})
    if d.get("kind") == "separable" and ("a" not in d or "b" not in d):
        raise ConfigError("$.d", "separable potential needs both 'a' and 'b'")
    kwargs = {k: v for k, v in raw.items() if k != "numerics"}
    cfg = RunConfig(numerics=numerics, **kwargs)
    cfg.band = {"n": 1, "theta_candidates": [0.0, 0.5], **cfg.band}
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    return cfg.to_json()
