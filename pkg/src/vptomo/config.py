"""Experiment configuration: a flat key = value registry.

Every run of the pipeline is described by a small set of scalar knobs.
The canonical text form (sorted keys, ``key = value`` lines) is what gets
hashed into output files, so two runs with the same settings are
recognizably the same experiment.
"""

import dataclasses
import hashlib
from dataclasses import dataclass

from .errors import ConfigError
from . import profiles
from .profiles import DopingProfile

__all__ = [
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "canonical_text",
    "config_hash",
    "apply_overrides",
]


def _floats(text):
    try:
        return tuple(float(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated floats, got {text!r}") from None


@dataclass
class ExperimentConfig:
    radius: float = 1.0
    profile: str = "gaussian"          # constant | gaussian | radial
    n0: float = 1.0                    # constant profile level
    amplitude: float = 1.0             # gaussian peak
    center_x: float = 0.2
    center_y: float = 0.0
    sigma: float = 0.15
    coeffs: tuple = (1.0, -1.0)        # radial polynomial in r^2
    nx: int = 128                      # forward field grid
    n_recon: int = 128                 # reconstruction grid
    c0: float = 1.0                    # beam width scale: eps = c0 / speed
    c0p: float = 2.5                   # beam gradient scale
    speeds: tuple = (25.0, 50.0, 100.0, 200.0)
    n_a: int = 90                      # scan angles
    n_s: int = 65                      # offsets per angle
    offset_cap: float = 0.95           # offsets fill [-cap*R, cap*R]
    metric_cut: float = 0.85           # error metrics restricted to r <= cut*R
    fp_tol: float = 1e-10
    fp_max_iter: int = 20
    n_v: int = 8                       # velocity nodes per axis
    n_quad: int = 513                  # chord quadrature points (oracle mode)
    mode: str = "simulate"             # simulate | oracle
    out_dir: str = "out"
    seed: int = 0
    workers: int = 0                   # reserved; 0 means single process

    def __post_init__(self):
        self.coeffs = tuple(float(c) for c in self.coeffs)
        self.speeds = tuple(float(s) for s in self.speeds)
        _validate(self)

    def to_profile(self) -> DopingProfile:
        if self.profile == "constant":
            return profiles.constant(self.n0, radius=self.radius)
        if self.profile == "gaussian":
            return profiles.gaussian(
                amplitude=self.amplitude,
                center=(self.center_x, self.center_y),
                sigma=self.sigma,
                radius=self.radius,
            )
        if self.profile == "radial":
            return profiles.radial_polynomial(self.coeffs, radius=self.radius)
        raise ConfigError(f"unknown profile kind {self.profile!r}")

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}

# keys whose value is a comma-separated float list
_TUPLE_KEYS = {"coeffs", "speeds"}
_STR_KEYS = {"profile", "mode", "out_dir"}
_INT_KEYS = {
    "nx", "n_recon", "n_a", "n_s", "fp_max_iter", "n_v", "n_quad",
    "seed", "workers",
}


def _coerce(key, raw):
    """Parse a raw string (or pass through a typed value) for one key."""
    if key not in _FIELDS:
        raise ConfigError(f"unknown config key {key!r}")
    if key in _TUPLE_KEYS:
        if isinstance(raw, (tuple, list)):
            return tuple(float(v) for v in raw)
        return _floats(raw)
    if key in _STR_KEYS:
        return str(raw).strip()
    if key in _INT_KEYS:
        try:
            return int(str(raw).strip())
        except ValueError:
            raise ConfigError(f"key {key!r} expects an integer, got {raw!r}") from None
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"key {key!r} expects a float, got {raw!r}") from None


def _validate(cfg):
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.radius > 0, "radius must be positive")
    need(cfg.profile in ("constant", "gaussian", "radial"),
         f"unknown profile kind {cfg.profile!r}")
    need(cfg.sigma > 0, "sigma must be positive")
    need(cfg.nx >= 8 and cfg.n_recon >= 8, "grids need at least 8 cells per side")
    need(cfg.c0 > 0 and cfg.c0p > 0, "beam scales c0, c0p must be positive")
    need(len(cfg.speeds) >= 1 and all(s > 0 for s in cfg.speeds),
         "speeds must be positive")
    need(list(cfg.speeds) == sorted(cfg.speeds), "speeds must be increasing")
    need(cfg.n_a >= 1 and cfg.n_s >= 1, "n_a and n_s must be positive")
    need(0 < cfg.offset_cap < 1, "offset_cap must lie in (0, 1)")
    need(0 < cfg.metric_cut <= 1, "metric_cut must lie in (0, 1]")
    need(cfg.fp_tol > 0, "fp_tol must be positive")
    need(cfg.fp_max_iter >= 1, "fp_max_iter must be at least 1")
    need(cfg.n_v >= 1, "n_v must be at least 1")
    need(cfg.n_quad >= 9, "n_quad too small for chord quadrature")
    need(cfg.mode in ("simulate", "oracle"), f"unknown mode {cfg.mode!r}")
    need(cfg.seed >= 0 and cfg.workers >= 0, "seed and workers must be >= 0")


def _value_text(key, value):
    if key in _TUPLE_KEYS:
        return ",".join(repr(float(v)) for v in value)
    if key in _STR_KEYS:
        return str(value)
    if key in _INT_KEYS:
        return str(int(value))
    return repr(float(value))


def canonical_text(cfg: ExperimentConfig) -> str:
    """Sorted ``key = value`` lines; parsing this text reproduces cfg exactly."""
    lines = []
    for key in sorted(_FIELDS):
        lines.append(f"{key} = {_value_text(key, getattr(cfg, key))}")
    return "\n".join(lines) + "\n"


def config_hash(cfg: ExperimentConfig) -> str:
    """Short stable id of the configuration (sha256 of the canonical text)."""
    digest = hashlib.sha256(canonical_text(cfg).encode("utf-8")).hexdigest()
    return digest[:16]


def parse_config(text: str) -> ExperimentConfig:
    """Parse ``key = value`` lines.  Blank lines and # comments are skipped."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        values[key] = _coerce(key, raw.strip())
    return ExperimentConfig(**values)


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(cfg: ExperimentConfig, pairs) -> ExperimentConfig:
    """Apply command-line ``key=value`` overrides on top of cfg."""
    updates = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"override {pair!r} is not of the form key=value")
        key, raw = pair.split("=", 1)
        key = key.strip()
        updates[key] = _coerce(key, raw.strip())
    return cfg.replace(**updates) if updates else cfg
