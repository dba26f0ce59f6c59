"""Run configuration: ``key = value`` files and command-line overrides."""
from dataclasses import dataclass, fields, replace
from typing import Optional

from .spaces import PAIR_NAMES


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # defaults reproduce the random-balance experiment on the unit square
    pair: str = "P1DG-P2"
    n: int = 8
    perturb: float = 0.2
    mesh_seed: int = 0
    mesh_file: Optional[str] = None
    Ro: float = 0.1
    Fr: float = 1.0
    f: Optional[float] = None
    g: Optional[float] = None
    Dbar: Optional[float] = None
    dt: float = 0.01
    nsteps: int = 1000
    seed: int = 0
    init: str = "balanced"
    output_dir: str = "out"
    solver: str = "direct"
    tol: float = 1e-12
    snapshot_interval: int = 0

    def params(self):
        from .model import ModelParams, params_from_ro_fr

        base = params_from_ro_fr(self.Ro, self.Fr, self.dt, self.nsteps)
        return ModelParams(
            f=base.f if self.f is None else self.f,
            g=base.g if self.g is None else self.g,
            Dbar=base.Dbar if self.Dbar is None else self.Dbar,
            dt=self.dt,
            nsteps=self.nsteps,
        )

    def mesh(self):
        from .mesh import generate_square_mesh, load_mesh

        if self.mesh_file:
            with open(self.mesh_file) as fh:
                return load_mesh(fh.read())
        return generate_square_mesh(self.n, self.perturb, self.mesh_seed)


_TYPES = {f.name: f.type for f in fields(RunConfig)}
_KEYS = {k.lower(): k for k in _TYPES}
_CHOICES = {"pair": PAIR_NAMES, "solver": ("direct", "iterative"), "init": ("balanced", "random", "standing-wave")}


def canonical_key(key):
    k = key.strip().replace("-", "_").lower()
    if k not in _KEYS:
        raise ConfigError(f"unknown key {key!r}")
    return _KEYS[k]


def _convert(key, raw):
    typ = _TYPES[key]
    raw = raw.strip()
    try:
        if typ is int:
            return int(raw)
        if typ is float or typ == Optional[float]:
            return float(raw)
        if typ == Optional[str]:
            return raw or None
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse value {raw!r} for {key}") from None


def validate(cfg):
    checks = [
        ("n", cfg.n >= 1, "must be >= 1"),
        ("perturb", 0.0 <= cfg.perturb <= 0.3, "must lie in [0, 0.3]"),
        ("Ro", cfg.Ro > 0, "must be positive"),
        ("Fr", cfg.Fr > 0, "must be positive"),
        ("f", cfg.f is None or cfg.f >= 0, "must be >= 0"),
        ("g", cfg.g is None or cfg.g > 0, "must be positive"),
        ("Dbar", cfg.Dbar is None or cfg.Dbar > 0, "must be positive"),
        ("dt", cfg.dt > 0, "must be positive"),
        ("nsteps", cfg.nsteps >= 1, "must be >= 1"),
        ("tol", cfg.tol > 0, "must be positive"),
        ("snapshot_interval", cfg.snapshot_interval >= 0, "must be >= 0"),
    ]
    for key, ok, msg in checks:
        if not ok:
            raise ConfigError(f"{key} {msg} (got {getattr(cfg, key)!r})")
    for key, allowed in _CHOICES.items():
        if getattr(cfg, key) not in allowed:
            raise ConfigError(f"{key} must be one of {', '.join(allowed)} (got {getattr(cfg, key)!r})")
    return cfg


def apply_overrides(cfg, overrides):
    """Apply a mapping of raw string values (keys in any accepted spelling)."""
    values = {}
    for k, v in overrides.items():
        key = canonical_key(k)
        values[key] = _convert(key, v)
    return validate(replace(cfg, **values))


def parse_config(text):
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        k, v = line.split("=", 1)
        try:
            key = canonical_key(k)
            values[key] = _convert(key, v)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    try:
        return validate(RunConfig(**values))
    except ConfigError as exc:
        lines = {canonical_key(ln.split("=", 1)[0]): i for i, ln in enumerate(text.splitlines(), 1)
                 if "=" in ln.split("#", 1)[0]}
        key = str(exc).split()[0]
        if key in lines:
            raise ConfigError(f"line {lines[key]}: {exc}") from None
        raise
