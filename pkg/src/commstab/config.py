"""Flat ``key = value`` run configuration with ``#`` comments."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .dynamics import PerturbationState
from .equilibrium import EquilibriumSpec
from .model import InvalidParamsError, ModelParams
from .stability import IntegratorConfig


class ConfigError(ValueError):
    pass


REQUIRED = ("f0", "a", "g0", "c", "big_l", "n_comm")
INT_KEYS = ("n_comm", "sample_stride")
OPTIONAL = ("l_d", "probe_delta")


@dataclass(frozen=True)
class RunConfig:
    f0: float
    a: float
    g0: float
    c: float
    big_l: float
    n_comm: int
    ep: float = 1.0
    eq: float = 1.0
    l_d: float | None = None
    delta_dl0: float = 0.0
    delta_dr0: float = 0.0
    delta_sl0: float = 0.0
    delta_sr0: float = 0.0
    dt: float = 1e-3
    t_max: float = 50.0
    eps_converged: float = 1e-10
    sample_stride: int = 10
    probe_delta: float | None = None

    def params(self) -> ModelParams:
        return ModelParams(self.f0, self.a, self.g0, self.c, self.ep, self.eq, self.big_l, self.n_comm)

    def spec(self) -> EquilibriumSpec:
        return EquilibriumSpec.build(self.params(), self.l_d)

    def initial(self) -> PerturbationState:
        return PerturbationState(0.0, self.delta_dl0, self.delta_dr0, self.delta_sl0, self.delta_sr0)

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(self.dt, self.t_max, self.eps_converged, self.sample_stride)

    def to_text(self) -> str:
        """Canonical form: every set key in declaration order, floats in shortest round-trip form."""
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            lines.append(f"{f.name} = {value!r}" if f.name not in INT_KEYS else f"{f.name} = {int(value)}")
        return "\n".join(lines) + "\n"

    def replace(self, **changes) -> "RunConfig":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return RunConfig(**values)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    values, seen = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if "=" not in line:
            raise ConfigError(f"{where}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{where}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = lineno
        try:
            values[key] = int(value) if key in INT_KEYS else float(value)
        except ValueError:
            kind = "an integer" if key in INT_KEYS else "a number"
            raise ConfigError(f"{where}: field {key!r}: cannot parse {value!r} as {kind}") from None
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ConfigError(f"{source}: missing required field(s): {', '.join(missing)}")
    cfg = RunConfig(**values)
    validate(cfg, source, seen)
    return cfg


def validate(cfg: RunConfig, source: str = "<config>", lines: dict | None = None):
    lines = lines or {}

    def at(key):
        return f"{source}:{lines[key]}" if key in lines else source

    try:
        cfg.params()
    except InvalidParamsError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    try:
        cfg.spec()
    except ValueError as exc:
        raise ConfigError(f"{at('l_d')}: field 'l_d': {exc}") from None
    if cfg.dt <= 0.0:
        raise ConfigError(f"{at('dt')}: field 'dt' must be positive")
    if cfg.t_max <= 0.0:
        raise ConfigError(f"{at('t_max')}: field 't_max' must be positive")
    if cfg.eps_converged < 0.0:
        raise ConfigError(f"{at('eps_converged')}: field 'eps_converged' must be non-negative")
    if cfg.sample_stride < 1:
        raise ConfigError(f"{at('sample_stride')}: field 'sample_stride' must be >= 1")
    if cfg.probe_delta is not None and cfg.probe_delta <= 0.0:
        raise ConfigError(f"{at('probe_delta')}: field 'probe_delta' must be positive")


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))
