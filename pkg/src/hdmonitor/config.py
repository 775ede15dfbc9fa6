"""Experiment configuration files.

Flat INI-style sections of ``key = value`` lines. Values are JSON scalars or
lists (``0.5``, ``[1, 3, 5]``, ``"pool.bin"``); a bare word is read as a
string. Every problem found is reported, each tagged ``section.key``.
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field, fields

__all__ = ["ConfigError", "MonitorConfig", "parse_config", "format_config"]

FAMILIES = ("cusum", "adaptive", "nonparametric")
KINDS = ("quantile", "zou", "soft", "max", "sum")
SCENARIOS = ("mean_shift", "random_sign_shift", "mixed_location_scale")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class StatisticBlock:
    family: str = "cusum"
    mu: float = 0.5
    rho: float = 0.25
    s0: float = 1.0
    t0: float = 4.0
    d: int = 20
    n: int = 40


@dataclass
class GlobalBlock:
    kind: list = field(default_factory=lambda: ["quantile"])
    b: list = field(default_factory=list)
    h: list = field(default_factory=list)


@dataclass
class PoolBlock:
    path: str = ""
    size: int = 20_000
    burn_in: int = 2000
    seed: int = 1


@dataclass
class ExperimentBlock:
    m: int = 100
    m1: list = field(default_factory=lambda: [0])
    scenario: str = "mean_shift"
    delta: float = 0.5
    gamma: float = 1.5
    change_point: int = 0
    ic: str = "normal"
    target_arl0: float = 200.0
    replications: int = 500
    t_max: int = 0  # 0: twenty times the ARL0 target
    num_traces: int = 1000
    rel_tol: float = 0.02
    seed: int = 7


@dataclass
class IoBlock:
    output: str = ""
    format: str = "csv"


@dataclass
class MonitorConfig:
    statistic: StatisticBlock = field(default_factory=StatisticBlock)
    global_: GlobalBlock = field(default_factory=GlobalBlock)
    pool: PoolBlock = field(default_factory=PoolBlock)
    experiment: ExperimentBlock = field(default_factory=ExperimentBlock)
    io: IoBlock = field(default_factory=IoBlock)

    @property
    def horizon(self) -> int:
        return self.experiment.t_max or int(round(20 * self.experiment.target_arl0))


_SECTIONS = {
    "statistic": ("statistic", StatisticBlock),
    "global": ("global_", GlobalBlock),
    "pool": ("pool", PoolBlock),
    "experiment": ("experiment", ExperimentBlock),
    "io": ("io", IoBlock),
}
# keys that accept a scalar or a list, with the element type
_LISTS = {("global", "kind"): str, ("global", "b"): float, ("global", "h"): float, ("experiment", "m1"): int}


def _decode(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw.strip()


def _coerce(value, typ):
    if typ is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if typ is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if typ is int and isinstance(value, float) and value.is_integer():
        return int(value)
    if typ is str and isinstance(value, str):
        return value
    raise TypeError(f"expected {typ.__name__}, got {value!r}")


def parse_config(text: str) -> MonitorConfig:
    parser = configparser.ConfigParser(strict=True, interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError([f"{exc.section}.{exc.option}: duplicate key (line {exc.lineno})"]) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError([f"[{exc.section}]: duplicate section (line {exc.lineno})"]) from None
    except configparser.Error as exc:
        raise ConfigError([f"syntax: {exc.message}"]) from None

    cfg = MonitorConfig()
    errors: list[str] = []
    for section in parser.sections():
        if section not in _SECTIONS:
            errors.append(f"[{section}]: unknown section")
            continue
        attr, block_cls = _SECTIONS[section]
        block = getattr(cfg, attr)
        known = {f.name: f for f in fields(block_cls)}
        for key, raw in parser.items(section):
            where = f"{section}.{key}"
            if key not in known:
                errors.append(f"{where}: unknown key")
                continue
            value = _decode(raw)
            try:
                if (section, key) in _LISTS:
                    elem = _LISTS[(section, key)]
                    items = value if isinstance(value, list) else [value]
                    value = [_coerce(v, elem) for v in items]
                else:
                    value = _coerce(value, {"float": float, "int": int, "str": str}[known[key].type])
            except TypeError as exc:
                errors.append(f"{where}: {exc}")
                continue
            setattr(block, key, value)
    errors.extend(_validate(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _validate(cfg: MonitorConfig) -> list[str]:
    errs = []
    st, gl, po, ex, io = cfg.statistic, cfg.global_, cfg.pool, cfg.experiment, cfg.io
    if st.family not in FAMILIES:
        errs.append(f"statistic.family: must be one of {', '.join(FAMILIES)}, got {st.family!r}")
    if st.mu == 0:
        errs.append("statistic.mu: must be nonzero")
    if st.rho <= 0:
        errs.append("statistic.rho: must be positive")
    if st.s0 < 0 or st.t0 < 0:
        errs.append("statistic.s0/statistic.t0: must be nonnegative")
    if st.d < 2:
        errs.append("statistic.d: must be at least 2")
    if st.n < 2 * st.d - 1:
        errs.append(f"statistic.n: {st.n} is below 2 * statistic.d - 1 = {2 * st.d - 1}")
    for k in gl.kind:
        if k not in KINDS:
            errs.append(f"global.kind: unknown statistic {k!r} (choose from {', '.join(KINDS)})")
    if "soft" in gl.kind and not gl.b:
        errs.append("global.b: required when global.kind includes soft")
    if any(not math.isfinite(b) for b in gl.b):
        errs.append("global.b: values must be finite")
    if gl.h and len(gl.h) != len(scheme_labels(cfg)):
        errs.append(f"global.h: {len(gl.h)} limits given for {len(scheme_labels(cfg))} schemes")
    if po.size < 1:
        errs.append("pool.size: must be positive")
    if po.burn_in < 1:
        errs.append("pool.burn_in: must be at least 1")
    if ex.m < 1:
        errs.append("experiment.m: must be positive")
    for v in ex.m1:
        if v < 0 or v > ex.m:
            errs.append(f"experiment.m1: value {v} outside [0, experiment.m = {ex.m}]")
    if ex.scenario not in SCENARIOS:
        errs.append(f"experiment.scenario: must be one of {', '.join(SCENARIOS)}")
    if ex.ic not in ("normal", "mixed"):
        errs.append("experiment.ic: must be normal or mixed")
    if ex.gamma <= 0:
        errs.append("experiment.gamma: must be positive")
    if ex.change_point < 0:
        errs.append("experiment.change_point: must be nonnegative")
    if ex.target_arl0 <= 1:
        errs.append("experiment.target_arl0: must exceed 1")
    if ex.replications < 1:
        errs.append("experiment.replications: must be positive")
    if ex.t_max < 0:
        errs.append("experiment.t_max: must be nonnegative")
    if ex.num_traces < 100:
        errs.append("experiment.num_traces: at least 100 traces are needed")
    if not 0 < ex.rel_tol < 1:
        errs.append("experiment.rel_tol: must lie in (0, 1)")
    if io.format not in ("csv", "markdown"):
        errs.append("io.format: must be csv or markdown")
    return errs


def scheme_labels(cfg: MonitorConfig) -> list[tuple[str, float | None]]:
    """(kind, b) per scheme; every soft entry expands to one scheme per b."""
    out = []
    for k in cfg.global_.kind:
        if k == "soft":
            out.extend(("soft", b) for b in cfg.global_.b)
        else:
            out.append((k, None))
    return out


def _encode(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return json.dumps(value)


def format_config(cfg: MonitorConfig) -> str:
    """Canonical text form; ``parse_config(format_config(c)) == c``."""
    lines = []
    for section, (attr, _) in _SECTIONS.items():
        block = getattr(cfg, attr)
        lines.append(f"[{section}]")
        for f in fields(block):
            lines.append(f"{f.name} = {_encode(getattr(block, f.name))}")
        lines.append("")
    return "\n".join(lines)
