"""Strict INI-style configuration loading.

One section per module; every key maps to a known field.  Unknown keys,
duplicate keys and malformed lines are errors carrying line numbers.
An empty file yields all defaults.
"""

from dataclasses import dataclass, field, fields as dc_fields

from .params import CoTunnelingProfile, ModelParams, validate_params


class ParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class UnknownKey(ParseError):
    def __init__(self, key, line, section):
        super().__init__(f"unknown key {key!r} in section [{section}]", line)
        self.key = key


@dataclass
class SweepSettings:
    b_min: float = 0.0
    b_max: float = 6.0
    n_b: int = 241
    b_fixed: float = 2.75
    v_bias: float | None = None          # None -> plateau center
    v_min: float = 12.0
    v_max: float = 88.0
    n_v: int = 21
    e_min: float | None = None           # None -> auto window around the lines
    e_max: float | None = None
    n_e: int = 321
    linewidth: float = 2.0
    subtract_diamagnetic: bool = False


@dataclass
class DynamicsSettings:
    gh_nodes: int = 5
    rabi: float = 0.19
    delta_v: float = 50.0                # lock-in modulation depth, mV


@dataclass
class LaserSettings:
    b_field: float | None = None         # None -> sweep.b_fixed
    init_rabi: float = 2.5
    meas_rabi: float = 0.4
    init_margin: float = 16.0            # auto init grid: lambda lines +- margin
    meas_margin: float = 10.0
    n_init: int = 31
    n_meas: int = 49


@dataclass
class FitSettings:
    free: tuple = ("h_so", "delta_eh0", "g_e_bottom", "g_h")
    linewidth: float = 5.0
    min_prominence: float = 0.01
    max_iter: int = 40


@dataclass
class RunConfig:
    params: ModelParams = field(default_factory=ModelParams)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    dynamics: DynamicsSettings = field(default_factory=DynamicsSettings)
    lasers: LaserSettings = field(default_factory=LaserSettings)
    fit: FitSettings = field(default_factory=FitSettings)


def _parse_scalar(text, target, key, line):
    if target is bool:
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ParseError(f"{key}: expected a boolean, got {text!r}", line)
    if target is tuple:
        return tuple(text.split())
    if target is str:
        return text
    if text.lower() == "none":
        return None
    try:
        return target(text)
    except ValueError:
        raise ParseError(f"{key}: expected {target.__name__}, got {text!r}", line)


def _field_kind(annotation):
    if annotation in (float, int, bool, tuple, str):
        return annotation
    s = annotation if isinstance(annotation, str) else str(annotation)
    for kind in (("float | None", float), ("float", float), ("int", int),
                 ("bool", bool), ("tuple", tuple)):
        if s == kind[0]:
            return kind[1]
    return str


def _known_fields(obj):
    return {f.name: _field_kind(f.type) for f in dc_fields(obj)}


def parse_config(text) -> RunConfig:
    """Parse configuration text into a RunConfig (strict)."""
    sections = {"model": {}, "dynamics": {}, "sweep": {}, "lasers": {}, "fit": {}}
    seen_lines = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split(";", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip().lower()
            if name not in sections:
                raise ParseError(f"unknown section [{name}]", lineno)
            current = name
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {line!r}", lineno)
        if current is None:
            raise ParseError("key outside any [section]", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParseError("empty key", lineno)
        full = (current, key)
        if full in seen_lines:
            raise ParseError(
                f"duplicate key {key!r} in [{current}] "
                f"(first at line {seen_lines[full]})", lineno)
        seen_lines[full] = lineno
        sections[current][key] = (value, lineno)

    cfg = RunConfig()

    model_fields = {f.name: float for f in dc_fields(ModelParams)
                    if f.name != "cotun"}
    cotun_fields = {f.name: float for f in dc_fields(CoTunnelingProfile)}
    updates = {}
    for key, (value, line) in sections["model"].items():
        if key in model_fields or key in cotun_fields:
            updates[key] = _parse_scalar(value, float, key, line)
        else:
            raise UnknownKey(key, line, "model")
    if updates:
        cfg.params = cfg.params.with_(**updates)
    validate_params(cfg.params)

    for section, obj in (("sweep", cfg.sweep), ("dynamics", cfg.dynamics),
                         ("lasers", cfg.lasers), ("fit", cfg.fit)):
        known = _known_fields(obj)
        for key, (value, line) in sections[section].items():
            if key not in known:
                raise UnknownKey(key, line, section)
            setattr(obj, key, _parse_scalar(value, known[key], key, line))
    return cfg


def load_config(path) -> RunConfig:
    """Load and validate a configuration file; missing keys get defaults."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
