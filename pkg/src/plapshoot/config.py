"""Run configuration: a YAML file with four blocks and strict keys.

    params:      p, N, m, l, alpha, R, K0, K1, alpha1
    tolerances:  tol, tol_ref, tol_a, tol_match, tol_E, slope_min,
                 terminal_window, delta, v_band
    scan:        a_lo, a_hi, a_max, growth, n_max, sweep_a1, sweep_doublings
    output:      dir, formats, catalog, r_max

Only ``params`` is required; every other field has a default. ``a_hi``
bounds the slope scan and defaults to ``a_max``, the hard cap on a. Numbers
written as ``1e-10`` (which YAML 1.1 reads as strings) are accepted.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .model import ProblemParams, ValidationReport, validate_params

__all__ = [
    "ConfigError",
    "ConfigRejected",
    "Tolerances",
    "ScanSettings",
    "OutputSettings",
    "RunConfig",
    "load_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Malformed config: parse error, unknown key or bad value."""


class ConfigRejected(ValueError):
    """Well-formed config whose parameters fail the hypotheses."""

    def __init__(self, report: ValidationReport):
        super().__init__("parameters rejected: " + "; ".join(report.violations))
        self.report = report


@dataclass(frozen=True)
class Tolerances:
    tol: float = 1e-10
    tol_ref: float = 1e-12
    tol_a: float = 1e-10
    tol_match: float = 1e-6
    tol_E: float = 1e-7
    slope_min: float | None = None
    terminal_window: float | None = None
    delta: float | None = None
    v_band: float | None = None


@dataclass(frozen=True)
class ScanSettings:
    a_lo: float = 0.5
    a_hi: float | None = None
    a_max: float = 1e6
    growth: float = 1.25
    n_max: int = 3
    sweep_a1: float = 8.0
    sweep_doublings: int = 10


@dataclass(frozen=True)
class OutputSettings:
    dir: str = "out"
    formats: tuple = ("csv", "json")
    catalog: str | None = None
    r_max: float | None = None


@dataclass(frozen=True)
class RunConfig:
    params: ProblemParams
    tolerances: Tolerances = field(default_factory=Tolerances)
    scan: ScanSettings = field(default_factory=ScanSettings)
    output: OutputSettings = field(default_factory=OutputSettings)
    source: str = ""

    def as_dict(self) -> dict:
        return dict(params=self.params.as_dict(),
                    tolerances=dataclasses.asdict(self.tolerances),
                    scan=dataclasses.asdict(self.scan),
                    output={**dataclasses.asdict(self.output),
                            "formats": list(self.output.formats)})


_BLOCKS = {
    "params": ProblemParams,
    "tolerances": Tolerances,
    "scan": ScanSettings,
    "output": OutputSettings,
}
_POSITIVE = {"tol", "tol_ref", "tol_a", "tol_match", "tol_E", "slope_min", "terminal_window",
             "delta", "v_band", "a_lo", "a_hi", "a_max", "sweep_a1", "r_max"}
_INTS = {"n_max", "sweep_doublings"}
_FORMATS = {"csv", "json"}


def _where(src, node):
    m = node.start_mark
    return f"{src}:{m.line + 1}:{m.column + 1}"


def _mapping_items(node):
    return [(k.value, k, v) for k, v in node.value]


def _number(raw, name, where):
    if isinstance(raw, bool):
        raise ConfigError(f"{where}: {name} must be a number, got {raw!r}")
    if isinstance(raw, (int, float)):
        return raw
    if isinstance(raw, str):
        try:
            return float(raw)
        except ValueError:
            pass
    raise ConfigError(f"{where}: {name} must be a number, got {raw!r}")


def _coerce(name, raw, ftype, where):
    if raw is None:
        if "None" in str(ftype):
            return None
        raise ConfigError(f"{where}: {name} may not be null")
    if name == "formats":
        vals = [raw] if isinstance(raw, str) else raw
        if not isinstance(vals, list) or not set(vals) <= _FORMATS:
            raise ConfigError(f"{where}: formats must be a subset of {sorted(_FORMATS)}")
        return tuple(sorted(set(vals)))
    if name in ("dir", "catalog"):
        if not isinstance(raw, str):
            raise ConfigError(f"{where}: {name} must be a string path")
        return raw
    val = _number(raw, name, where)
    if name in _INTS:
        if float(val) != int(val) or int(val) < 0:
            raise ConfigError(f"{where}: {name} must be a non-negative integer")
        return int(val)
    val = float(val)
    if not math.isfinite(val):
        raise ConfigError(f"{where}: {name} must be finite")
    if name in _POSITIVE and not val > 0:
        raise ConfigError(f"{where}: {name} must be > 0, got {val!r}")
    if name == "growth" and not val > 1:
        raise ConfigError(f"{where}: growth must be > 1, got {val!r}")
    return val


def parse_config(text: str, source: str = "<config>", validate: bool = True) -> RunConfig:
    """Parse and fully default a config; raise ConfigError or ConfigRejected."""
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            data = loader.construct_document(node) if node is not None else None
        finally:
            loader.dispose()
    except yaml.MarkedYAMLError as exc:
        m = exc.problem_mark
        raise ConfigError(f"{source}:{m.line + 1}:{m.column + 1}: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping with a 'params' block")
    blocks = {}
    for key, knode, vnode in _mapping_items(node):
        if key not in _BLOCKS:
            raise ConfigError(f"{_where(source, knode)}: unknown block {key!r} "
                              f"(allowed: {', '.join(_BLOCKS)})")
        if not isinstance(data[key], dict):
            raise ConfigError(f"{_where(source, vnode)}: block {key!r} must be a mapping")
        cls = _BLOCKS[key]
        ftypes = {f.name: f.type for f in dataclasses.fields(cls)}
        vals = {}
        for name, fk, fv in _mapping_items(vnode):
            if name not in ftypes:
                raise ConfigError(f"{_where(source, fk)}: unknown key {name!r} in {key} "
                                  f"(allowed: {', '.join(ftypes)})")
            vals[name] = _coerce(name, data[key][name], ftypes[name], _where(source, fv))
        blocks[key] = (vals, vnode)
    if "params" not in blocks:
        raise ConfigError(f"{source}: missing required block 'params'")
    pvals, pnode = blocks["params"]
    missing = [n for n in ("p", "N", "m", "l", "alpha") if n not in pvals]
    if missing:
        raise ConfigError(f"{_where(source, pnode)}: params missing {', '.join(missing)}")
    params = ProblemParams(**pvals)
    if validate:
        report = validate_params(params)
        if not report:
            raise ConfigRejected(report)
    return RunConfig(
        params=params,
        tolerances=Tolerances(**blocks.get("tolerances", ({}, None))[0]),
        scan=ScanSettings(**blocks.get("scan", ({}, None))[0]),
        output=OutputSettings(**blocks.get("output", ({}, None))[0]),
        source=source,
    )


def load_config(path, validate: bool = True) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    return parse_config(text, str(path), validate)
