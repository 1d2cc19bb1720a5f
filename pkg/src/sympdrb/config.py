"""Experiment configuration: sectioned INI files parsed into dataclasses.

Errors carry the file, line and field so the CLI can point at the offending entry.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .integrators import BASIS_METHODS, TABLEAUS

MODEL_NAMES = ("swe", "oscillator")


@dataclass(frozen=True)
class ModelSection:
    name: str = "swe"
    grid_points: int = 256
    L: float = 10.0
    m: int = 8
    frequencies: tuple = ()
    momentum_weights: tuple = ()


@dataclass(frozen=True)
class GridSection:
    ranges: tuple = ((0.1, 0.15), (0.2, 1.5))
    samples: tuple = (2, 8)


@dataclass(frozen=True)
class ReductionSection:
    sizes: tuple = (8,)
    methods: tuple = ("tangent",)
    tableau: str = "explicit_midpoint"
    gauge: str = "zero"
    q_bch: int | None = None
    run_global: bool = True
    global_train_samples: tuple = (2, 2)
    global_stride: int = 10


@dataclass(frozen=True)
class TimeSection:
    dt: float = 2e-3
    T: float = 2.0
    save_stride: int = 10


@dataclass(frozen=True)
class ToleranceSection:
    rank_tol: float = 1e-10
    manifold_gate: float = 1e-7
    midpoint_tol: float = 1e-12
    midpoint_maxiter: int = 50


@dataclass(frozen=True)
class ScalingSection:
    m_values: tuple = (512, 1024, 2048, 4096)
    methods: tuple = ("rkmk-cay", "tangent")
    tableau: str = "rk4"
    k: int = 8
    samples: tuple = (4, 8)
    steps: int = 60
    warmup: int = 5


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSection = ModelSection()
    grid: GridSection = GridSection()
    reduction: ReductionSection = ReductionSection()
    time: TimeSection = TimeSection()
    tolerances: ToleranceSection = ToleranceSection()
    scaling: ScalingSection = ScalingSection()
    output_dir: str = "out"
    seed: int = 0
    source: str = "<defaults>"

    @property
    def full_dim(self) -> int:
        if self.model.name == "swe":
            return 2 * self.model.grid_points
        return 2 * self.model.m

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


# --------------------------------------------------------------------- parsing

SECTIONS = {
    "model": ModelSection,
    "parameters": GridSection,
    "reduction": ReductionSection,
    "time": TimeSection,
    "tolerances": ToleranceSection,
    "scaling": ScalingSection,
    "output": None,
}

# ini key -> dataclass field where they differ
KEY_ALIASES = {("reduction", "global"): "run_global"}


class _Locator:
    def __init__(self, path: str, text: str):
        self.path = path
        self.lines = text.splitlines()

    def line_of(self, section: str, key: str | None = None) -> int | None:
        current = None
        for i, raw in enumerate(self.lines, start=1):
            line = raw.strip()
            m = re.match(r"^\[(.+)\]$", line)
            if m:
                current = m.group(1).strip().lower()
                if key is None and current == section:
                    return i
                continue
            if current == section and key is not None:
                if re.match(rf"^{re.escape(key)}\s*[=:]", line, re.IGNORECASE):
                    return i
        return None

    def error(self, section: str, key: str | None, msg: str) -> ConfigError:
        line = self.line_of(section, key)
        where = f"{self.path}:{line}" if line else self.path
        fld = f"[{section}]" + (f" {key}" if key else "")
        return ConfigError(f"{where}: {fld}: {msg}")


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _convert(raw: str, default, fname: str):
    """Convert by the type of the dataclass default."""
    if fname == "ranges":
        out = []
        for item in _split(raw):
            lo, _, hi = item.partition(":")
            out.append((float(lo), float(hi)))
        return tuple(out)
    if fname == "q_bch":
        return None if raw.strip().lower() in ("", "auto", "none") else int(raw)
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "yes", "true", "on"):
            return True
        if low in ("0", "no", "false", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        items = _split(raw)
        if fname in ("methods",):
            return tuple(items)
        if fname in ("frequencies", "momentum_weights"):
            return tuple(float(x) for x in items)
        return tuple(int(x) for x in items)
    return raw.strip()


def _section(parser, loc, name, cls):
    if not parser.has_section(name):
        return cls()
    valid = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, raw in parser.items(name):
        fname = KEY_ALIASES.get((name, key), key)
        if fname not in valid:
            raise loc.error(name, key, f"unknown key (valid: {', '.join(sorted(valid))})")
        default = getattr(cls(), fname)
        try:
            kwargs[fname] = _convert(raw, default, fname)
        except ValueError as exc:
            raise loc.error(name, key, f"cannot parse {raw!r}: {exc}") from None
    return cls(**kwargs)


def parse_config(text: str, path: str = "<string>") -> ExperimentConfig:
    loc = _Locator(path, text)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for sec in parser.sections():
        if sec.lower() not in SECTIONS:
            raise loc.error(sec, None, f"unknown section (valid: {', '.join(SECTIONS)})")
    out = parser["output"] if parser.has_section("output") else {}
    for key in out:
        if key not in ("dir", "seed"):
            raise loc.error("output", key, "unknown key (valid: dir, seed)")
    try:
        seed = int(out.get("seed", 0))
    except ValueError:
        raise loc.error("output", "seed", "seed must be an integer") from None
    cfg = ExperimentConfig(
        model=_section(parser, loc, "model", ModelSection),
        grid=_section(parser, loc, "parameters", GridSection),
        reduction=_section(parser, loc, "reduction", ReductionSection),
        time=_section(parser, loc, "time", TimeSection),
        tolerances=_section(parser, loc, "tolerances", ToleranceSection),
        scaling=_section(parser, loc, "scaling", ScalingSection),
        output_dir=out.get("dir", "out"),
        seed=seed,
        source=path,
    )
    validate_config(cfg, loc)
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config ({exc.strerror})") from None
    return parse_config(text, str(p))


def validate_config(cfg: ExperimentConfig, loc: _Locator | None = None):
    loc = loc or _Locator(cfg.source, "")
    mdl, red, tm = cfg.model, cfg.reduction, cfg.time
    if mdl.name not in MODEL_NAMES:
        raise loc.error("model", "name", f"unknown model {mdl.name!r} (valid: {', '.join(MODEL_NAMES)})")
    if mdl.name == "swe" and mdl.grid_points < 4:
        raise loc.error("model", "grid_points", "need at least 4 grid points")
    if mdl.name == "oscillator":
        for key in ("frequencies", "momentum_weights"):
            vals = getattr(mdl, key)
            if vals and (len(vals) != mdl.m or min(vals) <= 0):
                raise loc.error("model", key, f"need {mdl.m} positive values (SPD stiffness)")
    if len(cfg.grid.ranges) != len(cfg.grid.samples):
        raise loc.error("parameters", "samples", "must have one entry per range")
    if any(n < 1 for n in cfg.grid.samples):
        raise loc.error("parameters", "samples", "counts must be positive")
    p = 1
    for n in cfg.grid.samples:
        p *= n
    for n2k in red.sizes:
        if n2k <= 0 or n2k % 2 or n2k > cfg.full_dim:
            raise loc.error("reduction", "sizes", f"2k={n2k} must be even and in [2, {cfg.full_dim}]")
        if n2k // 2 > p:
            raise loc.error("reduction", "sizes", f"2k={n2k} needs at least k={n2k // 2} parameter samples, grid has {p}")
    for meth in red.methods:
        if meth not in BASIS_METHODS:
            raise loc.error("reduction", "methods", f"unknown method {meth!r} (valid: {', '.join(BASIS_METHODS)})")
    if red.tableau not in TABLEAUS:
        raise loc.error("reduction", "tableau", f"unknown tableau {red.tableau!r} (valid: {', '.join(TABLEAUS)})")
    if not (red.gauge == "zero" or re.fullmatch(r"random:[0-9.eE+-]+", red.gauge)):
        raise loc.error("reduction", "gauge", "use 'zero' or 'random:<scale>'")
    if red.global_stride < 1:
        raise loc.error("reduction", "global_stride", "must be >= 1")
    if tm.dt <= 0:
        raise loc.error("time", "dt", "must be positive")
    if tm.T <= 0:
        raise loc.error("time", "T", "must be positive")
    n = round(tm.T / tm.dt)
    if abs(n * tm.dt - tm.T) > 1e-9 * tm.T:
        raise loc.error("time", "T", f"T={tm.T} is not a multiple of dt={tm.dt}")
    if tm.save_stride < 1:
        raise loc.error("time", "save_stride", "must be >= 1")
    for meth in cfg.scaling.methods:
        if meth not in BASIS_METHODS:
            raise loc.error("scaling", "methods", f"unknown method {meth!r}")
    if cfg.scaling.tableau not in TABLEAUS:
        raise loc.error("scaling", "tableau", f"unknown tableau {cfg.scaling.tableau!r}")


PRESETS = {
    "desk": dict(grid_points=256, T=2.0, dt=2e-3, samples=(2, 8), sizes=(6, 8, 10, 12)),
    "full": dict(grid_points=1000, T=7.0, dt=1e-3, samples=(10, 10), sizes=(6, 8, 10, 12, 14, 16)),
}


def apply_preset(cfg: ExperimentConfig, name: str) -> ExperimentConfig:
    """Overwrite the SWE scale settings with the ``desk`` or ``full`` preset."""
    if cfg.model.name != "swe":
        raise ConfigError(f"the {name} scale preset only applies to the swe model")
    p = PRESETS[name]
    return dataclasses.replace(
        cfg,
        model=dataclasses.replace(cfg.model, grid_points=p["grid_points"]),
        grid=dataclasses.replace(cfg.grid, samples=p["samples"]),
        reduction=dataclasses.replace(cfg.reduction, sizes=p["sizes"]),
        time=dataclasses.replace(cfg.time, T=p["T"], dt=p["dt"]),
    )
