"""Run configuration: TOML sections mapped onto the library's parameter types."""

from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field, fields, replace

import tomli
import tomli_w

from .dot import DiffusionModel, OpticsGeometry
from .errors import ConfigError
from .functional import ModalityParams, RegParams
from .grid import GridGeometry
from .phantom import BUILTIN_NAMES, PhantomPair, builtin_phantom
from .solver import LineSearchParams, ScheduleParams
from .xct import ScanGeometry


@dataclass(frozen=True)
class NoiseConfig:
    eta1: float = 0.05
    eta2: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.eta1 < 0 or self.eta2 < 0:
            raise ValueError("noise levels must be non-negative")


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "out"
    ssim_domain: str = "disk"
    profile_x: float = 11.75

    def __post_init__(self):
        if self.ssim_domain not in ("disk", "full"):
            raise ValueError("ssim_domain must be 'disk' or 'full'")


@dataclass(frozen=True)
class RunConfig:
    grid: GridGeometry = field(default_factory=GridGeometry)
    scan: ScanGeometry = field(default_factory=ScanGeometry)
    optics: OpticsGeometry = field(default_factory=OpticsGeometry)
    diffusion: DiffusionModel = field(default_factory=DiffusionModel)
    phantom: PhantomPair = field(default_factory=lambda: builtin_phantom("phantom1"))
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    jbmir: RegParams = field(default_factory=RegParams)
    smir_xct: ModalityParams = field(default_factory=lambda: ModalityParams(alpha=8.8e3, beta=8e-3))
    smir_dot: ModalityParams = field(default_factory=lambda: ModalityParams(alpha=1e5, beta=5e-7))
    linesearch: LineSearchParams = field(default_factory=LineSearchParams)
    schedule: ScheduleParams = field(default_factory=ScheduleParams)
    output: OutputConfig = field(default_factory=OutputConfig)


# section path -> (RunConfig attribute, parameter type)
_SECTIONS = {
    ("grid",): ("grid", GridGeometry),
    ("scan",): ("scan", ScanGeometry),
    ("noise",): ("noise", NoiseConfig),
    ("params", "jbmir"): ("jbmir", RegParams),
    ("params", "smir_xct"): ("smir_xct", ModalityParams),
    ("params", "smir_dot"): ("smir_dot", ModalityParams),
    ("linesearch",): ("linesearch", LineSearchParams),
    ("schedule",): ("schedule", ScheduleParams),
    ("output",): ("output", OutputConfig),
}
_DIFFUSION_KEYS = {f.name for f in fields(DiffusionModel)}
_TUPLE_KEYS = {"center", "amplitudes"}


def _plain(obj) -> dict:
    """Dataclass to a TOML-friendly dict: tuples become lists, ``None`` is dropped."""
    out = {}
    for k, v in asdict(obj).items():
        if v is None:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def _build(cls, values: dict, where: str):
    names = {f.name for f in fields(cls)}
    unknown = set(values) - names
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {', '.join(sorted(unknown))}")
    values = {k: tuple(v) if k in _TUPLE_KEYS and isinstance(v, list) else v for k, v in values.items()}
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def _phantom_from(section: dict) -> PhantomPair:
    section = dict(section)
    name = section.get("name", "phantom1")
    if "shapes" not in section:
        if set(section) - {"name"}:
            raise ConfigError("[phantom] custom backgrounds need an explicit shapes list")
        if name not in BUILTIN_NAMES:
            raise ConfigError(f"[phantom] unknown phantom {name!r}; built-ins are {', '.join(BUILTIN_NAMES)}")
        return builtin_phantom(name)
    try:
        return PhantomPair.from_dict(section)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[phantom] {exc}") from exc


def to_dict(cfg: RunConfig) -> dict:
    d: dict = {}
    for path, (attr, _) in _SECTIONS.items():
        node = d
        for p in path[:-1]:
            node = node.setdefault(p, {})
        node[path[-1]] = _plain(getattr(cfg, attr))
    d["optics"] = {**_plain(cfg.optics), **_plain(cfg.diffusion)}
    ph = cfg.phantom
    if ph.name in BUILTIN_NAMES and ph == builtin_phantom(ph.name):
        d["phantom"] = {"name": ph.name}
    else:
        d["phantom"] = ph.to_dict()
    return d


def from_dict(d: dict) -> RunConfig:
    d = copy.deepcopy(d)
    known_top = {"grid", "scan", "optics", "phantom", "noise", "params", "linesearch", "schedule", "output"}
    unknown = set(d) - known_top
    if unknown:
        raise ConfigError(f"unknown config sections: {', '.join(sorted(unknown))}")
    kwargs = {}
    for path, (attr, cls) in _SECTIONS.items():
        node = d
        for p in path:
            node = node.get(p, {}) if isinstance(node, dict) else {}
        kwargs[attr] = _build(cls, node, ".".join(path))
    params_unknown = set(d.get("params", {})) - {"jbmir", "smir_xct", "smir_dot"}
    if params_unknown:
        raise ConfigError(f"unknown params sections: {', '.join(sorted(params_unknown))}")
    optics = dict(d.get("optics", {}))
    diffusion = {k: optics.pop(k) for k in list(optics) if k in _DIFFUSION_KEYS}
    kwargs["optics"] = _build(OpticsGeometry, optics, "optics")
    kwargs["diffusion"] = _build(DiffusionModel, diffusion, "optics")
    kwargs["phantom"] = _phantom_from(d.get("phantom", {}))
    return RunConfig(**kwargs)


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "phantom":
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


# published settings of the three worked examples, as overrides of the defaults
EXAMPLES = {
    1: {"phantom": {"name": "phantom1"}},
    2: {"phantom": {"name": "phantom2"}, "params": {"jbmir": {"beta2": 7e-5}}},
    3: {"phantom": {"name": "phantom3"}},
}


def example(n: int, overrides: dict | None = None) -> RunConfig:
    """Configuration of worked example ``n`` (1, 2 or 3)."""
    if n not in EXAMPLES:
        raise ConfigError(f"unknown example {n}; expected one of {sorted(EXAMPLES)}")
    return load(None, _merge(copy.deepcopy(EXAMPLES[n]), overrides or {}))


def load(path=None, overrides: dict | None = None, base: dict | None = None) -> RunConfig:
    """Defaults (updated by ``base``), then the TOML file at ``path``, then
    ``overrides`` (nested dict)."""
    d = to_dict(RunConfig())
    if base:
        if "phantom" in base:
            d["phantom"] = {}
        d = _merge(d, base)
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomli.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomli.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        if "phantom" in user:
            d["phantom"] = {}
        d = _merge(d, user)
    if overrides:
        if "phantom" in overrides:
            d["phantom"] = {}
        d = _merge(d, overrides)
    return from_dict(d)


def dumps(cfg: RunConfig) -> str:
    return tomli_w.dumps(to_dict(cfg))


def parse_assignment(text: str) -> dict:
    """``"params.jbmir.gamma1=0"`` -> nested dict with a TOML-parsed value."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form section.key=value")
    key, raw = text.split("=", 1)
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    parts = key.strip().split(".")
    node: dict = {}
    root = node
    for p in parts[:-1]:
        node = node.setdefault(p, {})
    node[parts[-1]] = value
    return root


def with_output(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, output=replace(cfg.output, **changes))
