"""Experiment configuration: a flat INI-style text format, parsed with line numbers.

Sections and keys (everything has a default unless noted)::

    [grid]        dim, nx, ny, lx, ly
    [model]       tau, beta
    [motility]    family, scale, arg_scale, <family parameters>, table_s, table_gamma
    [consumption] family, scale, <family parameters>
    [physical]    D_v, D_n, alpha, beta, k_s, K_n, theta, law     (optional)
    [initial]     u, v, n, perturbation, amplitude, seed, bump_mass, bump_width,
                  bump_x, bump_y, total_mass, critical_fraction
    [time]        t_end, dt, dt_min, dt_max, adapt, max_rel_change, solver_tol
    [output]      every, output_dt, dir, scenario, figures, converge_tol,
                  aggregation_factor, bounded_tol, fit_window
    [assumptions] k, l, chi, b0, s_min, s_max, samples, N        (optional)

``[grid]``, ``[motility]`` and ``[time]`` must be present (possibly empty).
Every problem found is reported, each prefixed with its line number.

``[physical]`` switches to dimensional input: ``tau``, ``beta``, the motility
scaling and the consumption law are then derived by
:func:`chemotaxis_dsm.kinetics.rescale_from_physical`, and ``[model]`` must
be left out.  In ``[initial]``, ``v = auto`` starts the signal at ``<u+n>/β``;
``total_mass`` sizes the bump so that ``∫(u + n)`` has that value, and
``critical_fraction`` does the same with ``total_mass = fraction * 4π/χ``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, fields, replace

from .grid import Grid, GridError, build_grid
from .kinetics import (
    _CONSUMPTION_PARAMS,
    _MOTILITY_PARAMS,
    CONSUMPTION_FAMILIES,
    MOTILITY_FAMILIES,
    ConsumptionSpec,
    KineticsError,
    ModelParams,
    MotilitySpec,
    rescale_from_physical,
)
from .solver import InitialSpec, StepControls


class ConfigError(ValueError):
    """All problems found in a config, one message per entry of ``errors``."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


AUTO = "auto"


@dataclass(frozen=True)
class GridSection:
    dim: int = 2
    nx: int = 64
    ny: int = 64
    lx: float = 1.0
    ly: float = 1.0


@dataclass(frozen=True)
class ModelSection:
    tau: float = 1.0
    beta: float = 1.0


@dataclass(frozen=True)
class MotilitySection:
    family: str = "power"
    scale: float = 1.0
    arg_scale: float = 1.0
    params: tuple = (("k", 1.0),)
    table_s: tuple = ()
    table_gamma: tuple = ()


@dataclass(frozen=True)
class ConsumptionSection:
    family: str = "zero"
    scale: float = 1.0
    params: tuple = ()


@dataclass(frozen=True)
class PhysicalSection:
    D_v: float = 1.0
    D_n: float = 1.0
    alpha: float = 1.0
    beta: float = 1.0
    k_s: float = 1.0
    K_n: float = 1.0
    theta: float = 0.0
    law: str = "hill2"


@dataclass(frozen=True)
class InitialSection:
    u: float = 1.0
    v: float | str = 1.0
    n: float = 0.0
    perturbation: str = "none"
    amplitude: float = 0.0
    seed: int = 0
    bump_mass: float = 1.0
    bump_width: float = 0.1
    bump_x: float | None = None
    bump_y: float | None = None
    total_mass: float | None = None
    critical_fraction: float | None = None


@dataclass(frozen=True)
class TimeSection:
    t_end: float = 10.0
    dt: float = 1e-2
    dt_min: float = 1e-8
    dt_max: float = 1e-1
    adapt: bool = False
    max_rel_change: float = 0.1
    solver_tol: float = 1e-12


@dataclass(frozen=True)
class OutputSection:
    every: int = 10
    output_dt: float | None = None
    dir: str = "runs/out"
    scenario: str = "custom"
    figures: bool = True
    converge_tol: float = 1e-3
    aggregation_factor: float = 10.0
    bounded_tol: float = 0.1
    fit_window: float = 0.5


@dataclass(frozen=True)
class AssumptionSection:
    k: float = 1.0
    l: float = 0.0
    chi: float = 1.0
    b0: float = 1.0
    s_min: float = 1e-2
    s_max: float = 1e3
    samples: int = 400
    N: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    grid: GridSection = field(default_factory=GridSection)
    model: ModelSection | None = field(default_factory=ModelSection)
    motility: MotilitySection = field(default_factory=MotilitySection)
    consumption: ConsumptionSection = field(default_factory=ConsumptionSection)
    physical: PhysicalSection | None = None
    initial: InitialSection = field(default_factory=InitialSection)
    time: TimeSection = field(default_factory=TimeSection)
    output: OutputSection = field(default_factory=OutputSection)
    assumptions: AssumptionSection = field(default_factory=AssumptionSection)

    # builders ------------------------------------------------------------
    def build_grid(self) -> Grid:
        g = self.grid
        if g.dim == 1:
            return build_grid(1, [g.nx], [g.lx])
        return build_grid(2, [g.nx, g.ny], [g.lx, g.ly])

    def motility_spec(self) -> MotilitySpec:
        m = self.motility
        table = (m.table_s, m.table_gamma) if m.family == "custom" else None
        return MotilitySpec(m.family, dict(m.params), scale=m.scale, arg_scale=m.arg_scale, table=table)

    def build_params(self) -> ModelParams:
        motility = self.motility_spec()
        if self.physical is not None:
            p = self.physical
            return rescale_from_physical(
                p.D_v, p.D_n, p.alpha, p.beta, p.k_s, p.K_n, p.theta, motility, consumption=p.law
            )
        c = self.consumption
        cons = ConsumptionSpec(c.family, dict(c.params), scale=c.scale)
        return ModelParams(self.model.tau, self.model.beta, motility, cons)

    def total_mass(self, grid: Grid | None = None, params: ModelParams | None = None) -> float | None:
        ini = self.initial
        if ini.critical_fraction is not None:
            params = params or self.build_params()
            return ini.critical_fraction * 4.0 * math.pi / params.motility.effective("chi")
        return ini.total_mass

    def build_initial(self, grid: Grid | None = None, params: ModelParams | None = None) -> InitialSpec:
        grid = grid or self.build_grid()
        params = params or self.build_params()
        ini = self.initial
        bump_mass = ini.bump_mass
        target = self.total_mass(grid, params)
        if target is not None:
            bump_mass = target - (ini.u + ini.n) * grid.measure
            if bump_mass < 0:
                raise ValueError(
                    f"total mass {target:g} is below the background mass {(ini.u + ini.n) * grid.measure:g}"
                )
        center = None
        if ini.bump_x is not None or ini.bump_y is not None:
            cx = ini.bump_x if ini.bump_x is not None else grid.lengths[0] / 2
            if grid.dim == 1:
                center = (cx,)
            else:
                cy = ini.bump_y if ini.bump_y is not None else grid.lengths[1] / 2
                center = (cx, cy)
        if ini.v == AUTO:
            mass = target if target is not None else (ini.u + ini.n) * grid.measure + (
                bump_mass if ini.perturbation == "bump" else 0.0
            )
            v0 = mass / grid.measure / params.beta
        else:
            v0 = ini.v
        return InitialSpec(
            u=ini.u,
            v=v0,
            n=ini.n,
            perturbation=ini.perturbation,
            amplitude=ini.amplitude,
            seed=ini.seed,
            bump_mass=bump_mass,
            bump_width=ini.bump_width,
            bump_center=center,
        )

    def build_controls(self) -> StepControls:
        t = self.time
        return StepControls(
            dt=t.dt, dt_min=t.dt_min, dt_max=t.dt_max, adapt=t.adapt,
            max_rel_change=t.max_rel_change, solver_tol=t.solver_tol,
        )

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return replace(self, initial=replace(self.initial, seed=int(seed)))

    def with_output_dir(self, path) -> "ExperimentConfig":
        return replace(self, output=replace(self.output, dir=str(path)))


# value parsing -------------------------------------------------------------

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _parse_bool(text):
    low = text.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_int(text):
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if value != int(value):
            raise ValueError(f"expected an integer, got {text!r}") from None
        return int(value)


def _parse_float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"expected a finite number, got {text!r}")
    return value


def _parse_float_list(text):
    return tuple(_parse_float(x) for x in text.replace(",", " ").split())


def _converter(section_cls, name):
    ftype = {f.name: f.type for f in fields(section_cls)}[name]
    if name in ("table_s", "table_gamma"):
        return _parse_float_list
    if ftype == "float | str":
        return lambda s: AUTO if s.lower() == AUTO else _parse_float(s)
    if ftype.startswith("float"):
        return _parse_float
    if ftype.startswith("int"):
        return _parse_int
    if ftype == "bool":
        return _parse_bool
    return str


SECTIONS = {
    "grid": GridSection,
    "model": ModelSection,
    "motility": MotilitySection,
    "consumption": ConsumptionSection,
    "physical": PhysicalSection,
    "initial": InitialSection,
    "time": TimeSection,
    "output": OutputSection,
    "assumptions": AssumptionSection,
}
REQUIRED = ("grid", "motility", "time")
_FAMILY_KEYED = {"motility": _MOTILITY_PARAMS, "consumption": _CONSUMPTION_PARAMS}
_FAMILIES = {"motility": MOTILITY_FAMILIES, "consumption": CONSUMPTION_FAMILIES}

_SECTION_RE = re.compile(r"^\[\s*([A-Za-z_][\w-]*)\s*\]$")


def _strip_comment(line: str) -> str:
    for marker in ("#", ";"):
        pos = line.find(marker)
        if pos >= 0:
            line = line[:pos]
    return line.strip()


def _unquote(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _tokenize(text: str, errors: list):
    """``{section: (header_line, {key: (line, raw_value)})}`` in file order."""
    sections: dict = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        m = _SECTION_RE.match(line)
        if m:
            name = m.group(1).lower()
            if name not in SECTIONS:
                errors.append(f"line {lineno}: unknown section [{name}]")
                current = None
                continue
            if name in sections:
                errors.append(f"line {lineno}: section [{name}] appears twice")
            sections.setdefault(name, (lineno, {}))
            current = name
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if current is None:
            if not sections:
                errors.append(f"line {lineno}: key {key!r} appears before any section header")
            continue
        entries = sections[current][1]
        if key in entries:
            errors.append(f"line {lineno}: duplicate key {key!r} in [{current}]")
        entries[key] = (lineno, _unquote(value))
    return sections


def _line_for(message: str, entries: dict, fallback: int) -> int:
    """Attribute a validation message to the first key it names."""
    best = None
    for key, (lineno, _) in entries.items():
        m = re.search(rf"(?<![\w]){re.escape(key)}(?![\w])", message)
        if m and (best is None or m.start() < best[0]):
            best = (m.start(), lineno)
    return best[1] if best else fallback


def _build_section(name, header_line, entries, errors):
    """Section object (``None`` if unusable) and whether every value converted."""
    cls = SECTIONS[name]
    clean = True
    known = {f.name for f in fields(cls)} - {"params"}
    values = {}
    family_params = {}
    family = None
    if name in _FAMILY_KEYED:
        fam_entry = entries.get("family")
        family = fam_entry[1] if fam_entry else cls().family
        if family not in _FAMILIES[name]:
            errors.append(
                f"line {fam_entry[0] if fam_entry else header_line}: unknown {name} family {family!r} "
                f"(choose from {', '.join(_FAMILIES[name])})"
            )
            family, clean = None, False
    for key, (lineno, raw) in entries.items():
        if key in known:
            try:
                values[key] = _converter(cls, key)(raw)
            except ValueError as exc:
                errors.append(f"line {lineno}: [{name}] {key}: {exc}")
                clean = False
        elif family is not None and key in _FAMILY_KEYED[name][family]:
            try:
                family_params[key] = _parse_float(raw)
            except ValueError as exc:
                errors.append(f"line {lineno}: [{name}] {key}: {exc}")
                clean = False
        elif name in _FAMILY_KEYED and family is None:
            continue
        else:
            errors.append(f"line {lineno}: unknown key {key!r} in [{name}]")
    if name in _FAMILY_KEYED:
        if family == "power" and name == "motility" and "k" not in family_params:
            family_params["k"] = 1.0
        values["params"] = tuple(sorted(family_params.items()))
    try:
        return cls(**values), clean
    except TypeError as exc:
        errors.append(f"line {header_line}: [{name}] {exc}")
        return None, False


def _check_ranges(cfg: ExperimentConfig, where, errors):
    """Range checks not covered by the library objects themselves."""

    def err(section, key, message):
        sec_line, entries = where.get(section, (0, {}))
        lineno = entries.get(key, (sec_line,))[0]
        errors.append(f"line {lineno}: [{section}] {message}")

    g = cfg.grid
    if g.dim not in (1, 2):
        err("grid", "dim", f"dim must be 1 or 2, got {g.dim}")
    t = cfg.time
    if not t.t_end > 0:
        err("time", "t_end", "t_end must be > 0")
    if not 0 < t.solver_tol <= 1e-2:
        err("time", "solver_tol", "solver_tol must lie in (0, 1e-2]")
    o = cfg.output
    if o.every < 1:
        err("output", "every", "every must be >= 1")
    if o.output_dt is not None and not o.output_dt > 0:
        err("output", "output_dt", "output_dt must be > 0")
    for key in ("converge_tol", "aggregation_factor", "bounded_tol"):
        if not getattr(o, key) > 0:
            err("output", key, f"{key} must be > 0")
    if not 0 < o.fit_window <= 1:
        err("output", "fit_window", "fit_window must lie in (0, 1]")
    ini = cfg.initial
    if ini.total_mass is not None and ini.critical_fraction is not None:
        err("initial", "critical_fraction", "give total_mass or critical_fraction, not both")
    if (ini.total_mass is not None or ini.critical_fraction is not None) and ini.perturbation != "bump":
        err("initial", "perturbation", "total_mass and critical_fraction need perturbation = bump")
    if ini.critical_fraction is not None and "motility" in where and cfg.motility.family != "exponential":
        err("initial", "critical_fraction", "critical_fraction needs the exponential motility family")
    for key in ("total_mass", "critical_fraction"):
        val = getattr(ini, key)
        if val is not None and not val > 0:
            err("initial", key, f"{key} must be > 0")
    if cfg.physical is not None and cfg.physical.law not in ("hill2", "monod"):
        err("physical", "law", f"law must be hill2 or monod, got {cfg.physical.law!r}")
    a = cfg.assumptions
    if not 0 < a.s_min < a.s_max:
        err("assumptions", "s_min", "need 0 < s_min < s_max")


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate; raises :class:`ConfigError` listing every problem."""
    errors: list[str] = []
    sections = _tokenize(text, errors)
    last_line = max(1, len(text.splitlines()))
    for name in REQUIRED:
        if name not in sections:
            errors.append(f"line {last_line}: missing section [{name}]")
    if "physical" in sections and "model" in sections:
        errors.append(f"line {sections['model'][0]}: [model] cannot be combined with [physical]")
    built, broken = {}, set()
    for name, (header_line, entries) in sections.items():
        built[name], clean = _build_section(name, header_line, entries, errors)
        if not clean:
            broken.add(name)

    # keep going with defaults for broken sections so later problems are reported too
    kwargs = {k: v for k, v in built.items() if v is not None and k not in broken}
    if "physical" in sections:
        kwargs["model"] = None
        if "consumption" in sections:
            errors.append(f"line {sections['consumption'][0]}: [consumption] is derived from [physical]; leave it out")
        if "physical" in broken:
            kwargs.pop("model")
    cfg = ExperimentConfig(**kwargs)
    _check_ranges(cfg, sections, errors)

    # delegate the remaining invariants to the objects that own them
    checks = (
        ("grid", cfg.build_grid, (GridError,)),
        ("motility", cfg.motility_spec, (KineticsError,)),
        ("physical" if cfg.physical is not None else "consumption", cfg.build_params, (KineticsError,)),
        ("time", cfg.build_controls, (ValueError,)),
    )
    for section, build, exc_types in checks:
        if section in broken or (section in ("consumption", "physical") and "motility" in broken):
            continue
        try:
            build()
        except exc_types as exc:
            if section == "motility":
                broken.add(section)
            header, entries = sections.get(section, (last_line, {}))
            errors.append(f"line {_line_for(str(exc), entries, header)}: [{section}] {exc}")
    if not errors:
        try:
            from .solver import init_state

            init_state(cfg.build_grid(), cfg.build_initial())
        except (ValueError, KineticsError) as exc:
            header, entries = sections.get("initial", (last_line, {}))
            errors.append(f"line {_line_for(str(exc), entries, header)}: [initial] {exc}")
    if errors:
        raise ConfigError(errors)
    return cfg


# serialisation ---------------------------------------------------------------


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(repr(float(x)) for x in value)
    return str(value)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(serialize_config(c)) == c``."""
    out = []
    for name, cls in SECTIONS.items():
        section = getattr(cfg, name)
        if section is None or (name == "consumption" and cfg.physical is not None):
            continue
        out.append(f"[{name}]")
        for f in fields(cls):
            value = getattr(section, f.name)
            if f.name == "params":
                for key, val in value:
                    out.append(f"{key} = {val!r}")
                continue
            if value is None:
                continue
            if f.name in ("table_s", "table_gamma") and not value:
                continue
            out.append(f"{f.name} = {_format_value(value)}")
        out.append("")
    return "\n".join(out)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def set_path(cfg: ExperimentConfig, path: str, value: float) -> ExperimentConfig:
    """Return a copy with ``section.key`` set to ``value`` (numeric fields only)."""
    if path.count(".") != 1:
        raise ConfigError([f"axis {path!r} must look like section.key"])
    section, key = path.split(".")
    if section not in SECTIONS or getattr(cfg, section, None) is None:
        raise ConfigError([f"axis {path!r}: no section [{section}] in this config"])
    sec = getattr(cfg, section)
    if section in _FAMILY_KEYED and key in dict(sec.params):
        params = dict(sec.params)
        params[key] = float(value)
        return replace(cfg, **{section: replace(sec, params=tuple(sorted(params.items())))})
    names = {f.name: f.type for f in fields(type(sec))}
    if key not in names or key == "params":
        raise ConfigError([f"axis {path!r}: unknown key {key!r}"])
    ftype = names[key]
    if ftype.startswith("int"):
        if float(value) != int(value):
            raise ConfigError([f"axis {path!r}: integer field needs integer values"])
        value = int(value)
    elif ftype.startswith("float"):
        value = float(value)
    else:
        raise ConfigError([f"axis {path!r}: {key} is not numeric"])
    return replace(cfg, **{section: replace(sec, **{key: value})})
