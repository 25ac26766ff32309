"""
Run configuration: case files, environment settings and derived solver objects.

A case file is INI-style text. Keys before any header belong to ``[run]``;
each ``[bc.<tag>]`` section assigns a boundary kind (and a shift for
periodic tags)::

    case = mms1
    degree = 2
    mesh = square:1

    [bc.left]
    kind = periodic
    shift = 1, 0
"""

import configparser
import logging
import os
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, Optional, Tuple

from .boundary import FreestreamState
from .cases import CaseCatalog
from .errors import ConfigError, MeshError
from .gas import GasModel
from .mesh import BOUNDARY_KINDS, PERIODIC, BoundaryTag
from .meshgen import parse_builtin
from .timestep import FINAL_TIME, STEADY, TimeConfig

logger = logging.getLogger('ddgic-ns')

TESTED_DEGREES = range(1, 5)
EXPORT_FORMATS = ('vtk', 'csv')
SCALAR_SCHEMES = ('new', 'original')


@dataclass
class RunConfig:
    """Everything needed to run one case."""

    case: str
    mesh: str = ''
    degree: int = 1
    cfl: float = 0.1
    gamma: float = 1.4
    prandtl: float = 0.72
    viscosity: str = 'constant'
    mu: float = 0.0
    reynolds: Optional[float] = None
    mach: Optional[float] = None
    mode: str = FINAL_TIME
    final_time: Optional[float] = None
    steady_tol: Optional[float] = None
    max_steps: int = 10_000_000
    dt_safety: float = 0.9
    back_pressure: Optional[float] = None
    threads: int = 1
    seed: int = 1
    output_dir: str = 'runs'
    run_name: str = ''
    log_every: int = 100
    record_every: int = 10
    export: Tuple[str, ...] = ('vtk',)
    reference: str = ''
    save_reference: bool = False
    initial: str = ''
    perturbation: float = 0.01
    diameter: float = 1.0
    problem: str = 'heat'
    scheme: str = 'new'
    bcs: Dict[str, BoundaryTag] = field(default_factory=dict)

    @property
    def builtin_mesh(self) -> bool:
        try:
            parse_builtin(self.mesh)
        except MeshError:
            return False
        return True

    @property
    def name(self) -> str:
        if self.run_name:
            return self.run_name
        slug = re.sub(r'[^A-Za-z0-9]+', '-', Path(self.mesh).stem if not self.builtin_mesh else self.mesh)
        return f"{self.case}_k{self.degree}_{slug.strip('-')}"

    def freestream(self) -> FreestreamState:
        """rho = 1, u = 1, p = 1 / (gamma M^2) when a Mach number is set."""
        if self.mach is None:
            return FreestreamState()
        return FreestreamState(1.0, 1.0, 0.0, 1.0 / (self.gamma * self.mach ** 2))

    def gas_model(self) -> GasModel:
        """
        Gas parameters in the nondimensional scaling rho_inf = U_inf = 1.

        With a Reynolds number, mu = 1 / Re (constant) or mu_ref = 1 / Re at
        T_inf = T_ref (Sutherland), and cv follows from R = p_inf / (rho_inf T_inf).
        """
        if self.reynolds is None:
            return GasModel(self.gamma, self.prandtl, self.viscosity, mu=self.mu)
        fs = self.freestream()
        t_ref = 288.15
        gas_constant = fs.p / (fs.rho * t_ref)
        cv = gas_constant / (self.gamma - 1.0)
        mu = 1.0 / self.reynolds
        return GasModel(self.gamma, self.prandtl, self.viscosity, mu=mu, mu_ref=mu, t_ref=t_ref, cv=cv)

    def time_config(self) -> TimeConfig:
        return TimeConfig(cfl=self.cfl, final_time=self.final_time, steady_tol=self.steady_tol,
                          max_steps=self.max_steps, dt_safety=self.dt_safety,
                          log_every=self.log_every, record_every=self.record_every)


def _parse_optional_float(raw: str) -> Optional[float]:
    return None if raw.strip().lower() in ('', 'none') else float(raw)


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ('1', 'true', 'yes', 'on'):
        return True
    if value in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: '{raw}'")


def _parse_tuple(raw: str) -> Tuple[str, ...]:
    return tuple(item.strip().lower() for item in raw.split(',') if item.strip())


_CONVERTERS = {
    'case': str, 'mesh': str, 'degree': int, 'cfl': float, 'gamma': float, 'prandtl': float,
    'viscosity': str, 'mu': float, 'reynolds': _parse_optional_float, 'mach': _parse_optional_float,
    'mode': str, 'final_time': _parse_optional_float, 'steady_tol': _parse_optional_float,
    'max_steps': int, 'dt_safety': float, 'back_pressure': _parse_optional_float, 'threads': int,
    'seed': int, 'output_dir': str, 'run_name': str, 'log_every': int, 'record_every': int,
    'export': _parse_tuple, 'reference': str, 'save_reference': _parse_bool, 'initial': str,
    'perturbation': float, 'diameter': float, 'problem': str, 'scheme': str,
}

RUN_KEYS = tuple(f.name for f in fields(RunConfig) if f.name != 'bcs')


def _key_lines(text: str) -> Dict[Tuple[str, str], int]:
    """Line number of every ``key = value`` per section, for error messages."""
    lines = {}
    section = 'run'
    for number, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped[0] in '#;':
            continue
        match = re.match(r'^\[(.+)\]$', stripped)
        if match:
            section = match.group(1).strip()
            continue
        key = re.split(r'[=:]', stripped, maxsplit=1)[0].strip().lower()
        lines.setdefault((section, key), number)
    return lines


def build_config(case: str, overrides: Optional[Dict] = None,
                 catalog: Optional[CaseCatalog] = None) -> RunConfig:
    """Case defaults merged with ``overrides``."""
    catalog = catalog or CaseCatalog()
    entry = catalog.get_case_by_name(case)
    if entry is None:
        raise ConfigError(f"Unknown case '{case}' (choose from {', '.join(catalog.names())})", key='case')
    values = dict(entry['defaults'])
    values.update(overrides or {})
    values['case'] = entry['name']
    return RunConfig(**values)


def parse_config_text(text: str, source: str = '<config>', base_dir: Optional[Path] = None) -> RunConfig:
    """
    Parse case-file text into a validated RunConfig.

    A relative mesh path is looked up under ``base_dir`` first.
    """
    if not re.match(r'^\s*(?:[#;][^\n]*\n\s*)*\[', text):
        text = '[run]\n' + text
        offset = 1
    else:
        offset = 0
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        line = getattr(e, 'lineno', None)
        raise ConfigError(f"{source}: {e.message if hasattr(e, 'message') else e}",
                          line=None if line is None else line - offset)
    lines = {k: v - offset for k, v in _key_lines(text).items()}

    values = {}
    bcs = {}
    for section in parser.sections():
        if section == 'run':
            for key, raw in parser.items(section):
                if key not in _CONVERTERS:
                    raise ConfigError(f"{source}: unknown key", key=key, line=lines.get((section, key)))
                try:
                    values[key] = _CONVERTERS[key](raw)
                except ValueError as e:
                    raise ConfigError(f"{source}: invalid value '{raw}' ({e})", key=key,
                                      line=lines.get((section, key)))
        elif section.startswith('bc.'):
            name = section[3:].strip()
            bcs[name] = _parse_bc(name, dict(parser.items(section)), source,
                                  {k: lines.get((section, k)) for k in parser[section]})
        else:
            raise ConfigError(f"{source}: unknown section [{section}]",
                              line=_section_line(text, section, offset))

    if 'case' not in values:
        raise ConfigError(f"{source}: no case given", key='case')
    config = build_config(values.pop('case'), values)
    if bcs:
        config.bcs = bcs
    if base_dir is not None and not config.builtin_mesh and not Path(config.mesh).is_absolute():
        candidate = Path(base_dir) / config.mesh
        if candidate.exists():
            config.mesh = str(candidate)
    validate_config(config)
    return config


def _section_line(text: str, section: str, offset: int) -> Optional[int]:
    for number, line in enumerate(text.splitlines(), 1):
        if line.strip() == f"[{section}]":
            return number - offset
    return None


def _parse_bc(name: str, items: Dict[str, str], source: str, lines: Dict[str, int]) -> BoundaryTag:
    for key in items:
        if key not in ('kind', 'shift'):
            raise ConfigError(f"{source}: unknown boundary key", key=f"bc.{name}.{key}", line=lines.get(key))
    kind = items.get('kind', '').strip().lower()
    if kind not in BOUNDARY_KINDS:
        raise ConfigError(f"{source}: boundary kind must be one of {', '.join(BOUNDARY_KINDS)}",
                          key=f"bc.{name}.kind", line=lines.get('kind'))
    shift = None
    if 'shift' in items:
        try:
            parts = [float(x) for x in items['shift'].split(',')]
        except ValueError:
            parts = []
        if len(parts) != 2:
            raise ConfigError(f"{source}: shift must be 'Lx, Ly'", key=f"bc.{name}.shift",
                              line=lines.get('shift'))
        shift = (parts[0], parts[1])
    if kind == PERIODIC and shift is None:
        raise ConfigError(f"{source}: periodic boundary needs a shift", key=f"bc.{name}.shift")
    return BoundaryTag(name, kind, shift)


def parse_config(path) -> RunConfig:
    """Read and validate a case file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Config file not found: {path}")
    return parse_config_text(path.read_text(encoding='utf-8'), str(path), base_dir=path.parent)


def validate_config(config: RunConfig) -> RunConfig:
    """Raise ConfigError for unusable settings; warn for untested ones."""
    if config.degree < 1:
        raise ConfigError(f"Polynomial degree must be at least 1, got {config.degree}", key='degree')
    if config.degree not in TESTED_DEGREES:
        logger.warning(f"Degree k={config.degree} is outside the tested range 1..4")
    if not config.cfl > 0.0:
        raise ConfigError(f"CFL number must be positive, got {config.cfl}", key='cfl')
    if config.mode not in (FINAL_TIME, STEADY):
        raise ConfigError(f"Mode must be '{FINAL_TIME}' or '{STEADY}', got '{config.mode}'", key='mode')
    if config.mode == FINAL_TIME and config.final_time is None:
        raise ConfigError("A final-time run needs final_time", key='final_time')
    if config.mode == STEADY and config.steady_tol is None:
        raise ConfigError("A steady run needs steady_tol", key='steady_tol')
    if config.threads < 1:
        raise ConfigError(f"threads must be at least 1, got {config.threads}", key='threads')
    if not config.mesh:
        raise ConfigError("No mesh given for this case", key='mesh')
    if not config.builtin_mesh and not Path(config.mesh).exists():
        raise ConfigError(f"Mesh file not found: {config.mesh}", key='mesh')
    for fmt in config.export:
        if fmt not in EXPORT_FORMATS:
            raise ConfigError(f"Unknown export format '{fmt}'", key='export')
    if config.scheme not in SCALAR_SCHEMES:
        raise ConfigError(f"Scalar scheme must be 'new' or 'original', got '{config.scheme}'", key='scheme')
    if config.reynolds is not None and not config.reynolds > 0.0:
        raise ConfigError(f"Reynolds number must be positive, got {config.reynolds}", key='reynolds')
    if config.mach is not None and not config.mach > 0.0:
        raise ConfigError(f"Mach number must be positive, got {config.mach}", key='mach')
    config.gas_model()
    return config


def _format(value) -> str:
    if value is None:
        return 'none'
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ', '.join(value)
    return str(value)


def serialize_config(config: RunConfig) -> str:
    """INI text that parse_config_text turns back into an equivalent RunConfig."""
    out = ['[run]']
    for key in RUN_KEYS:
        out.append(f"{key} = {_format(getattr(config, key))}")
    for name, tag in sorted(config.bcs.items()):
        out.append('')
        out.append(f"[bc.{name}]")
        out.append(f"kind = {tag.kind}")
        if tag.shift is not None:
            out.append(f"shift = {tag.shift[0]!r}, {tag.shift[1]!r}")
    return '\n'.join(out) + '\n'


def with_overrides(config: RunConfig, **overrides) -> RunConfig:
    """Copy of ``config`` with the non-None overrides applied and validated."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    return validate_config(replace(config, **changes)) if changes else config


@dataclass
class EnvironmentSettings:
    """Process-level settings read from the environment (optionally a .env file)."""

    log_level: str = 'INFO'
    log_file: Optional[str] = None
    output_dir: str = './runs'
    threads: int = 1

    @classmethod
    def from_env(cls) -> 'EnvironmentSettings':
        threads = os.getenv('DDGIC_THREADS', '1')
        try:
            threads = int(threads)
        except ValueError:
            raise ConfigError(f"DDGIC_THREADS must be an integer, got '{threads}'", key='DDGIC_THREADS')
        return cls(
            log_level=os.getenv('LOG_LEVEL', 'INFO'),
            log_file=os.getenv('LOG_FILE') or None,
            output_dir=os.getenv('DDGIC_OUTPUT_DIR', './runs'),
            threads=threads,
        )
