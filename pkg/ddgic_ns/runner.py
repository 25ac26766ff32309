"""
Case runner: builds the solver for a RunConfig, integrates it and writes the
run directory with its artifacts and manifest.
"""

import hashlib
import logging
import platform
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import scipy

from . import __version__
from .basis import BasisSet, build_basis
from .boundary import BoundaryConditions, FreestreamState
from .cases import (
    CYLINDER_STEADY,
    CYLINDER_UNSTEADY,
    MMS,
    PLATE,
    PULSE,
    SCALAR,
    CaseCatalog,
)
from .config import RunConfig, serialize_config, with_overrides
from .ddgic import ResidualAssembler, SolutionField, variable_names
from .diagnostics import (
    ForceRecord,
    aero_coefficients,
    blasius_skin_friction,
    error_norms,
    exit_plane_profile,
    mean_and_amplitude,
    observed_orders,
    reference_field_error,
    strouhal,
    wake_metrics,
    wall_quantities,
)
from .errors import ConfigError, DDGICError, DiagnosticsError, SolverBlowUpError
from .export import export_field, load_reference, save_reference, write_table
from .gas import GasModel, NavierStokesEquations
from .manufactured import EXACT_SOLUTIONS, pressure_pulse
from .mesh import ADIABATIC_WALL, OUTFLOW, BoundaryTag, Mesh, load_mesh
from .meshgen import BUILTIN_MESHES, BASE_SEGMENT, builtin_mesh, parse_builtin
from .scalar import SCALAR_PROBLEMS, AntiderivativeAssembler, ScalarDiffusionEquation
from .timestep import TimeIntegrator

logger = logging.getLogger('ddgic-ns')


@dataclass
class RunSetup:
    """Solver objects assembled for one configuration."""

    config: RunConfig
    mesh: Mesh
    basis: BasisSet
    physics: Any
    assembler: ResidualAssembler
    field: SolutionField
    gas: Optional[GasModel] = None
    freestream: Optional[FreestreamState] = None
    exact_at: Optional[Callable[[float], Callable]] = None


def _default_tags(config: RunConfig) -> Dict[str, BoundaryTag]:
    tags = {}
    try:
        name, _ = parse_builtin(config.mesh)
        tags.update(BUILTIN_MESHES[name][1]())
    except DDGICError:
        pass
    tags.update(config.bcs)
    return tags


def transfer_field(stored: SolutionField, mesh: Mesh, basis: BasisSet) -> np.ndarray:
    """Project a stored field onto ``basis`` on the same cells (any degree)."""
    if stored.mesh.num_cells != mesh.num_cells or not np.allclose(
            stored.mesh.vertices[stored.mesh.cells], mesh.vertices[mesh.cells],
            atol=1e-12 * max(mesh.extent, 1.0)):
        raise ConfigError("Initial field was computed on a different mesh", key='initial')
    values = stored.evaluate(np.arange(mesh.num_cells), basis.rules.volume.points)
    vol = basis.volume
    return np.einsum('cq,cqv,cqb->cvb', vol.weights, values, vol.phi)


def perturb_wake(coefficients: np.ndarray, basis: BasisSet, amplitude: float,
                 center=(1.5, 0.0), radius: float = 1.0) -> np.ndarray:
    """
    Add a smooth bump of height ``amplitude`` to v inside a disc, keeping the pressure.

    The bump is (1 - r^2/R^2)^2 for r < R and zero outside.
    """
    vol = basis.volume
    Q = np.einsum('cqb,cvb->cqv', vol.phi, coefficients)
    r2 = ((vol.xy[..., 0] - center[0]) ** 2 + (vol.xy[..., 1] - center[1]) ** 2) / radius ** 2
    dv = amplitude * np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)
    rho = Q[..., 0]
    v = Q[..., 2] / rho
    Q[..., 3] += 0.5 * rho * ((v + dv) ** 2 - v ** 2)
    Q[..., 2] += rho * dv
    return np.einsum('cq,cqv,cqb->cvb', vol.weights, Q, vol.phi)


class CaseRunner:
    """Runs configured cases and reports a result dictionary."""

    def __init__(self, catalog: Optional[CaseCatalog] = None):
        self.catalog = catalog or CaseCatalog()
        self.logger = None

    def set_logger(self, logger):
        """Set logger for this runner."""
        self.logger = logger
        self.catalog.set_logger(logger)

    def _log(self, level, message):
        if self.logger:
            self.logger.log(level, message)

    def load_mesh(self, config: RunConfig, tags: Dict[str, BoundaryTag]) -> Mesh:
        if config.builtin_mesh:
            return builtin_mesh(config.mesh, tags, seed=config.seed)
        return load_mesh(Path(config.mesh), tags)

    def prepare(self, config: RunConfig) -> RunSetup:
        """Mesh, basis, physics, assembler and initial field for ``config``."""
        entry = self.catalog.get_case_by_name(config.case)
        if entry is None:
            raise ConfigError(f"Unknown case '{config.case}'", key='case')
        family = entry['family']
        tags = _default_tags(config)
        mesh = self.load_mesh(config, tags)
        basis = build_basis(mesh, config.degree)
        self._log(logging.INFO, f"Mesh {mesh.name}: {mesh.num_cells} cells, h_min={mesh.h_min:.4e}; "
                                f"k={config.degree} ({basis.count} modes per variable)")

        if family == SCALAR:
            if config.problem not in SCALAR_PROBLEMS:
                raise ConfigError(f"Unknown scalar problem '{config.problem}'", key='problem')
            problem = SCALAR_PROBLEMS[config.problem]()
            physics = ScalarDiffusionEquation(problem)
            if config.scheme == 'original':
                assembler = AntiderivativeAssembler(mesh, basis, problem, threads=config.threads)
            else:
                assembler = ResidualAssembler(mesh, basis, physics, threads=config.threads)
            field = SolutionField.project(mesh, basis, lambda x, y: problem.initial(x, y)[..., None], 1)
            problem.check_positive_definite(field.volume_values()[..., 0])
            exact_at = None
            if problem.exact is not None:
                exact_at = lambda t: (lambda x, y: problem.exact(x, y, t)[..., None])  # noqa: E731
            return RunSetup(config, mesh, basis, physics, assembler, field, exact_at=exact_at)

        gas = config.gas_model()
        freestream = config.freestream()
        physics = NavierStokesEquations(gas)
        source = None
        exact_at = None
        boundary = None
        if family == MMS:
            exact = EXACT_SOLUTIONS[entry['name']]()
            source = exact.source(gas)
            initial = exact.initial(gas)
            exact_at = lambda t: exact.at_time(t, gas)  # noqa: E731
        elif family == PULSE:
            initial = pressure_pulse(gas)
        else:
            boundary = BoundaryConditions(tags, gas, freestream, config.back_pressure)
            q_inf = freestream.conserved(gas)
            initial = lambda x, y: np.broadcast_to(q_inf, np.shape(x) + (4,))  # noqa: E731

        assembler = ResidualAssembler(mesh, basis, physics, boundary, source=source, threads=config.threads)
        assembler.set_logger(self.logger)
        field = SolutionField.project(mesh, basis, initial, 4)
        if family == CYLINDER_UNSTEADY:
            if config.initial:
                stored, _ = load_reference(Path(config.initial))
                field.coefficients = transfer_field(stored, mesh, basis)
                self._log(logging.INFO, f"Initial field from {config.initial}")
            else:
                self._log(logging.WARNING, "No stored steady field given; starting from freestream")
            field.coefficients = perturb_wake(
                field.coefficients, basis, config.perturbation * freestream.speed,
                center=(1.5 * config.diameter, 0.0), radius=config.diameter)
        return RunSetup(config, mesh, basis, physics, assembler, field, gas, freestream, exact_at)

    def _monitor(self, setup: RunSetup, family: str) -> Optional[Callable]:
        if family != CYLINDER_UNSTEADY:
            return None
        walls = [n for n, t in setup.mesh.tags.items() if t.kind == ADIABATIC_WALL]

        def record(step, field):
            cd, cl = aero_coefficients(field, walls, setup.gas, setup.freestream, setup.config.diameter)
            return {'step': step, 'time': field.time, 'cd': cd, 'cl': cl}
        return record

    def _postprocess(self, setup: RunSetup, family: str, field: SolutionField, history,
                     run_dir: Path) -> Dict[str, Any]:
        config = setup.config
        names = variable_names(setup.physics)
        metrics: Dict[str, Any] = {}
        artifacts: List[Path] = []

        if setup.exact_at is not None:
            norms = error_norms(field, setup.exact_at(field.time), names)
            metrics['norms'] = norms
        elif family == PULSE and config.reference:
            reference, _ = load_reference(Path(config.reference))
            metrics['norms'] = reference_field_error(field, reference, names)
        if 'norms' in metrics:
            artifacts.append(write_table(run_dir / 'norms.csv', ('variable', 'L2', 'Linf'),
                                         [(n, l2, li) for n, (l2, li) in metrics['norms'].items()]))

        walls = [n for n, t in setup.mesh.tags.items() if t.kind == ADIABATIC_WALL]
        if family in (PLATE, CYLINDER_STEADY, CYLINDER_UNSTEADY) and walls:
            wall = wall_quantities(field, walls, setup.gas, setup.freestream)
            artifacts.append(write_table(run_dir / 'wall.csv', ('x', 'y', 'tau_w', 'cf', 'cp'),
                                         zip(wall.xy[:, 0], wall.xy[:, 1], wall.tau_w, wall.cf, wall.cp)))
            if family == PLATE:
                order = np.argsort(wall.xy[:, 0])
                t_inf = setup.freestream.p / ((setup.gas.gamma - 1.0) * setup.gas.cv * setup.freestream.rho)
                mu_inf = float(setup.gas.dynamic_viscosity(t_inf))
                cf_half = float(np.interp(0.5, wall.xy[order, 0], wall.cf[order]))
                metrics['cf_x0.5'] = cf_half
                metrics['cf_blasius_x0.5'] = float(blasius_skin_friction(0.5, setup.freestream, mu_inf))
                outflow = [n for n, t in setup.mesh.tags.items() if t.kind == OUTFLOW]
                profile = exit_plane_profile(field, outflow, setup.gas, setup.freestream)
                metrics['profile_max_deviation'] = profile.max_deviation()
                artifacts.append(write_table(run_dir / 'profile.csv', ('y', 'eta', 'u', 'blasius'),
                                             zip(profile.y, profile.eta, profile.u, profile.blasius)))
            else:
                cd, cl = aero_coefficients(field, walls, setup.gas, setup.freestream, config.diameter)
                metrics['cd'] = cd
                metrics['cl'] = cl

        if family == CYLINDER_STEADY:
            try:
                metrics.update(wake_metrics(field, walls, setup.gas, setup.freestream,
                                            diameter=config.diameter).as_dict())
            except DiagnosticsError as e:
                self._log(logging.WARNING, f"Wake metrics unavailable: {e}")

        if family == CYLINDER_UNSTEADY and history.records:
            records = [ForceRecord(r['time'], r['cd'], r['cl']) for r in history.records]
            artifacts.append(write_table(run_dir / 'forces.csv', ('t', 'cd', 'cl'),
                                         [(r.time, r.cd, r.cl) for r in records]))
            times = np.array([r.time for r in records])
            cd = np.array([r.cd for r in records])
            cl = np.array([r.cl for r in records])
            try:
                metrics['cd_mean'], metrics['cd_amplitude'] = mean_and_amplitude(cd)
                metrics['cl_mean'], metrics['cl_amplitude'] = mean_and_amplitude(cl)
                metrics['strouhal'] = strouhal(times, cl, config.diameter, setup.freestream.speed)
            except DiagnosticsError as e:
                self._log(logging.WARNING, f"Shedding analysis unavailable: {e}")

        if family != SCALAR:
            for fmt in config.export:
                artifacts.append(export_field(field, run_dir / f"solution.{fmt}", fmt, setup.gas,
                                              setup.freestream, config.diameter))
            if config.save_reference:
                artifacts.append(save_reference(run_dir / 'solution.npz', field, config.case, setup.gas))
        return {'metrics': metrics, 'artifacts': artifacts}

    def run_case(self, config: RunConfig, output_dir: Optional[Path] = None) -> Dict[str, Any]:
        """
        Run one case and write its artifacts.

        Returns:
            Dictionary with success, message, run_dir, artifacts, metrics,
            steps and final time
        """
        result = {
            'success': False,
            'case': config.case,
            'message': '',
            'run_dir': None,
            'artifacts': [],
            'metrics': {},
            'steps': 0,
            'time': None,
        }
        run_dir = Path(output_dir or config.output_dir) / config.name
        try:
            run_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            result['message'] = f"Cannot create run directory {run_dir}: {e}"
            self._log(logging.ERROR, result['message'])
            return result
        result['run_dir'] = run_dir

        self._log(logging.INFO, f"RUN {config.name} ({config.case}, mode {config.mode})")
        artifacts: List[Path] = []
        setup = None
        try:
            setup = self.prepare(config)
            family = self.catalog.get_case_by_name(config.case)['family']
            integrator = TimeIntegrator(setup.assembler, config.time_config())
            integrator.set_logger(self.logger)
            field, history = integrator.run(setup.field, config.mode, self._monitor(setup, family))
            names = variable_names(setup.physics)
            artifacts.append(write_table(
                run_dir / 'history.csv', ('step', 't', 'dt') + tuple(f"res_{n}" for n in names),
                ([int(row[0])] + [float(x) for x in row[1:]] for row in history.as_array())))
            post = self._postprocess(setup, family, field, history, run_dir)
            artifacts.extend(post['artifacts'])
            result['metrics'] = post['metrics']
            result['steps'] = len(history.steps)
            result['time'] = field.time
            result['success'] = True
            result['message'] = f"{config.name}: {history.reason or 'done'} after {len(history.steps)} steps"
            self._log(logging.INFO, result['message'])
        except SolverBlowUpError as e:
            result['message'] = f"{config.name} failed: {e}"
            result['steps'] = e.step
            self._log(logging.ERROR, result['message'])
            if isinstance(e.last_good, SolutionField) and setup is not None and setup.gas is not None:
                artifacts.append(save_reference(run_dir / 'last_good.npz', e.last_good, config.case, setup.gas))
        except DDGICError as e:
            result['message'] = f"{config.name} failed: {e}"
            self._log(logging.ERROR, result['message'])

        artifacts.append(write_manifest(run_dir, config, artifacts, result))
        result['artifacts'] = artifacts
        return result

    def convergence_study(self, config: RunConfig, levels: Sequence[int], degrees: Sequence[int],
                          output_dir: Optional[Path] = None) -> Dict[str, Any]:
        """
        Error and order table over built-in square levels and polynomial degrees.

        Orders use the actual mesh-size ratio between consecutive levels.
        A failed run stops the study and the partial table is still written.
        """
        root = Path(output_dir or config.output_dir)
        study_dir = root / f"{config.case}_study"
        study_dir.mkdir(parents=True, exist_ok=True)
        result = {'success': True, 'message': '', 'rows': [], 'artifacts': [], 'run_dir': study_dir}
        names = None
        for k in degrees:
            errors: Dict[str, List] = {}
            sizes = []
            for level in levels:
                run = with_overrides(config, degree=k, mesh=f"square:{level}",
                                     run_name=f"{config.case}_k{k}_L{level}", export=())
                outcome = self.run_case(run, root)
                if not outcome['success'] or 'norms' not in outcome['metrics']:
                    result['success'] = False
                    result['message'] = (outcome['message'] if not outcome['success']
                                         else f"k={k} level {level} produced no error norms")
                    break
                norms = outcome['metrics']['norms']
                names = names or list(norms)
                sizes.append(BASE_SEGMENT / 2 ** level)
                for name, (l2, linf) in norms.items():
                    errors.setdefault(name, []).append((l2, linf))
                row = {'k': k, 'level': level, 'h': sizes[-1], 'norms': norms}
                result['rows'].append(row)
            for name, values in errors.items():
                l2_orders = observed_orders([v[0] for v in values], sizes)
                linf_orders = observed_orders([v[1] for v in values], sizes)
                for row, o2, oi in zip([r for r in result['rows'] if r['k'] == k], l2_orders, linf_orders):
                    row.setdefault('orders', {})[name] = (o2, oi)
            if not result['success']:
                break

        if names:
            result['artifacts'] = write_study_tables(study_dir, result['rows'], names)
        if result['success']:
            result['message'] = f"Study of {config.case}: {len(result['rows'])} runs"
        self._log(logging.INFO if result['success'] else logging.ERROR, result['message'])
        return result


def _fmt_order(value) -> str:
    return '-' if value is None else f"{value:.2f}"


def write_study_tables(study_dir: Path, rows: List[Dict], names: Sequence[str]) -> List[Path]:
    """study.csv with full precision and study.txt aligned for reading."""
    header = ['k', 'level', 'h']
    for name in names:
        header += [f"{name}_L2", f"{name}_L2_order", f"{name}_Linf", f"{name}_Linf_order"]
    table_rows = []
    text = ['  '.join(f"{h:>14}" for h in header)]
    for row in rows:
        values = [row['k'], row['level'], float(row['h'])]
        cells = [f"{row['k']:>14d}", f"{row['level']:>14d}", f"{row['h']:>14.4e}"]
        for name in names:
            l2, linf = row['norms'][name]
            o2, oi = row.get('orders', {}).get(name, (None, None))
            values += [l2, '' if o2 is None else o2, linf, '' if oi is None else oi]
            cells += [f"{l2:>14.3e}", f"{_fmt_order(o2):>14}", f"{linf:>14.3e}", f"{_fmt_order(oi):>14}"]
        table_rows.append(values)
        text.append('  '.join(cells))
    csv_path = write_table(study_dir / 'study.csv', header, table_rows)
    txt_path = study_dir / 'study.txt'
    txt_path.write_text('\n'.join(text) + '\n', encoding='utf-8')
    return [csv_path, txt_path]


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for block in iter(lambda: f.read(1 << 20), b''):
            digest.update(block)
    return digest.hexdigest()


def write_manifest(run_dir: Path, config: RunConfig, artifacts: Sequence[Path],
                   result: Dict[str, Any]) -> Path:
    """manifest.txt: status, versions, artifact checksums and the effective config."""
    lines = [
        f"run = {config.name}",
        f"status = {'success' if result['success'] else 'failed'}",
        f"message = {result['message']}",
        f"ddgic-ns = {__version__}",
        f"python = {platform.python_version()}",
        f"numpy = {np.__version__}",
        f"scipy = {scipy.__version__}",
        '',
        '# sha256 checksums',
    ]
    for path in artifacts:
        path = Path(path)
        if path.exists():
            lines.append(f"{_sha256(path)}  {path.name}")
    lines += ['', '# configuration', serialize_config(config)]
    manifest = run_dir / 'manifest.txt'
    manifest.write_text('\n'.join(lines), encoding='utf-8')
    return manifest


def run_case(config: RunConfig, output_dir: Optional[Path] = None, logger=None) -> Dict[str, Any]:
    runner = CaseRunner()
    if logger is not None:
        runner.set_logger(logger)
    return runner.run_case(config, output_dir)


def convergence_study(config: RunConfig, levels: Sequence[int], degrees: Sequence[int],
                      output_dir: Optional[Path] = None, logger=None) -> Dict[str, Any]:
    runner = CaseRunner()
    if logger is not None:
        runner.set_logger(logger)
    return runner.convergence_study(config, levels, degrees, output_dir)
