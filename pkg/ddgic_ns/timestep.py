"""
Explicit SSP-RK3 time integration with CFL-limited steps.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .ddgic import ResidualAssembler, SolutionField, residual_norm
from .errors import ConfigError, InadmissibleStateError, SolverBlowUpError

logger = logging.getLogger('ddgic-ns')

FINAL_TIME = 'final_time'
STEADY = 'steady'


@dataclass
class TimeConfig:
    """Step-size and stopping parameters."""

    cfl: float = 0.1
    final_time: Optional[float] = None
    steady_tol: Optional[float] = None
    max_steps: int = 10_000_000
    dt_safety: float = 0.9
    log_every: int = 100
    record_every: int = 1

    def __post_init__(self):
        if not self.cfl > 0.0:
            raise ConfigError(f"CFL number must be positive, got {self.cfl}", key='cfl')
        if not 0.0 < self.dt_safety <= 1.0:
            raise ConfigError(f"dt_safety must lie in (0, 1], got {self.dt_safety}", key='dt_safety')
        if self.final_time is not None and self.final_time < 0.0:
            raise ConfigError(f"final_time must be nonnegative, got {self.final_time}", key='final_time')
        if self.max_steps < 0:
            raise ConfigError(f"max_steps must be nonnegative, got {self.max_steps}", key='max_steps')


@dataclass
class RunHistory:
    """Per-step record of a time integration."""

    steps: List[int] = field(default_factory=list)
    times: List[float] = field(default_factory=list)
    dts: List[float] = field(default_factory=list)
    norms: List[np.ndarray] = field(default_factory=list)
    records: List[Dict] = field(default_factory=list)
    converged: bool = False
    reason: str = ''

    def as_array(self) -> np.ndarray:
        """Columns step, t, dt followed by one residual norm per variable."""
        if not self.steps:
            return np.zeros((0, 3))
        norms = np.array(self.norms)
        return np.column_stack([self.steps, self.times, self.dts, norms])


def compute_dt(field: SolutionField, physics, omega: float, cfl: float, dt_safety: float = 0.9) -> float:
    """
    Delta t = safety * omega * lambda / max_K max((a + |u|)_K / h, mu_K / h^2).

    ``h`` is the global minimum inscribed diameter and the per-cell maxima are
    taken over volume quadrature points.
    """
    h = field.mesh.h_min
    speed, diffusivity = physics.time_step_scales(field.volume_values())
    rate = max(float(np.max(speed.max(axis=1) / h)), float(np.max(diffusivity.max(axis=1) / h ** 2)))
    if rate <= 0.0:
        return math.inf
    return dt_safety * omega * cfl / rate


def ssp_rk3_step(u: np.ndarray, dt: float, operator: Callable[[np.ndarray, float], np.ndarray],
                 t: float = 0.0, rates: Optional[np.ndarray] = None) -> np.ndarray:
    """
    One Shu-Osher SSP-RK3 step.

    ``rates`` may carry operator(u, t) when the caller already has it. Stage
    failures re-raise InadmissibleStateError tagged with the stage index.
    """
    try:
        u1 = u + dt * (operator(u, t) if rates is None else rates)
    except InadmissibleStateError as e:
        raise e.with_stage(1) from e
    try:
        u2 = 0.75 * u + 0.25 * (u1 + dt * operator(u1, t + dt))
    except InadmissibleStateError as e:
        raise e.with_stage(2) from e
    try:
        return u / 3.0 + 2.0 / 3.0 * (u2 + dt * operator(u2, t + 0.5 * dt))
    except InadmissibleStateError as e:
        raise e.with_stage(3) from e


class TimeIntegrator:
    """Drives SSP-RK3 to a final time or to a steady state."""

    def __init__(self, assembler: ResidualAssembler, config: TimeConfig):
        self.assembler = assembler
        self.config = config
        self.logger = None
        self.omega = assembler.basis.rules.omega

    def set_logger(self, logger):
        """Set logger for this integrator."""
        self.logger = logger

    def _log(self, level, message):
        if self.logger:
            self.logger.log(level, message)

    def run(self, field: SolutionField, mode: str = FINAL_TIME,
            monitor: Optional[Callable[[int, SolutionField], Optional[Dict]]] = None):
        """
        Advance ``field`` and return (final field, RunHistory).

        Args:
            field: initial solution
            mode: 'final_time' stops exactly at config.final_time; 'steady' stops
                when every residual norm drops below config.steady_tol
            monitor: optional callback(step, field) whose returned dict is kept in
                the history every ``record_every`` steps
        """
        cfg = self.config
        if mode not in (FINAL_TIME, STEADY):
            raise ConfigError(f"Unknown time mode '{mode}'", key='mode')
        if mode == FINAL_TIME and cfg.final_time is None:
            raise ConfigError("final_time is required for a final-time run", key='final_time')
        if mode == STEADY and cfg.steady_tol is None:
            raise ConfigError("steady_tol is required for a steady run", key='steady_tol')

        physics = self.assembler.physics
        history = RunHistory()
        current = field.copy()
        u = current.coefficients
        t = current.time
        t_end = cfg.final_time if mode == FINAL_TIME else None
        step = 0

        if t_end is not None and t >= t_end:
            history.converged = True
            history.reason = 'final time reached'
            return current, history

        while step < cfg.max_steps:
            current.coefficients = u
            current.time = t
            dt = compute_dt(current, physics, self.omega, cfg.cfl, cfg.dt_safety)
            if t_end is not None:
                dt = min(dt, t_end - t)
            if not math.isfinite(dt):
                raise ConfigError("Time step is unbounded (no wave speed and no diffusion)")

            try:
                rates = self.assembler(u, t)
            except InadmissibleStateError as e:
                raise SolverBlowUpError(str(e.with_stage(1)), step + 1, current.copy()) from e
            norms = residual_norm(rates)
            if mode == STEADY and np.all(norms < cfg.steady_tol):
                history.converged = True
                history.reason = f"residual below {cfg.steady_tol:g}"
                break

            last_good = current.copy()
            try:
                u_new = ssp_rk3_step(u, dt, self.assembler, t, rates)
            except InadmissibleStateError as e:
                self._log(logging.ERROR, f"Step {step + 1} failed: {e}")
                raise SolverBlowUpError(str(e), step + 1, last_good) from e
            if not np.all(np.isfinite(u_new)):
                raise SolverBlowUpError("Non-finite coefficients", step + 1, last_good)

            step += 1
            t = t_end if t_end is not None and t_end - (t + dt) <= 1e-14 * max(1.0, t_end) else t + dt
            u = u_new
            history.steps.append(step)
            history.times.append(t)
            history.dts.append(dt)
            history.norms.append(norms)

            if monitor is not None and step % cfg.record_every == 0:
                current.coefficients = u
                current.time = t
                record = monitor(step, current)
                if record is not None:
                    history.records.append(record)
            if cfg.log_every and step % cfg.log_every == 0:
                self._log(logging.INFO, f"step {step:7d}  t={t:.6e}  dt={dt:.3e}  residual="
                          + ' '.join(f"{x:.3e}" for x in norms))
            if t_end is not None and t >= t_end:
                history.converged = True
                history.reason = 'final time reached'
                break
        else:
            history.reason = f"max_steps {cfg.max_steps} reached"

        try:
            self.assembler.check(u)
        except InadmissibleStateError as e:
            raise SolverBlowUpError(str(e), step, None) from e
        current.coefficients = u
        current.time = t
        self._log(logging.INFO, f"Stopped after {step} steps at t={t:.6e}: {history.reason}")
        return current, history
