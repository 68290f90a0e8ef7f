"""Fixed-step RK4 time stepping with per-step restoration of the SO(d) structure."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics, matso
from .dynamics import model_rhs
from .errors import IntegrationError, ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntegrationSettings:
    dt: float = 1e-3
    t_final: float = 12.0
    sample_every: float = 0.1
    project_every_step: bool = True
    drift_tolerance: float = 1e-8

    def __post_init__(self):
        if not (0 < self.dt <= self.sample_every <= self.t_final):
            raise ValidationError(
                f"need 0 < dt <= sample_every <= t_final, got dt={self.dt}, "
                f"sample_every={self.sample_every}, t_final={self.t_final}"
            )
        if not self.drift_tolerance > 0:
            raise ValidationError("drift_tolerance must be positive")

    @property
    def n_steps(self):
        return int(round(self.t_final / self.dt))

    @property
    def stride(self):
        return max(1, int(round(self.sample_every / self.dt)))


@dataclass
class Trajectory:
    """Sampled solution: parallel lists of times, states and diagnostics rows."""

    model: str
    params: object
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def append(self, t, state, row):
        if self.times and t <= self.times[-1]:
            raise ValueError("sample times must increase")
        self.times.append(t)
        self.states.append(state)
        self.rows.append(row)

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def state_at(self, t):
        """Sample whose time is closest to ``t``."""
        k = int(np.argmin(np.abs(np.asarray(self.times) - t)))
        return self.states[k]


def _advance(state, deriv, h):
    return state.replace(
        centroids=state.centroids + h * deriv.centroids,
        velocities=state.velocities + h * deriv.velocities,
        rotations=state.rotations + h * deriv.rotations,
        angular=state.angular + h * deriv.angular,
    )


def _combine(k1, k2, k3, k4, name):
    a, b, c, d = (getattr(k, name) for k in (k1, k2, k3, k4))
    return a + 2.0 * b + 2.0 * c + d


def _check_finite(deriv):
    for name in ("centroids", "velocities", "rotations", "angular"):
        if not np.all(np.isfinite(getattr(deriv, name))):
            raise IntegrationError(f"non-finite derivative in {name}")


def restore_structure(state):
    """Project rotations onto SO(d) and antisymmetrise the angular matrices."""
    return state.replace(
        rotations=matso.project_to_rotation(state.rotations),
        angular=matso.skew_part(state.angular),
    )


def step(state, rhs, dt, project=True):
    """One classical fourth-order Runge-Kutta step, optionally followed by projection."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    k1 = rhs(state)
    _check_finite(k1)
    k2 = rhs(_advance(state, k1, 0.5 * dt))
    k3 = rhs(_advance(state, k2, 0.5 * dt))
    k4 = rhs(_advance(state, k3, dt))
    h = dt / 6.0
    new = state.replace(
        **{
            name: getattr(state, name) + h * _combine(k1, k2, k3, k4, name)
            for name in ("centroids", "velocities", "rotations", "angular")
        }
    )
    for name in ("centroids", "velocities", "rotations", "angular"):
        if not np.all(np.isfinite(getattr(new, name))):
            raise IntegrationError(f"non-finite state in {name} after step")
    if project:
        try:
            new = restore_structure(new)
        except ValidationError as exc:
            raise IntegrationError(f"projection failed: {exc}") from exc
    return new


def integrate(initial, p, model, settings=None, rhs=None):
    """Integrate ``model`` from ``initial`` and sample diagnostics.

    Samples are taken every ``settings.sample_every`` (rounded to whole
    steps) and at the final time. With projection on, a sample whose
    orthogonality defect exceeds ``drift_tolerance`` aborts the run, since
    it means the step size is too large.

    Raises
    ------
    IntegrationError
        On non-finite values or excessive constraint drift.
    """
    settings = settings or IntegrationSettings()
    rhs = rhs or model_rhs(model, p)
    n_steps, stride = settings.n_steps, settings.stride
    traj = Trajectory(model, p)

    def record(k, state):
        t = k * settings.dt
        row = diagnostics.diagnostics_row(t, state, p, model)
        if settings.project_every_step and row.ortho_drift > settings.drift_tolerance:
            raise IntegrationError(
                f"orthogonality drift {row.ortho_drift:.3e} exceeds {settings.drift_tolerance:.1e} "
                f"at t={t:g}; reduce dt"
            )
        traj.append(t, state, row)

    state = initial
    record(0, state)
    log.debug("integrating %s: %d steps, dt=%g", model, n_steps, settings.dt)
    for k in range(1, n_steps + 1):
        state = step(state, rhs, settings.dt, project=settings.project_every_step)
        if k % stride == 0 or k == n_steps:
            record(k, state)
    return traj


def integrate_until(initial, p, model, t_final, dt, project=True):
    """Terminal state only, without diagnostics (used for convergence studies)."""
    rhs = model_rhs(model, p)
    n = int(round(t_final / dt))
    if not math.isclose(n * dt, t_final, rel_tol=1e-9):
        raise ValidationError("t_final must be a whole number of steps")
    state = initial
    for _ in range(n):
        state = step(state, rhs, dt, project=project)
    return state
