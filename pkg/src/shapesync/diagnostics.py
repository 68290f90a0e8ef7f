"""Observables and checks on ensemble states and sampled trajectories."""

from dataclasses import astuple, dataclass, fields

import numpy as np

from . import matso
from .ensemble import reconstruct_all
from .errors import ValidationError

FLOOR = 1e2 * np.finfo(float).eps


@dataclass(frozen=True)
class DiagnosticsRow:
    """One sample of the monitored quantities.

    For two-species ensembles diameters, residual and energy are evaluated
    per species; the row holds the maximum (energy: the sum).
    """

    t: float
    diam_centroid: float
    diam_rotation: float
    residual: float
    energy: float
    ortho_drift: float
    skew_drift: float
    rigidity_error: float

    @classmethod
    def columns(cls):
        return [f.name for f in fields(cls)]

    def values(self):
        return astuple(self)


def _pairwise_max(X):
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    if X.shape[0] < 2:
        return 0.0
    diff = X[:, None, :] - X[None, :, :]
    return float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))


def diameter_points(points):
    """Largest pairwise Euclidean distance."""
    return _pairwise_max(points)


def diameter_rotations(rotations):
    """Largest pairwise Frobenius distance."""
    return _pairwise_max(rotations)


def matching_residual(state):
    """``max_{alpha,i,j} |x_alpha^i - x_alpha^j|`` of a single-species ensemble."""
    if state.n_species != 1:
        raise ValidationError("matching residual needs a single-species ensemble")
    return _residual(state)


def _residual(state):
    x = reconstruct_all(state)
    if x.shape[0] < 2:
        return 0.0
    diff = x[:, None, :, :] - x[None, :, :, :]
    return float(np.max(np.linalg.norm(diff, axis=-1)))


def energy(state, p, first_order=False):
    """Kinetic plus coupling energy of the rotational subsystem.

    ``(m/N) sum_i |W_i O_i|_F^2 + (kappa / 2N^2) sum_{i,k} |O_i - O_k|_F^2``;
    ``|W O|_F = |W|_F`` for orthogonal ``O``, so ``W`` is used directly.
    ``first_order=True`` drops the kinetic part.
    """
    O, W = state.rotations, state.angular
    N = O.shape[0]
    kinetic = 0.0 if first_order else (p.m / N) * float(np.sum(W * W))
    diff = O[:, None] - O[None, :]
    potential = (p.kappa / (2 * N * N)) * float(np.sum(diff * diff))
    return kinetic + potential


def vertex_rigidity_error(vertices, shape, scales=None):
    """Rigidity defect of raw vertex arrays ``(N, n, d)`` against ``shape``."""
    x = np.asarray(vertices, dtype=float)
    r = shape.displacements
    s = np.ones(x.shape[0]) if scales is None else np.asarray(scales, dtype=float)
    ref = np.linalg.norm(r[:, None] - r[None, :], axis=-1)
    dist = np.linalg.norm(x[:, :, None] - x[:, None, :], axis=-1)
    return float(np.max(np.abs(dist - s[:, None, None] * ref)))


def rigidity_error(state):
    """Largest deviation of an intra-polytope distance from its scaled reference value."""
    return max(
        vertex_rigidity_error(reconstruct_all(state, k), shape, state.scales[state.species_slice(k)])
        for k, shape in enumerate(state.shapes)
    )


def diagnostics_row(t, state, p, model):
    parts = [state] if state.n_species == 1 else [state.subset(k) for k in range(state.n_species)]
    first_order = model == "order1"
    return DiagnosticsRow(
        t=float(t),
        diam_centroid=max(diameter_points(s.centroids) for s in parts),
        diam_rotation=max(diameter_rotations(s.rotations) for s in parts),
        residual=max(_residual(s) for s in parts),
        energy=sum(energy(s, p, first_order) for s in parts),
        ortho_drift=float(np.max(matso.orthogonality_defect(state.rotations))),
        skew_drift=float(np.max(matso.skew_defect(state.angular))),
        rigidity_error=rigidity_error(state),
    )


def fit_decay_rate(t, values, window=None):
    """Least-squares slope of ``log(values)`` against ``t``.

    ``window=(t0, t1)`` restricts the fit to ``t0 <= t <= t1``.

    Raises
    ------
    ValidationError
        With fewer than five points in the window, or values at or below
        ``FLOOR`` (shrink the window so it ends before round-off takes over).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        mask = (t >= window[0]) & (t <= window[1])
        t, y = t[mask], y[mask]
    if t.size < 5:
        raise ValidationError(f"need at least 5 samples to fit a rate, got {t.size}")
    if np.any(y <= FLOOR):
        raise ValidationError("values must stay above the round-off floor in the fit window; shrink the window")
    slope, _ = np.polyfit(t, np.log(y), 1)
    return float(slope)


def default_window(t_final):
    return (0.5 * t_final, 0.9 * t_final)


def local_maxima(t, values):
    """Interior strict local maxima of a sampled series as ``(times, values)``."""
    y = np.asarray(values, dtype=float)
    idx = np.flatnonzero((y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])) + 1
    return np.asarray(t, dtype=float)[idx], y[idx]


def predicted_rate_order2(p):
    """Exponent of the slowest centroid mode of ``m q'' + gamma q' + kappa q = 0``."""
    m, gamma, kappa = p.m, p.gamma, p.kappa
    if not (m > 0 and gamma > 0 and kappa > 0):
        raise ValidationError("m, gamma and kappa must all be positive")
    disc = gamma * gamma - 4 * m * kappa
    if disc >= 0:
        return (-gamma + np.sqrt(disc)) / (2 * m)
    return -gamma / (2 * m)


def predicted_rate_order1(p):
    """``-kappa / gamma``; first-order runs use gamma = 1."""
    if not p.kappa > 0:
        raise ValidationError("kappa must be positive")
    return -p.kappa


def lohe_diameter_bound(D0, kappa, t):
    """Upper bound ``D0 / ((1 - D0) e^{kappa t} + D0)`` on the first-order rotation diameter."""
    if not 0 <= D0 < 1:
        raise ValidationError(f"bound requires 0 <= D0 < 1, got {D0}")
    t = np.asarray(t, dtype=float)
    return D0 / ((1 - D0) * np.exp(kappa * t) + D0)
