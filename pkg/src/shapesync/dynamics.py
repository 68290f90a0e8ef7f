"""Right-hand sides of the centroid-consensus and Lohe rotation models.

The second-order rotation equation

    m (O'' O^T + O' O'^T) = -gamma O' O^T + coupling

is evolved as the first-order pair ``(O, W)`` with ``W = O' O^T``. Along
solutions with ``O O^T = I`` the left-hand side equals ``m dW/dt``, so

    dO/dt = W O,    dW/dt = (-gamma W + coupling) / m.

All evaluators work on whole :class:`~shapesync.ensemble.EnsembleState`
stacks and return a :class:`StateDerivative`.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CoincidentCentroidsWarning, ValidationError

MODELS = ("order2", "order1", "similar", "hetero")
SEPARATION_EPS = 1e-9


@dataclass(frozen=True)
class ModelParams:
    """Model coefficients.

    For the two-species model ``kappa`` is the within-species coupling and
    ``kappa2`` the strength of the inter-species spring of rest length ``L``.
    First-order models ignore ``m`` and ``gamma``.
    """

    m: float = 1.0
    gamma: float = 1.0
    kappa: float = 1.0
    kappa2: float = 0.0
    L: float = None

    def __post_init__(self):
        for name in ("m", "gamma", "kappa", "kappa2"):
            val = getattr(self, name)
            if not np.isfinite(val) or val < 0:
                raise ValidationError(f"{name} must be a nonnegative number, got {val}")
        if self.L is not None and not self.L > 0:
            raise ValidationError(f"L must be positive, got {self.L}")

    def require_inertia(self):
        if not self.m > 0:
            raise ValidationError("second-order models need m > 0; use the first-order model for m = 0")


@dataclass(frozen=True)
class StateDerivative:
    centroids: np.ndarray
    velocities: np.ndarray
    rotations: np.ndarray
    angular: np.ndarray


def _T(M):
    return np.swapaxes(M, -1, -2)


def consensus_force(x, kappa):
    """``(kappa / N) * sum_k (x_k - x_i)`` for every row ``i``."""
    N = x.shape[0]
    return (kappa / N) * (x.sum(axis=0) - N * x)


def coupling_terms(rotations, kappa, weights=None):
    """Lohe coupling for every agent at once.

    Agent ``i`` receives ``(kappa / 2N) sum_k w_ik (O_k O_i^T - O_i O_k^T)``.
    ``weights`` is ``None`` (all ones) or an ``(N, N)`` array ``w[i, k]``.
    The sum is formed first and antisymmetrised afterwards, so every output
    is exactly skew.
    """
    O = np.asarray(rotations, dtype=float)
    N = O.shape[0]
    if weights is None:
        S = O.sum(axis=0)
    else:
        S = np.einsum("ik,kab->iab", np.asarray(weights, dtype=float), O)
    M = S @ _T(O)
    return (kappa / (2 * N)) * (M - _T(M))


def coupling_term(i, rotations, weights, kappa, N=None):
    """Lohe coupling acting on agent ``i``.

    ``weights`` lists one positive factor per partner ``k`` (use ones for
    congruent ensembles, ``s_k / s_i`` for similar ones).
    """
    O = np.asarray(rotations, dtype=float)
    N = O.shape[0] if N is None else N
    w = np.ones(O.shape[0]) if weights is None else np.asarray(weights, dtype=float)
    S = np.einsum("k,kab->ab", w, O)
    M = S @ O[i].T
    return (kappa / (2 * N)) * (M - M.T)


def similarity_weights(scales):
    """``w[i, k] = s_k / s_i``."""
    s = np.asarray(scales, dtype=float)
    if np.any(s <= 0):
        raise ValidationError("scales must be positive")
    return s[None, :] / s[:, None]


def rhs_centroid_order2(state, p):
    """Returns ``(d centroid, d velocity)``."""
    p.require_inertia()
    v = state.velocities
    acc = (-p.gamma * v + consensus_force(state.centroids, p.kappa)) / p.m
    return v.copy(), acc


def rhs_centroid_order1(state, p):
    """Returns ``d centroid`` for the first-order (m = 0, gamma = 1) model."""
    return consensus_force(state.centroids, p.kappa)


def rhs_lohe_order2(state, p, weights=None):
    """Returns ``(d rotation, d angular)``."""
    p.require_inertia()
    O, W = state.rotations, state.angular
    dO = W @ O
    dW = (-p.gamma * W + coupling_terms(O, p.kappa, weights)) / p.m
    return dO, dW


def rhs_lohe_order1(state, p, weights=None):
    O = state.rotations
    return coupling_terms(O, p.kappa, weights) @ O


def _zeros_like(state):
    return np.zeros_like(state.velocities), np.zeros_like(state.angular)


def rhs_order2(state, p):
    dx, dv = rhs_centroid_order2(state, p)
    dO, dW = rhs_lohe_order2(state, p)
    return StateDerivative(dx, dv, dO, dW)


def rhs_order1(state, p):
    dv, dW = _zeros_like(state)
    return StateDerivative(rhs_centroid_order1(state, p), dv, rhs_lohe_order1(state, p), dW)


def rhs_similar(state, p):
    """Similar polytopes: rotation coupling weighted by ``s_k / s_i``."""
    weights = similarity_weights(state.scales)
    dx, dv = rhs_centroid_order2(state, p)
    dO, dW = rhs_lohe_order2(state, p, weights)
    return StateDerivative(dx, dv, dO, dW)


def hetero_force(x, y, kappa2, L):
    """Spring force on ``x`` exerted by ``y``: ``kappa2 (|y-x| - L) (y-x)/|y-x|``.

    Attractive beyond the rest length, repulsive inside it. For coincident
    points (separation below 1e-9) the direction is undefined; a zero vector
    is returned and a :class:`CoincidentCentroidsWarning` is issued.
    """
    diff = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
    dist = np.linalg.norm(diff)
    if dist <= SEPARATION_EPS:
        warnings.warn("coincident centroids of different species", CoincidentCentroidsWarning, stacklevel=2)
        return np.zeros_like(diff)
    return kappa2 * (dist - L) * diff / dist


def _cross_forces(x, y, kappa2, L):
    # mean spring force on each row of x from all rows of y
    diff = y[None, :, :] - x[:, None, :]
    dist = np.linalg.norm(diff, axis=-1)
    close = dist <= SEPARATION_EPS
    if np.any(close):
        warnings.warn("coincident centroids of different species", CoincidentCentroidsWarning, stacklevel=3)
    safe = np.where(close, 1.0, dist)
    mag = np.where(close, 0.0, (dist - L) / safe)
    return (kappa2 / y.shape[0]) * np.einsum("ij,ijk->ik", mag, diff)


def rhs_hetero(state, p):
    """Two species coupled through a pairwise spring between centroids.

    Within each species the centroids and rotations follow the second-order
    model with coupling ``p.kappa``; the species only interact through the
    centroid spring. With ``kappa2 == 0`` the result is exactly the
    juxtaposition of two independent second-order right-hand sides.
    """
    p.require_inertia()
    if state.n_species != 2:
        raise ValidationError(f"heterogeneous model needs exactly two species, got {state.n_species}")
    parts = [rhs_order2(state.subset(k), p) for k in range(2)]
    dv = [part.velocities for part in parts]
    if p.kappa2 != 0:
        if p.L is None:
            raise ValidationError("heterogeneous model needs the rest length L")
        x = state.centroids[state.species_slice(0)]
        y = state.centroids[state.species_slice(1)]
        dv[0] = dv[0] + _cross_forces(x, y, p.kappa2, p.L) / p.m
        dv[1] = dv[1] + _cross_forces(y, x, p.kappa2, p.L) / p.m
    return StateDerivative(
        np.concatenate([part.centroids for part in parts]),
        np.concatenate(dv),
        np.concatenate([part.rotations for part in parts]),
        np.concatenate([part.angular for part in parts]),
    )


_RHS = {"order2": rhs_order2, "order1": rhs_order1, "similar": rhs_similar, "hetero": rhs_hetero}


def is_second_order(model):
    return model != "order1"


def model_rhs(model, p):
    """Bind parameters to the evaluator of ``model`` (one of :data:`MODELS`)."""
    try:
        f = _RHS[model]
    except KeyError:
        raise ValidationError(f"unknown model {model!r}; expected one of {MODELS}") from None
    if is_second_order(model):
        p.require_inertia()
    return lambda state: f(state, p)
