"""Polytope ensembles as centroids plus rotations of a shared reference shape.

A polytope is a labelled vertex set ``x_alpha``. Every congruent copy can be
written ``x_alpha = c + s * O @ r_alpha`` with centroid ``c``, rotation
``O`` in SO(d), scale ``s`` and zero-mean reference displacements
``r_alpha``. The classes here hold that decomposition; the functions convert
between it and raw vertex clouds.
"""

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from . import matso
from .errors import DegenerateShapeWarning, ValidationError

CONGRUENCE_TOL = 1e-8
_STATE_ARRAYS = ("centroids", "velocities", "rotations", "angular")
GENERAL_POSITION_TOL = 1e-10


@dataclass(frozen=True)
class ReferenceShape:
    """Zero-mean displacement vectors, one row per vertex label."""

    displacements: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        r = np.array(self.displacements, dtype=float)
        if r.ndim != 2 or r.shape[0] < 1:
            raise ValidationError(f"displacements must be an (n, d) array, got shape {r.shape}")
        scale = max(1.0, float(np.max(np.linalg.norm(r, axis=1))))
        if np.linalg.norm(r.sum(axis=0)) > 1e-12 * scale * r.shape[0]:
            raise ValidationError("reference displacements must sum to zero")
        r.setflags(write=False)
        object.__setattr__(self, "displacements", r)
        labels = tuple(range(r.shape[0])) if self.labels is None else tuple(self.labels)
        if len(labels) != r.shape[0]:
            raise ValidationError("one label per displacement required")
        object.__setattr__(self, "labels", labels)

    @property
    def n_vertices(self):
        return self.displacements.shape[0]

    @property
    def dim(self):
        return self.displacements.shape[1]

    @property
    def radius(self):
        """Largest displacement norm."""
        return float(np.max(np.linalg.norm(self.displacements, axis=1)))

    @classmethod
    def from_vertices(cls, vertices, labels=None):
        """Center a vertex list on its centroid and use the result as reference."""
        x = np.asarray(vertices, dtype=float)
        return cls(x - x.mean(axis=0), labels)


@dataclass(frozen=True)
class VertexCloud:
    vertices: np.ndarray
    labels: tuple = None

    def __post_init__(self):
        x = np.array(self.vertices, dtype=float)
        if x.ndim != 2:
            raise ValidationError(f"vertices must be an (n, d) array, got shape {x.shape}")
        x.setflags(write=False)
        object.__setattr__(self, "vertices", x)
        labels = tuple(range(x.shape[0])) if self.labels is None else tuple(self.labels)
        if len(labels) != x.shape[0]:
            raise ValidationError("one label per vertex required")
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class AgentState:
    """Translational and rotational state of one polytope.

    ``angular`` is the skew matrix ``W = dO/dt O^T``; first-order models keep
    it (and ``centroid_velocity``) at zero.
    """

    centroid: np.ndarray
    centroid_velocity: np.ndarray
    rotation: np.ndarray
    angular: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        c = np.asarray(self.centroid, dtype=float)
        d = c.shape[0]
        v = np.asarray(self.centroid_velocity, dtype=float)
        O = np.asarray(self.rotation, dtype=float)
        W = np.asarray(self.angular, dtype=float)
        if v.shape != (d,) or O.shape != (d, d) or W.shape != (d, d):
            raise ValidationError("agent state components have inconsistent dimensions")
        if not matso.is_rotation(O):
            raise ValidationError("rotation is not in SO(d)")
        if not matso.is_skew(W, tol=1e-10):
            raise ValidationError("angular matrix is not skew-symmetric")
        if not self.scale > 0:
            raise ValidationError(f"scale must be positive, got {self.scale}")
        for name, val in (("centroid", c), ("centroid_velocity", v), ("rotation", O), ("angular", W)):
            object.__setattr__(self, name, val)


@dataclass(frozen=True)
class EnsembleState:
    """Stacked state of ``N`` agents.

    Arrays are ``centroids (N, d)``, ``velocities (N, d)``,
    ``rotations (N, d, d)``, ``angular (N, d, d)``, ``scales (N,)`` and
    ``species (N,)``; ``shapes[k]`` is the reference shape of species ``k``.
    Agents of one species are stored contiguously.
    """

    centroids: np.ndarray
    velocities: np.ndarray
    rotations: np.ndarray
    angular: np.ndarray
    shapes: tuple
    scales: np.ndarray = None
    species: np.ndarray = None

    def __post_init__(self):
        x = np.asarray(self.centroids, dtype=float)
        if x.ndim != 2 or x.shape[0] < 1:
            raise ValidationError("need at least one agent")
        N, d = x.shape
        shapes = self.shapes
        if isinstance(shapes, ReferenceShape):
            shapes = (shapes,)
        shapes = tuple(shapes)
        scales = np.ones(N) if self.scales is None else np.asarray(self.scales, dtype=float)
        species = np.zeros(N, dtype=int) if self.species is None else np.asarray(self.species, dtype=int)
        arrays = {
            "centroids": x,
            "velocities": np.asarray(self.velocities, dtype=float),
            "rotations": np.asarray(self.rotations, dtype=float),
            "angular": np.asarray(self.angular, dtype=float),
            "scales": scales,
            "species": species,
        }
        expected = {
            "velocities": (N, d),
            "rotations": (N, d, d),
            "angular": (N, d, d),
            "scales": (N,),
            "species": (N,),
        }
        for name, shape in expected.items():
            if arrays[name].shape != shape:
                raise ValidationError(f"{name} has shape {arrays[name].shape}, expected {shape}")
        if np.any(scales <= 0):
            raise ValidationError("scales must be positive")
        if np.any(np.diff(species) < 0) or species[0] != 0 or np.any(np.diff(species) > 1):
            raise ValidationError("species ids must be contiguous blocks 0, 1, ...")
        if species[-1] + 1 != len(shapes):
            raise ValidationError("one reference shape per species required")
        for s in shapes:
            if s.dim != d:
                raise ValidationError(f"shape dimension {s.dim} does not match agent dimension {d}")
        for name, arr in arrays.items():
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "shapes", shapes)

    @property
    def n_agents(self):
        return self.centroids.shape[0]

    @property
    def dim(self):
        return self.centroids.shape[1]

    @property
    def n_species(self):
        return len(self.shapes)

    @property
    def shape(self):
        """Reference shape of a single-species ensemble."""
        if self.n_species != 1:
            raise ValidationError("ensemble has more than one species")
        return self.shapes[0]

    @property
    def agents(self):
        return [self.agent(i) for i in range(self.n_agents)]

    def agent(self, i):
        return AgentState(
            self.centroids[i], self.velocities[i], self.rotations[i], self.angular[i], float(self.scales[i])
        )

    def species_slice(self, k):
        idx = np.flatnonzero(self.species == k)
        return slice(int(idx[0]), int(idx[-1]) + 1)

    def subset(self, k):
        """Single-species ensemble holding the agents of species ``k``."""
        if self.n_species == 1:
            return self
        sl = self.species_slice(k)
        return EnsembleState(
            self.centroids[sl],
            self.velocities[sl],
            self.rotations[sl],
            self.angular[sl],
            (self.shapes[k],),
            self.scales[sl],
        )

    def replace(self, **changes):
        """Copy with some arrays swapped out.

        Only shape-preserving updates of the state arrays are allowed, so the
        constructor checks are skipped; the time stepper calls this on every
        stage.
        """
        new = object.__new__(type(self))
        for f in dataclasses.fields(self):
            object.__setattr__(new, f.name, getattr(self, f.name))
        for name, arr in changes.items():
            if name not in _STATE_ARRAYS:
                raise ValidationError(f"cannot replace {name!r}")
            arr = np.asarray(arr, dtype=float)
            if arr.shape != getattr(self, name).shape:
                raise ValidationError(f"{name} must keep shape {getattr(self, name).shape}")
            arr.flags.writeable = False
            object.__setattr__(new, name, arr)
        return new

    @classmethod
    def from_agents(cls, agents, shape):
        return cls(
            np.array([a.centroid for a in agents]),
            np.array([a.centroid_velocity for a in agents]),
            np.array([a.rotation for a in agents]),
            np.array([a.angular for a in agents]),
            (shape,),
            np.array([a.scale for a in agents]),
        )

    @classmethod
    def concatenate(cls, parts):
        """Stack single-species ensembles into one multi-species ensemble."""
        return cls(
            np.concatenate([p.centroids for p in parts]),
            np.concatenate([p.velocities for p in parts]),
            np.concatenate([p.rotations for p in parts]),
            np.concatenate([p.angular for p in parts]),
            tuple(p.shape for p in parts),
            np.concatenate([p.scales for p in parts]),
            np.concatenate([np.full(p.n_agents, k) for k, p in enumerate(parts)]),
        )


def centroid(cloud):
    """Arithmetic mean of the vertices."""
    x = cloud.vertices if isinstance(cloud, VertexCloud) else np.asarray(cloud, dtype=float)
    if x.shape[0] == 0:
        raise ValidationError("empty vertex cloud")
    return x.mean(axis=0)


def _distance_matrix(x):
    diff = x[:, None, :] - x[None, :, :]
    return np.linalg.norm(diff, axis=-1)


def check_congruence(clouds, tol=CONGRUENCE_TOL):
    """True iff all clouds have the same pairwise-distance matrix within ``tol``."""
    clouds = list(clouds)
    if not clouds:
        return True
    ref = clouds[0]
    D0 = _distance_matrix(ref.vertices)
    for c in clouds[1:]:
        if c.labels != ref.labels:
            raise ValidationError("vertex labels differ between clouds")
        if c.vertices.shape != ref.vertices.shape:
            return False
        if np.max(np.abs(_distance_matrix(c.vertices) - D0)) > tol:
            return False
    return True


def _procrustes_rotation(r, y):
    # argmin_{O in SO(d)} sum ||O r_a - y_a||^2 ; rows of r and y are vectors
    H = y.T @ r
    U, _, Vt = np.linalg.svd(H)
    det = np.linalg.det(U @ Vt)
    D = np.ones(r.shape[1])
    D[-1] = np.sign(det) if det != 0 else 1.0
    return (U * D) @ Vt, det


def extract_reference(clouds, tol=CONGRUENCE_TOL):
    """Decompose congruent vertex clouds into a reference shape and rigid motions.

    The first cloud defines the reference (its rotation is the identity).
    For every other cloud the best rotation is found by orthogonal
    Procrustes restricted to det +1.

    Returns
    -------
    shape : ReferenceShape
    rotations : list of (d, d) arrays
    centroids : list of (d,) arrays

    Raises
    ------
    ValidationError
        If a cloud cannot be fitted within ``tol`` (maximum vertex error),
        naming its index; mirror images are reported as not reachable by a
        rotation.
    """
    clouds = list(clouds)
    if not clouds:
        raise ValidationError("no clouds given")
    ref = clouds[0]
    c0 = centroid(ref)
    shape = ReferenceShape(ref.vertices - c0, ref.labels)
    r = shape.displacements
    rotations, centroids = [np.eye(shape.dim)], [c0]
    for i, cloud in enumerate(clouds[1:], start=1):
        if cloud.labels != ref.labels or cloud.vertices.shape != ref.vertices.shape:
            raise ValidationError(f"cloud {i} does not match the labels of cloud 0")
        ci = centroid(cloud)
        y = cloud.vertices - ci
        O, det = _procrustes_rotation(r, y)
        residual = float(np.max(np.linalg.norm(r @ O.T - y, axis=1)))
        if residual > tol:
            if det < 0:
                # unconstrained optimum is a reflection; see whether it would have fit
                U, _, Vt = np.linalg.svd(y.T @ r)
                refl = float(np.max(np.linalg.norm(r @ (U @ Vt).T - y, axis=1)))
                if refl <= tol:
                    raise ValidationError(f"cloud {i} is a mirror image: not reachable by rotation")
            raise ValidationError(f"cloud {i} is not congruent to cloud 0 (fit residual {residual:.3e})")
        rotations.append(O)
        centroids.append(ci)
    return shape, rotations, centroids


def reconstruct(agent, shape):
    """Vertex cloud ``centroid + scale * O r_alpha`` of one agent."""
    if agent.centroid.shape[0] != shape.dim:
        raise ValidationError(f"agent dimension {agent.centroid.shape[0]} != shape dimension {shape.dim}")
    x = agent.centroid + agent.scale * shape.displacements @ agent.rotation.T
    return VertexCloud(x, shape.labels)


def reconstruct_all(state, species=0):
    """Vertices of every agent of one species as an ``(N_s, n, d)`` array."""
    sl = state.species_slice(species)
    r = state.shapes[species].displacements
    O = state.rotations[sl]
    s = state.scales[sl]
    return state.centroids[sl][:, None, :] + s[:, None, None] * np.einsum("nj,ikj->ink", r, O)


def general_position_check(shape):
    """True iff the displacements span R^d."""
    r = shape.displacements if isinstance(shape, ReferenceShape) else np.asarray(shape, dtype=float)
    d = r.shape[1]
    if r.shape[0] < d:
        return False
    sv = np.linalg.svd(r, compute_uv=False)
    if sv[0] == 0:
        return False
    return bool(sv[d - 1] > GENERAL_POSITION_TOL * sv[0])


def warn_if_degenerate(shape):
    if not general_position_check(shape):
        warnings.warn(
            f"reference shape with {shape.n_vertices} vertices does not span R^{shape.dim}; "
            "simulating anyway",
            DegenerateShapeWarning,
            stacklevel=2,
        )
        return True
    return False


def regular_polygon(n_vertices, circumradius=1.0, d=2):
    """Regular polygon in the first coordinate plane of R^d."""
    if n_vertices < 2:
        raise ValidationError("a polygon needs at least two vertices")
    if d < 2:
        raise ValidationError("a polygon needs d >= 2")
    ang = 2 * np.pi * np.arange(n_vertices) / n_vertices
    x = np.zeros((n_vertices, d))
    x[:, 0] = circumradius * np.cos(ang)
    x[:, 1] = circumradius * np.sin(ang)
    return ReferenceShape.from_vertices(x)


def regular_simplex(d, circumradius=1.0):
    """Regular d-simplex (d + 1 vertices) centred at the origin."""
    if d < 1:
        raise ValidationError("simplex dimension must be positive")
    # Helmert basis of the sum-zero hyperplane of R^{d+1}
    E = np.eye(d + 1) - 1.0 / (d + 1)
    basis = np.zeros((d + 1, d))
    for k in range(1, d + 1):
        v = np.zeros(d + 1)
        v[:k] = 1.0
        v[k] = -k
        basis[:, k - 1] = v / np.linalg.norm(v)
    x = E @ basis
    x *= circumradius / np.linalg.norm(x[0])
    return ReferenceShape.from_vertices(x)
