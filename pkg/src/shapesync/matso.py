"""Dense square-matrix kernel with SO(d) helpers.

Matrices are plain ``numpy`` arrays. Most functions accept either a single
``(d, d)`` matrix or a stack ``(..., d, d)`` and operate on the trailing two
axes, which is how the dynamics code evaluates all agents at once.
"""

import numpy as np

from .errors import ValidationError

ORTHO_TOL = 1e-9
SKEW_TOL = 1e-12
RANK_TOL = 1e-12


def _as_square(M, name="M"):
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValidationError(f"{name} must be square, got shape {M.shape}")
    return M


def _transpose(M):
    return np.swapaxes(M, -1, -2)


def skew_part(M):
    """Return the antisymmetric part ``(M - M^T) / 2``."""
    M = _as_square(M)
    return 0.5 * (M - _transpose(M))


def sym_part(M):
    """Return the symmetric part ``(M + M^T) / 2``."""
    M = _as_square(M)
    return 0.5 * (M + _transpose(M))


def frobenius_norm(M):
    M = np.asarray(M, dtype=float)
    return np.sqrt(np.sum(M * M, axis=(-2, -1)))


def frobenius_distance(A, B):
    """Frobenius distance ``||A - B||_F``.

    Raises
    ------
    ValidationError
        If the two operands do not have the same shape.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ValidationError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return frobenius_norm(A - B)


def orthogonality_defect(O):
    """``||O O^T - I||_F`` for a matrix or a stack of matrices."""
    O = _as_square(O, "O")
    d = O.shape[-1]
    return frobenius_norm(O @ _transpose(O) - np.eye(d))


def skew_defect(W):
    """``||W + W^T||_F`` for a matrix or a stack of matrices."""
    W = _as_square(W, "W")
    return frobenius_norm(W + _transpose(W))


def is_rotation(O, tol=ORTHO_TOL):
    O = np.asarray(O, dtype=float)
    if O.ndim != 2 or O.shape[0] != O.shape[1] or not np.all(np.isfinite(O)):
        return False
    return bool(orthogonality_defect(O) <= tol and abs(np.linalg.det(O) - 1.0) <= 1e2 * tol)


def is_skew(W, tol=SKEW_TOL):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or not np.all(np.isfinite(W)):
        return False
    return bool(skew_defect(W) <= tol * max(1.0, frobenius_norm(W)))


def project_to_rotation(M):
    """Frobenius-nearest special orthogonal matrix.

    With ``M = U S V^T`` the result is ``U diag(1, ..., 1, det(U V^T)) V^T``.
    Works on stacks as well.

    Raises
    ------
    ValidationError
        If any input has smallest singular value below ``1e-12`` times its
        largest one.
    """
    M = _as_square(M)
    U, S, Vt = np.linalg.svd(M)
    if np.any(S[..., -1] <= RANK_TOL * S[..., 0]):
        raise ValidationError("matrix is rank deficient; cannot project onto SO(d)")
    sign = np.sign(np.linalg.det(U @ Vt))
    U = U.copy()
    U[..., :, -1] *= sign[..., None]
    return U @ Vt


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def random_rotation(seed, d):
    """Haar-distributed rotation in SO(d).

    ``seed`` may be an integer or a ``numpy.random.Generator``; integer seeds
    give deterministic output. A Gaussian matrix is orthonormalised by QR,
    the signs of R's diagonal are folded into Q, and one column is flipped
    if the determinant comes out negative.
    """
    if d < 1:
        raise ValidationError(f"dimension must be positive, got {d}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    G = rng.standard_normal((d, d))
    Q, R = np.linalg.qr(G)
    Q = Q * np.where(np.diag(R) < 0, -1.0, 1.0)
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_skew(rng, d, scale=1.0):
    """Skew matrix with independent ``N(0, scale^2)`` entries above the diagonal."""
    G = rng.standard_normal((d, d))
    return scale * (G - G.T) / np.sqrt(2.0)
