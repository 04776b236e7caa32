# lib/linalg_core.py
"""Dense complex linear algebra kernel shared by every other module.

Matrices are plain numpy arrays of dtype complex128. `as_cmatrix` is the single entry
point that validates and freezes them; everything downstream assumes its output.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from config import DEFAULT_TOL
from lib.errors import DimensionError, ValidationError


def as_cmatrix(a, field=None):
    """
    Converts input to an immutable complex matrix.

    Args:
        a: Anything numpy can turn into a 2-d array (nested lists, arrays, scalars are rejected).
        field (str, optional): Input path used in error messages.

    Returns:
        numpy.ndarray: A read-only complex128 copy of `a`.

    Raises:
        ValidationError: If `a` is not 2-d or contains NaN/Inf.
    """
    arr = np.array(a, dtype=np.complex128)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-d matrix, got shape {arr.shape}", field)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix has non-finite entries", field)
    arr.setflags(write=False)
    return arr


def require_square(a, field=None):
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}", field)
    return a


def dagger(a):
    return a.conj().T


def commutator(a, b):
    return a @ b - b @ a


def frobenius(a):
    return float(np.linalg.norm(a))


def freeze(a):
    """Marks an array computed internally as read-only and returns it."""
    a = np.asarray(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


def mat_exp(a, scale=1.0):
    """
    Matrix exponential exp(scale * a).

    Uses scipy's scaling-and-squaring Padé algorithm, which stays accurate for
    non-normal inputs where an eigendecomposition would not.

    Args:
        a (numpy.ndarray): Square complex matrix.
        scale (float): Real multiplier applied before exponentiating.

    Returns:
        numpy.ndarray: exp(scale * a), read-only.
    """
    a = require_square(as_cmatrix(a))
    if not np.isfinite(scale):
        raise ValidationError(f"scale must be finite, got {scale}")
    return freeze(scipy.linalg.expm(scale * a))


def eig_hermitian(a, tol=DEFAULT_TOL):
    """
    Eigendecomposition of a hermitian matrix.

    Args:
        a (numpy.ndarray): Hermitian matrix (within `tol` relative to its norm).
        tol (float): Hermiticity tolerance.

    Returns:
        tuple: (eigenvalues ascending as float array, unitary matrix of eigenvectors as columns).
    """
    a = require_square(as_cmatrix(a))
    defect = frobenius(a - dagger(a))
    if defect > tol * max(1.0, frobenius(a)):
        raise ValidationError(f"matrix is not hermitian (defect {defect:.3e})")
    # Symmetrize so eigh sees an exactly hermitian input
    w, v = np.linalg.eigh((a + dagger(a)) / 2)
    return w, freeze(v)


def numeric_rank(a, tol=DEFAULT_TOL):
    """Number of singular values above tol times the largest one. rank(0) = 0."""
    if tol <= 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    a = as_cmatrix(a)
    if a.size == 0:
        return 0
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


def make_rng(seed):
    """Seeded PCG64 generator; negative seeds are folded into the unsigned 64-bit range."""
    return np.random.default_rng(int(seed) % (1 << 64))


def haar_unitary(dim, seed):
    """
    Haar-distributed random unitary, deterministic in (dim, seed).

    Samples a complex Ginibre matrix, takes its QR factorization and moves the phases
    of R's diagonal into Q so the result is Haar distributed.
    """
    if dim < 1:
        raise ValidationError(f"dimension must be at least 1, got {dim}")
    rng = make_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    q, r = scipy.linalg.qr(z)
    d = np.diag(r)
    ph = d / np.abs(d)
    return freeze(q * ph)


def random_matrix(rng, rows, cols, scale=1.0):
    """Complex Gaussian matrix rescaled to Frobenius norm `scale`."""
    z = rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))
    norm = np.linalg.norm(z)
    return freeze(z * (scale / norm) if norm > 0 else z)


def random_antihermitian(rng, dim, scale=1.0):
    z = random_matrix(rng, dim, dim)
    h = (z - dagger(z)) / 2
    norm = np.linalg.norm(h)
    return freeze(h * (scale / norm) if norm > 0 else h)


@dataclass(frozen=True)
class MatrixClass:
    hermitian: bool
    antihermitian: bool
    unitary: bool
    traceless: bool
    idempotent: bool


def classify_matrix(a, tol=DEFAULT_TOL):
    """
    Classifies a square matrix. Each flag holds when its defect norm is at most
    tol * max(1, ||a||_F).
    """
    a = require_square(as_cmatrix(a))
    bound = tol * max(1.0, frobenius(a))
    eye = np.eye(a.shape[0])
    flags = MatrixClass(
        hermitian=frobenius(a - dagger(a)) <= bound,
        antihermitian=frobenius(a + dagger(a)) <= bound,
        unitary=frobenius(dagger(a) @ a - eye) <= bound,
        traceless=abs(np.trace(a)) <= bound,
        idempotent=frobenius(a @ a - a) <= bound,
    )
    logging.debug(f"classify_matrix {a.shape}: {flags}")
    return flags
