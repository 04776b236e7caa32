# lib/module_connection.py
"""
Connections on the finite projective modules E = M_{m,n}(C) over A = M_n(C).

A connection is stored only through its gauge potential B relative to the canonical
connection, one m x m matrix B_i per basis element of g:
    nabla_X s = -s theta(X) + B(X) s
"""
import logging
from dataclasses import dataclass

import numpy as np

from config import DEFAULT_TOL
from lib.derivation_calculus import (
    apply_derivation,
    derivation_star,
    lie_bracket,
    theta_eval,
)
from lib.errors import DimensionError, ValidationError
from lib.linalg_core import (
    as_cmatrix,
    commutator,
    dagger,
    freeze,
    frobenius,
    make_rng,
    numeric_rank,
    random_antihermitian,
    random_matrix,
    require_square,
)

IDEMPOTENT_TOL = 1e-8
UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class ModuleSpace:
    """E = M_{m,n}(C) with A = M_n(C) acting by right multiplication."""
    m: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValidationError(f"module sizes must be positive, got m={self.m}, n={self.n}")

    def check_element(self, s, field=None):
        s = as_cmatrix(s, field)
        if s.shape != (self.m, self.n):
            raise DimensionError(f"module element has shape {s.shape}, expected ({self.m}, {self.n})", field)
        return s


@dataclass(frozen=True, eq=False)
class GaugeConnection:
    module: ModuleSpace
    basis: object
    potential: tuple

    def __post_init__(self):
        if self.module.n != self.basis.n:
            raise DimensionError(f"module is over M_{self.module.n}, basis is over M_{self.basis.n}")
        if len(self.potential) != self.basis.dim:
            raise DimensionError(f"gauge potential has {len(self.potential)} entries, basis has {self.basis.dim}",
                                 "gauge_potential")
        mats = []
        for i, b in enumerate(self.potential):
            field = f"gauge_potential[{i}]"
            b = as_cmatrix(b, field)
            if b.shape != (self.module.m, self.module.m):
                raise DimensionError(f"expected shape ({self.module.m}, {self.module.m}), got {b.shape}", field)
            mats.append(b)
        object.__setattr__(self, "potential", tuple(mats))

    @property
    def m(self):
        return self.module.m

    def potential_at(self, X):
        """B(X) = sum_i x_i B_i."""
        if len(X) != self.basis.dim:
            raise DimensionError(f"derivation has {len(X)} coefficients, basis has {self.basis.dim}")
        if not self.potential:
            return freeze(np.zeros((self.m, self.m)))
        return freeze(np.einsum("i,iab->ab", X.coeffs, np.stack(self.potential)))


def make_connection(module, basis, potential):
    return GaugeConnection(module, basis, tuple(potential))


def canonical_connection(module, basis):
    zeros = np.zeros((module.m, module.m), dtype=np.complex128)
    return GaugeConnection(module, basis, tuple(zeros for _ in range(basis.dim)))


def random_connection(module, basis, seed, scale=1.0, hermitian=True):
    """Seeded random gauge potential; antihermitian on real-flagged directions when `hermitian`."""
    rng = make_rng(seed)
    mats = []
    for i in range(basis.dim):
        if hermitian and basis.real_flags[i]:
            mats.append(random_antihermitian(rng, module.m, scale))
        else:
            mats.append(random_matrix(rng, module.m, module.m, scale))
    return GaugeConnection(module, basis, tuple(mats))


def module_from_projector(n, N, p, tol=IDEMPOTENT_TOL):
    """
    Realizes the finite projective module p A^N as M_{m,n}(C).

    Args:
        n (int): Algebra size.
        N (int): Rank of the underlying free module A^N.
        p (numpy.ndarray): Idempotent of shape (nN, nN), not necessarily hermitian.
        tol (float): Idempotency tolerance.

    Returns:
        tuple: (m, basis_of_V) where m is the dimension of V = p C^{nN} and basis_of_V has
        m orthonormal columns spanning it.
    """
    p = require_square(as_cmatrix(p, "projector"), "projector")
    if p.shape[0] != n * N:
        raise DimensionError(f"projector has size {p.shape[0]}, expected n*N = {n * N}", "projector")
    defect = frobenius(p @ p - p)
    if defect > tol * max(1.0, frobenius(p)):
        raise ValidationError(f"projector is not idempotent (defect {defect:.3e})", "projector")
    m = numeric_rank(p)
    u, _, _ = np.linalg.svd(p)
    logging.info(f"Projector of size {n * N} gives module M_({m},{n})")
    return m, freeze(u[:, :m])


def hermitian_pairing(s, t):
    """<s, t> = s^dagger t, an element of A."""
    s = as_cmatrix(s)
    t = as_cmatrix(t)
    if s.shape != t.shape:
        raise DimensionError(f"cannot pair elements of shapes {s.shape} and {t.shape}")
    return freeze(dagger(s) @ t)


def covariant_derivative(conn, X, s):
    """nabla_X s = -s theta(X) + B(X) s."""
    s = conn.module.check_element(s)
    return freeze(-s @ theta_eval(conn.basis, X) + conn.potential_at(X) @ s)


def curvature(conn, i, j):
    """F(e_i, e_j) = [B_i, B_j] - sum_k c_ij^k B_k, as an m x m matrix."""
    d = conn.basis.dim
    if not (0 <= i < d and 0 <= j < d):
        raise ValidationError(f"curvature indices ({i}, {j}) out of range 0..{d - 1}")
    c = conn.basis.structure_constants[i, j]
    bracket = np.einsum("k,kab->ab", c, np.stack(conn.potential))
    return freeze(commutator(conn.potential[i], conn.potential[j]) - bracket)


def curvature_along(conn, X, Y):
    """F(X, Y) = [B(X), B(Y)] - B([X, Y]) for arbitrary derivation vectors."""
    bx = conn.potential_at(X)
    by = conn.potential_at(Y)
    return freeze(commutator(bx, by) - conn.potential_at(lie_bracket(conn.basis, X, Y)))


def covariant_curvature(conn, X, Y, s):
    """nabla_X nabla_Y s - nabla_Y nabla_X s - nabla_[X,Y] s."""
    xy = covariant_derivative(conn, X, covariant_derivative(conn, Y, s))
    yx = covariant_derivative(conn, Y, covariant_derivative(conn, X, s))
    return freeze(xy - yx - covariant_derivative(conn, lie_bracket(conn.basis, X, Y), s))


def max_curvature_norm(conn):
    d = conn.basis.dim
    return max((frobenius(curvature(conn, i, j)) for i in range(d) for j in range(i + 1, d)),
               default=0.0)


def is_flat(conn, tol=DEFAULT_TOL):
    """Flat iff B is a Lie algebra representation of g."""
    scale = max([1.0] + [frobenius(b) ** 2 for b in conn.potential])
    return max_curvature_norm(conn) <= tol * scale


def hermiticity_check(conn, tol=DEFAULT_TOL):
    """True iff B_i is antihermitian (within tol) for every real-flagged basis element."""
    real = conn.basis.real_indices
    if not real:
        logging.warning("Hermiticity check has no real-flagged basis elements to test")
    for i in real:
        b = conn.potential[i]
        if frobenius(b + dagger(b)) > tol * max(1.0, frobenius(b)):
            logging.debug(f"B_{i + 1} is not antihermitian")
            return False
    return True


def compatibility_defect(conn, X, s, t):
    """||X(<s,t>) - <nabla_{X*} s, t> - <s, nabla_X t>||_F."""
    s = conn.module.check_element(s)
    t = conn.module.check_element(t)
    x_star = derivation_star(conn.basis, X)
    lhs = apply_derivation(conn.basis, X, hermitian_pairing(s, t))
    rhs = (hermitian_pairing(covariant_derivative(conn, x_star, s), t)
           + hermitian_pairing(s, covariant_derivative(conn, X, t)))
    return frobenius(lhs - rhs)


def endomorphism_is_hermitian(T, s, t, tol=DEFAULT_TOL):
    """<s, T t> = <T s, t> on the given pair of elements."""
    T = as_cmatrix(T)
    lhs = hermitian_pairing(s, T @ as_cmatrix(t))
    rhs = hermitian_pairing(T @ as_cmatrix(s), t)
    return frobenius(lhs - rhs) <= tol * max(1.0, frobenius(lhs))


def endomorphism_is_unitary(u, s, t, tol=DEFAULT_TOL):
    """<u s, u t> = <s, t> on the given pair of elements."""
    u = as_cmatrix(u)
    lhs = hermitian_pairing(u @ as_cmatrix(s), u @ as_cmatrix(t))
    rhs = hermitian_pairing(s, t)
    return frobenius(lhs - rhs) <= tol * max(1.0, frobenius(rhs))


def gauge_transform(conn, u, tol=UNITARY_TOL):
    """B_i -> u B_i u^dagger for a unitary u."""
    u = require_square(as_cmatrix(u, "u"), "u")
    if u.shape != (conn.m, conn.m):
        raise DimensionError(f"gauge transformation has shape {u.shape}, expected ({conn.m}, {conn.m})", "u")
    defect = frobenius(dagger(u) @ u - np.eye(conn.m))
    if defect > tol * max(1.0, frobenius(u)):
        raise ValidationError(f"gauge transformation is not unitary (defect {defect:.3e})", "u")
    ud = dagger(u)
    return GaugeConnection(conn.module, conn.basis, tuple(freeze(u @ b @ ud) for b in conn.potential))
