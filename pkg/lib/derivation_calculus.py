# lib/derivation_calculus.py
"""
Restricted derivation-based differential calculus on A = M_n(C).

Every derivation of a matrix algebra is inner, so a Lie algebra g of derivations is
handed to us as a list of traceless matrices theta_i = theta(e_i). Forms are stored by
their components on strictly increasing index tuples of that basis; the center of A is
the scalars, so multilinearity over it comes for free.

Indices are 0-based throughout this module.
"""
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, permutations

import numpy as np

from lib.errors import DimensionError, ValidationError
from lib.linalg_core import (
    as_cmatrix,
    commutator,
    dagger,
    freeze,
    frobenius,
    numeric_rank,
    random_matrix,
)

TRACE_TOL = 1e-8
SPAN_TOL = 1e-9
REAL_TOL = 1e-10


@dataclass(frozen=True)
class AlgebraContext:
    """The algebra M_n(C). Its center is the scalars."""
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError(f"algebra size must be at least 1, got {self.n}", "algebra_n")


@dataclass(frozen=True, eq=False)
class LieBasis:
    n: int
    theta_mats: tuple
    structure_constants: np.ndarray  # c[i, j, k]: [e_i, e_j] = sum_k c[i, j, k] e_k
    involution_matrix: np.ndarray    # S[i, j]: theta(e_i*) = sum_j S[i, j] theta_j
    real_flags: tuple

    @property
    def dim(self):
        return len(self.theta_mats)

    @cached_property
    def stacked(self):
        if not self.theta_mats:
            return np.zeros((0, self.n, self.n), dtype=np.complex128)
        return np.stack(self.theta_mats)

    @property
    def real_indices(self):
        return tuple(i for i, flag in enumerate(self.real_flags) if flag)


@dataclass(frozen=True, eq=False)
class DerivationVector:
    """X = sum_i coeffs[i] e_i."""
    coeffs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=np.complex128).reshape(-1)
        if not np.all(np.isfinite(arr)):
            raise ValidationError("derivation coefficients must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    def __len__(self):
        return len(self.coeffs)


@dataclass(frozen=True, eq=False)
class DifferentialForm:
    """A p-form. Components are keyed by strictly increasing index tuples; degree 0 uses the key ()."""
    degree: int
    n: int
    components: dict

    def component(self, key):
        comp = self.components.get(tuple(key))
        if comp is None:
            return np.zeros((self.n, self.n), dtype=np.complex128)
        return comp

    def matrix(self):
        """The single matrix of a 0-form."""
        if self.degree != 0:
            raise DimensionError(f"matrix() needs a 0-form, got degree {self.degree}")
        return self.component(())


# --- Lie basis -------------------------------------------------------------------------

def _vectorize(mats):
    return np.stack([m.reshape(-1) for m in mats]) if mats else np.zeros((0, 0))


def _solve_in_span(basis_vecs, targets, what, field=None):
    """Least-squares coefficients of `targets` (rows) in the span of `basis_vecs` (rows)."""
    coeffs, *_ = np.linalg.lstsq(basis_vecs.T, targets.T, rcond=None)
    coeffs = coeffs.T
    residual = np.linalg.norm(coeffs @ basis_vecs - targets, axis=1)
    scale = np.maximum(1.0, np.linalg.norm(targets, axis=1))
    worst = int(np.argmax(residual / scale))
    if residual[worst] > SPAN_TOL * scale[worst]:
        raise ValidationError(f"{what} (residual {residual[worst]:.3e})", field)
    return coeffs


def build_lie_basis(ctx, mats):
    """
    Validates a list of traceless matrices as a basis of a *-closed Lie algebra g of
    inner derivations and solves for its structure constants and involution matrix.

    Args:
        ctx (AlgebraContext): The algebra M_n(C).
        mats (list): d matrices of shape (n, n). An empty list gives the d = 0 calculus.

    Returns:
        LieBasis: The validated basis.

    Raises:
        ValidationError: If a matrix is not traceless, the list is linearly dependent,
            a bracket leaves the span (g not a Lie subalgebra) or -theta^dagger leaves
            the span (g not *-closed).
    """
    n = ctx.n
    thetas = []
    for i, m in enumerate(mats):
        field = f"lie_basis[{i}]"
        theta = as_cmatrix(m, field)
        if theta.shape != (n, n):
            raise DimensionError(f"expected shape ({n}, {n}), got {theta.shape}", field)
        tr = np.trace(theta)
        if abs(tr) > TRACE_TOL * max(1.0, frobenius(theta)):
            raise ValidationError(f"matrix is not traceless (trace {tr:.6g})", field)
        thetas.append(theta)
    d = len(thetas)
    logging.info(f"Building Lie basis (d={d}, n={n})")

    if d == 0:
        return LieBasis(n, (), np.zeros((0, 0, 0), dtype=np.complex128),
                        np.zeros((0, 0), dtype=np.complex128), ())

    vecs = _vectorize(thetas)
    if numeric_rank(vecs) != d:
        raise ValidationError("basis matrices are linearly dependent", "lie_basis")

    brackets = np.stack([commutator(thetas[i], thetas[j]).reshape(-1)
                         for i in range(d) for j in range(d)])
    c = _solve_in_span(vecs, brackets, "bracket leaves the span; g is not a Lie subalgebra",
                       "lie_basis").reshape(d, d, d)

    stars = np.stack([(-dagger(t)).reshape(-1) for t in thetas])
    s = _solve_in_span(vecs, stars, "-theta^dagger leaves the span; g is not *-closed",
                       "lie_basis")

    real_flags = tuple(frobenius(t + dagger(t)) <= REAL_TOL * max(1.0, frobenius(t))
                       for t in thetas)
    c = freeze(c)
    s = freeze(s)
    return LieBasis(n, tuple(thetas), c, s, real_flags)


def lie_basis_defects(basis):
    """Residuals of every LieBasis invariant, keyed by name."""
    d = basis.dim
    thetas = basis.theta_mats
    c = basis.structure_constants
    s = basis.involution_matrix
    defects = {"closure": 0.0, "antisymmetry": 0.0, "jacobi": 0.0,
               "involution": 0.0, "involution_square": 0.0, "traceless": 0.0}
    if d == 0:
        return defects
    stacked = basis.stacked
    for i in range(d):
        defects["traceless"] = max(defects["traceless"], abs(np.trace(thetas[i])))
        lhs = -dagger(thetas[i])
        rhs = np.einsum("j,jab->ab", s[i], stacked)
        defects["involution"] = max(defects["involution"], frobenius(lhs - rhs))
        for j in range(d):
            rhs = np.einsum("k,kab->ab", c[i, j], stacked)
            defects["closure"] = max(defects["closure"],
                                     frobenius(commutator(thetas[i], thetas[j]) - rhs))
    defects["antisymmetry"] = float(np.max(np.abs(c + c.transpose(1, 0, 2))))
    # sum_l (c_ij^l c_lk^m + c_jk^l c_li^m + c_ki^l c_lj^m) = 0
    jac = (np.einsum("ijl,lkm->ijkm", c, c)
           + np.einsum("jkl,lim->ijkm", c, c)
           + np.einsum("kil,ljm->ijkm", c, c))
    defects["jacobi"] = float(np.max(np.abs(jac)))
    # X** = X: coefficients map x -> conj(x) S, applied twice gives x S-bar S
    defects["involution_square"] = float(np.max(np.abs(s.conj() @ s - np.eye(d))))
    return defects


# --- derivations -----------------------------------------------------------------------

def _check_length(basis, X):
    if len(X) != basis.dim:
        raise DimensionError(f"derivation has {len(X)} coefficients, basis has {basis.dim}")


def unit_derivation(basis, i):
    coeffs = np.zeros(basis.dim, dtype=np.complex128)
    coeffs[i] = 1.0
    return DerivationVector(coeffs)


def theta_eval(basis, X):
    """Canonical one-form on X: sum_i x_i theta_i, a traceless n x n matrix."""
    _check_length(basis, X)
    if basis.dim == 0:
        return freeze(np.zeros((basis.n, basis.n)))
    return freeze(np.einsum("i,iab->ab", X.coeffs, basis.stacked))


def apply_derivation(basis, X, a):
    """X(a) = [theta(X), a]."""
    a = as_cmatrix(a)
    if a.shape != (basis.n, basis.n):
        raise DimensionError(f"expected an element of M_{basis.n}, got shape {a.shape}")
    return freeze(commutator(theta_eval(basis, X), a))


def lie_bracket(basis, X, Y):
    _check_length(basis, X)
    _check_length(basis, Y)
    if basis.dim == 0:
        return DerivationVector(np.zeros(0))
    return DerivationVector(np.einsum("i,j,ijk->k", X.coeffs, Y.coeffs, basis.structure_constants))


def derivation_star(basis, X):
    """X* = sum_i conj(x_i) e_i*, so that theta(X*) = -theta(X)^dagger."""
    _check_length(basis, X)
    return DerivationVector(X.coeffs.conj() @ basis.involution_matrix)


def is_real_derivation(basis, X, tol=REAL_TOL):
    """True when X is a real combination of real-flagged basis elements."""
    _check_length(basis, X)
    for i, x in enumerate(X.coeffs):
        if abs(x.imag) > tol or (not basis.real_flags[i] and abs(x) > tol):
            return False
    return True


# --- forms -----------------------------------------------------------------------------

def _keys(d, p):
    return list(combinations(range(d), p))


def _make_form(basis, degree, components):
    frozen = {k: freeze(v) for k, v in components.items()}
    return DifferentialForm(degree, basis.n, frozen)


def zero_form(basis, degree):
    zeros = np.zeros((basis.n, basis.n), dtype=np.complex128)
    return _make_form(basis, degree, {k: zeros for k in _keys(basis.dim, degree)})


def make_form(basis, degree, components):
    """
    Builds a p-form from a component map, validating keys and shapes. Missing keys are zero.
    """
    if degree < 0:
        raise ValidationError(f"degree must be non-negative, got {degree}")
    full = {}
    for key in _keys(basis.dim, degree):
        full[key] = np.zeros((basis.n, basis.n), dtype=np.complex128)
    for key, value in components.items():
        key = tuple(key)
        if len(key) != degree or any(a >= b for a, b in zip(key, key[1:])):
            raise ValidationError(f"component key {key} is not a strictly increasing {degree}-tuple")
        if any(i < 0 or i >= basis.dim for i in key):
            raise ValidationError(f"component key {key} has an index outside 0..{basis.dim - 1}")
        mat = as_cmatrix(value, f"component{list(key)}")
        if mat.shape != (basis.n, basis.n):
            raise DimensionError(f"component {key} has shape {mat.shape}, expected ({basis.n}, {basis.n})")
        full[key] = mat
    return _make_form(basis, degree, full)


def form_from_matrix(basis, a):
    return make_form(basis, 0, {(): a})


def canonical_one_form(basis):
    return make_form(basis, 1, {(i,): t for i, t in enumerate(basis.theta_mats)})


def random_form(basis, degree, rng, scale=1.0):
    comps = {k: random_matrix(rng, basis.n, basis.n, scale) for k in _keys(basis.dim, degree)}
    return _make_form(basis, degree, comps)


def _same_basis(basis, *forms):
    for f in forms:
        if f.n != basis.n:
            raise DimensionError(f"form over M_{f.n} used with a basis over M_{basis.n}")
        for key in f.components:
            if any(i >= basis.dim for i in key):
                raise DimensionError(f"form has index {key} outside a basis of dimension {basis.dim}")


def form_add(basis, omega, eta):
    if omega.degree != eta.degree:
        raise DimensionError(f"cannot add forms of degree {omega.degree} and {eta.degree}")
    _same_basis(basis, omega, eta)
    keys = _keys(basis.dim, omega.degree)
    return _make_form(basis, omega.degree, {k: omega.component(k) + eta.component(k) for k in keys})


def form_scale(basis, omega, factor):
    return _make_form(basis, omega.degree, {k: factor * v for k, v in omega.components.items()})


def form_norm(omega):
    """Frobenius norm over all components."""
    if not omega.components:
        return 0.0
    return float(np.sqrt(sum(frobenius(v) ** 2 for v in omega.components.values())))


def _sorted_component(omega, indices):
    """omega(e_{i1}, ..., e_{ip}) for an arbitrary index tuple, using antisymmetry."""
    if len(set(indices)) < len(indices):
        return None
    order = sorted(range(len(indices)), key=lambda k: indices[k])
    sign = _permutation_sign(order)
    key = tuple(indices[k] for k in order)
    return sign * omega.component(key)


def _permutation_sign(order):
    sign = 1
    seen = [False] * len(order)
    for start in range(len(order)):
        if seen[start]:
            continue
        length = 0
        k = start
        while not seen[k]:
            seen[k] = True
            k = order[k]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def evaluate_form(basis, omega, letters):
    """
    Evaluates a p-form on p derivation vectors.

    Multilinearity and antisymmetry turn the evaluation into a sum of the stored
    components weighted by the p x p minors of the coefficient matrix.
    """
    if len(letters) != omega.degree:
        raise DimensionError(f"a {omega.degree}-form takes {omega.degree} arguments, got {len(letters)}")
    if omega.degree == 0:
        return omega.matrix()
    for X in letters:
        _check_length(basis, X)
    coeffs = np.stack([X.coeffs for X in letters])
    total = np.zeros((basis.n, basis.n), dtype=np.complex128)
    for key, comp in omega.components.items():
        minor = np.linalg.det(coeffs[:, list(key)])
        if minor != 0:
            total += minor * comp
    return freeze(total)


def wedge(basis, omega, eta):
    """
    Product of a p-form and a q-form.

    Sums over (p, q)-shuffles instead of all permutations: each shuffle class holds p! q!
    identical terms, which cancels the 1/(p! q!) prefactor of the defining formula.
    """
    _same_basis(basis, omega, eta)
    p, q = omega.degree, eta.degree
    comps = {}
    for key in _keys(basis.dim, p + q):
        total = np.zeros((basis.n, basis.n), dtype=np.complex128)
        for left_pos in combinations(range(p + q), p):
            right_pos = [k for k in range(p + q) if k not in left_pos]
            # sign of the shuffle that moves left_pos to the front
            sign = -1 if (sum(left_pos) - p * (p - 1) // 2) % 2 else 1
            left = tuple(key[k] for k in left_pos)
            right = tuple(key[k] for k in right_pos)
            total += sign * (omega.component(left) @ eta.component(right))
        comps[key] = total
    return _make_form(basis, p + q, comps)


def wedge_by_permutations(basis, omega, eta):
    """Reference product straight from the full-permutation definition. Factorial cost."""
    _same_basis(basis, omega, eta)
    p, q = omega.degree, eta.degree
    norm = 1.0 / (math.factorial(p) * math.factorial(q))
    comps = {}
    for key in _keys(basis.dim, p + q):
        total = np.zeros((basis.n, basis.n), dtype=np.complex128)
        for order in permutations(range(p + q)):
            sign = _permutation_sign(list(order))
            left = _sorted_component(omega, tuple(key[k] for k in order[:p]))
            right = _sorted_component(eta, tuple(key[k] for k in order[p:]))
            total += sign * (left @ right)
        comps[key] = norm * total
    return _make_form(basis, p + q, comps)


def differential(basis, omega):
    """
    Exterior differential of a p-form.

    d omega(e_k0..e_kp) = sum_a (-1)^a [theta_ka, omega(.. no ka ..)]
                        + sum_{a<b} (-1)^(a+b) omega([e_ka, e_kb], .. no ka, kb ..)
    with the bracket expanded through the structure constants.
    """
    _same_basis(basis, omega)
    p = omega.degree
    d = basis.dim
    c = basis.structure_constants
    comps = {}
    for key in _keys(d, p + 1):
        total = np.zeros((basis.n, basis.n), dtype=np.complex128)
        for a in range(p + 1):
            rest = key[:a] + key[a + 1:]
            sign = -1 if a % 2 else 1
            total += sign * commutator(basis.theta_mats[key[a]], omega.component(rest))
        for a, b in combinations(range(p + 1), 2):
            sign = -1 if (a + b) % 2 else 1
            rest = tuple(k for pos, k in enumerate(key) if pos not in (a, b))
            for l in range(d):
                coef = c[key[a], key[b], l]
                if coef == 0:
                    continue
                comp = _sorted_component(omega, (l,) + rest)
                if comp is not None:
                    total += sign * coef * comp
        comps[key] = total
    return _make_form(basis, p + 1, comps)


def form_involution(basis, omega):
    """
    Graded involution omega*(X1..Xp) = omega(X1*..Xp*)^dagger.

    On basis elements e_k* = sum_j S[k, j] e_j, so each component picks up the p x p
    minors of the involution matrix.
    """
    _same_basis(basis, omega)
    p = omega.degree
    if p == 0:
        return form_from_matrix(basis, dagger(omega.matrix()))
    s = basis.involution_matrix
    comps = {}
    for key in _keys(basis.dim, p):
        total = np.zeros((basis.n, basis.n), dtype=np.complex128)
        for src, comp in omega.components.items():
            minor = np.linalg.det(s[np.ix_(list(key), list(src))])
            if minor != 0:
                total += minor * comp
        comps[key] = dagger(total)
    return _make_form(basis, p, comps)


def maurer_cartan_defect(basis):
    """max over i<j of ||(d theta - theta^2)(e_i, e_j)||_F; 0 when d < 2."""
    if basis.dim < 2:
        return 0.0
    theta = canonical_one_form(basis)
    d_theta = differential(basis, theta)
    theta_sq = wedge(basis, theta, theta)
    return max(frobenius(d_theta.component(k) - theta_sq.component(k)) for k in d_theta.components)
