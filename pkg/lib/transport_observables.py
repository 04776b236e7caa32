# lib/transport_observables.py
"""
Module parallel transports and the Wilson-type observables built from them.

For X in g the automorphism flow is phi_t(a) = e^{t theta(X)} a e^{-t theta(X)} and the
module transport is Phi_t(s) = e^{t B(X)} s e^{-t theta(X)}. Dropping the right factor
leaves the endomorphism e^{t B(X)}, and traces of products of those are the observables

    W_(X1..XN) = Tr(e^{B(X1)} ... e^{B(XN)})

which are gauge invariant and, over real words, separate hermitian connections up to
gauge. `decide_gauge_equivalence` turns that into a decision procedure with a witness.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
from itertools import product
from typing import Optional

import numpy as np

from config import DEFAULT_TOL, DEFAULT_TRIALS, EQUIV_TOL
from lib.derivation_calculus import (
    DerivationVector,
    is_real_derivation,
    theta_eval,
    unit_derivation,
)
from lib.errors import DimensionError, GuardError, NotHermitianError, ValidationError
from lib.linalg_core import (
    as_cmatrix,
    dagger,
    eig_hermitian,
    freeze,
    frobenius,
    make_rng,
    mat_exp,
)
from lib.module_connection import covariant_derivative, hermiticity_check

EXP_GUARD = 50.0
SIMPLE_GAP = 1e-6
WORD_SPAN_TOL = 1e-8


def _guarded_exp(mat, tau, what):
    size = abs(tau) * frobenius(mat)
    if size > EXP_GUARD:
        raise GuardError(f"||tau * {what}||_F = {size:.4g} exceeds the exponential guard {EXP_GUARD}",
                         hint="reduce tau or the size of the derivation coefficients")
    return mat_exp(mat, tau)


# --- flows and transports --------------------------------------------------------------

def automorphism_flow(basis, X, tau, a):
    """phi_tau(a) = e^{tau theta(X)} a e^{-tau theta(X)}."""
    a = as_cmatrix(a)
    if a.shape != (basis.n, basis.n):
        raise DimensionError(f"expected an element of M_{basis.n}, got shape {a.shape}")
    theta = theta_eval(basis, X)
    return freeze(_guarded_exp(theta, tau, "theta(X)") @ a @ _guarded_exp(theta, -tau, "theta(X)"))


def star_flow_defect(basis, X, tau, a):
    """||phi_tau(a*) - phi_tau(a)*||_F. Zero for real derivations."""
    a = as_cmatrix(a)
    return frobenius(automorphism_flow(basis, X, tau, dagger(a)) - dagger(automorphism_flow(basis, X, tau, a)))


def module_transport(conn, X, tau, s):
    """Phi_tau(s) = e^{tau B(X)} s e^{-tau theta(X)}."""
    s = conn.module.check_element(s)
    left = transport_endomorphism(conn, X, tau)
    right = _guarded_exp(theta_eval(conn.basis, X), -tau, "theta(X)")
    return freeze(left @ s @ right)


def transport_endomorphism(conn, X, tau):
    """The endomorphism s -> Phi_tau(s) e^{tau theta(X)} = e^{tau B(X)} s, as its m x m matrix."""
    return _guarded_exp(conn.potential_at(X), tau, "B(X)")


def ode_defect(conn, X, tau, h, s):
    """Central-difference residual of d/dtau Phi_tau(s) = nabla_X(Phi_tau(s))."""
    if h <= 0:
        raise ValidationError(f"step h must be positive, got {h}")
    derivative = (module_transport(conn, X, tau + h, s) - module_transport(conn, X, tau - h, s)) / (2 * h)
    return frobenius(derivative - covariant_derivative(conn, X, module_transport(conn, X, tau, s)))


def recover_covariant_derivative(conn, X, s, h=1e-5):
    """nabla_X s read off as the tau-derivative of Phi_tau(s) at tau = 0."""
    return freeze((module_transport(conn, X, h, s) - module_transport(conn, X, -h, s)) / (2 * h))


def recover_gauge_potential(conn, h=1e-5):
    """Rebuilds every B_i from the transport endomorphisms alone."""
    recovered = []
    for i in range(conn.basis.dim):
        X = unit_derivation(conn.basis, i)
        plus = transport_endomorphism(conn, X, h)
        minus = transport_endomorphism(conn, X, -h)
        recovered.append(freeze((plus - minus) / (2 * h)))
    return tuple(recovered)


# --- words and observables -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Word:
    letters: tuple
    restricted_to_real: bool

    def __len__(self):
        return len(self.letters)


def make_word(basis, letters):
    """
    Builds a word from derivation vectors (or raw coefficient sequences).

    Raises:
        ValidationError: If the word is empty or a letter has the wrong length.
    """
    if not letters:
        raise ValidationError("a word needs at least one letter", "words")
    vecs = []
    for k, letter in enumerate(letters):
        vec = letter if isinstance(letter, DerivationVector) else DerivationVector(letter)
        if len(vec) != basis.dim:
            raise DimensionError(f"letter has {len(vec)} coefficients, basis has {basis.dim}", f"words[{k}]")
        vecs.append(vec)
    real = all(is_real_derivation(basis, v) for v in vecs)
    return Word(tuple(vecs), real)


def index_word(basis, indices):
    """Word of basis letters, e.g. (0, 1, 2) for e1 e2 e3."""
    return make_word(basis, [unit_derivation(basis, i) for i in indices])


def observable(conn, word, tau=1.0):
    """W = Tr(e^{tau B(X1)} ... e^{tau B(XN)})."""
    factors = [transport_endomorphism(conn, X, tau) for X in word.letters]
    return complex(np.trace(reduce(np.matmul, factors)))


def observable_batch(conn, words, tau=1.0, max_workers=None):
    """Evaluates many words concurrently; results come back in input order."""
    if not words:
        return []
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(lambda w: observable(conn, w, tau), words))


def monomial_from_observables(conn, word, h=1e-3):
    """
    Tr(B(X1) ... B(XN)) recovered as the mixed derivative of W_(t1 X1, ..., tN XN) at t = 0,
    by central differences in every t_k.
    """
    n_letters = len(word)
    total = 0j
    for signs in product((1.0, -1.0), repeat=n_letters):
        scaled = Word(tuple(DerivationVector(sg * h * X.coeffs) for sg, X in zip(signs, word.letters)),
                      word.restricted_to_real)
        total += np.prod(signs) * observable(conn, scaled, 1.0)
    return complex(total / (2 * h) ** n_letters)


def canonical_rotation(indices):
    """Lexicographically smallest cyclic rotation of an index tuple."""
    indices = tuple(indices)
    if not indices:
        return indices
    return min(indices[k:] + indices[:k] for k in range(len(indices)))


def trace_monomials(conn, max_degree):
    """
    Tr(B_i1 ... B_ik) for every word over the real-flagged indices with 1 <= k <= max_degree.

    Only the canonical (minimal) rotation of each cyclic class is stored; trace cyclicity
    makes the other rotations equal to it. Keys are 0-based index tuples.
    """
    if max_degree < 1:
        raise ValidationError(f"max_degree must be at least 1, got {max_degree}")
    letters = conn.basis.real_indices
    values = {}
    for k in range(1, max_degree + 1):
        for word in product(letters, repeat=k):
            if canonical_rotation(word) != word:
                continue
            mat = reduce(np.matmul, (conn.potential[i] for i in word))
            values[word] = complex(np.trace(mat))
    return values


# --- gauge equivalence -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EquivalenceVerdict:
    equivalent: bool
    witness: Optional[np.ndarray]
    max_trace_gap: float
    separating_word: Optional[tuple]
    trials_used: int
    trace_agreement_only: bool = False
    witness_residual: Optional[float] = None
    words_compared: int = 0
    notes: tuple = field(default_factory=tuple)


class _JointSpan:
    """Orthonormal basis of the span of joint word matrices w(B) + w(B')."""

    def __init__(self):
        self.vectors = []

    def add(self, vec):
        norm = np.linalg.norm(vec)
        if norm == 0:
            return False
        v = vec / norm
        for _ in range(2):
            for u in self.vectors:
                v = v - np.vdot(u, v) * u
        residual = np.linalg.norm(v)
        if residual <= WORD_SPAN_TOL:
            return False
        self.vectors.append(v / residual)
        return True


def _compare_trace_words(bs, bps, letters, max_degree, tol):
    """
    Breadth-first comparison of trace words over the pair (B, B').

    A word is extended only while its joint matrix is independent of the words already
    kept, so every word up to max_degree is a linear combination of the compared ones.

    Returns:
        tuple: (max relative gap, first separating word or None, number of words compared)
    """
    m = bs[0].shape[0] if bs else 0
    eye = np.eye(m, dtype=np.complex128)
    span = _JointSpan()
    span.add(np.concatenate([eye.ravel(), eye.ravel()]))
    frontier = [((), eye, eye)]
    max_gap = 0.0
    compared = 0
    for length in range(1, max_degree + 1):
        next_frontier = []
        for word, a, ap in frontier:
            for i in letters:
                w = word + (i,)
                wa = a @ bs[i]
                wap = ap @ bps[i]
                ta, tb = np.trace(wa), np.trace(wap)
                compared += 1
                gap = abs(ta - tb) / max(1.0, abs(ta), abs(tb))
                max_gap = max(max_gap, gap)
                if gap > tol:
                    logging.info(f"Trace word {tuple(k + 1 for k in w)} separates (gap {gap:.3e})")
                    return max_gap, w, compared
                if span.add(np.concatenate([wa.ravel(), wap.ravel()])):
                    next_frontier.append((w, wa, wap))
        logging.debug(f"Trace words of length {length}: {len(next_frontier)} kept, span {len(span.vectors)}")
        if not next_frontier:
            break
        frontier = next_frontier
    return max_gap, None, compared


def _align_phases(cs, cps, scale):
    """Diagonal phases D with D C_i D^dagger = C'_i, fixed one eigenvector at a time."""
    m = cs[0].shape[0]
    weight = sum(np.abs(c) for c in cs)
    phases = np.ones(m, dtype=np.complex128)
    fixed = [False] * m
    for root in range(m):
        if fixed[root]:
            continue
        fixed[root] = True
        while True:
            best, pair = 0.0, None
            for k in range(m):
                if not fixed[k]:
                    continue
                for l in range(m):
                    if not fixed[l] and weight[k, l] > best:
                        best, pair = weight[k, l], (k, l)
            if pair is None or best <= WORD_SPAN_TOL * scale:
                break
            k, l = pair
            i = int(np.argmax([abs(c[k, l]) for c in cs]))
            ratio = cps[i][k, l] / cs[i][k, l]
            if abs(ratio) == 0:
                break
            phases[l] = phases[k] * np.conj(ratio / abs(ratio))
            fixed[l] = True
    return phases


def _witness_residual(u, bs, bps):
    ud = dagger(u)
    return max((frobenius(u @ b @ ud - bp) for b, bp in zip(bs, bps)), default=0.0)


def _search_witness(bs, bps, letters, trials, tol, seed):
    """Randomized simultaneous-diagonalization witness search."""
    m = bs[0].shape[0]
    scale = max([1.0] + [frobenius(b) for b in bs])
    identity = np.eye(m, dtype=np.complex128)
    # trial 1: the identity
    residual = _witness_residual(identity, bs, bps)
    if residual <= tol * scale:
        return freeze(identity), residual, 1
    rng = make_rng(seed)
    for trial in range(2, trials + 1):
        r = rng.standard_normal(len(letters))
        h = sum(x * 1j * bs[i] for x, i in zip(r, letters))
        hp = sum(x * 1j * bps[i] for x, i in zip(r, letters))
        h = (h + dagger(h)) / 2
        hp = (hp + dagger(hp)) / 2
        w, v = eig_hermitian(h, tol=1e-8)
        wp, vp = eig_hermitian(hp, tol=1e-8)
        if m > 1 and np.min(np.diff(w)) <= SIMPLE_GAP * max(1.0, np.abs(w).max()):
            logging.debug(f"Witness trial {trial}: degenerate spectrum, skipping")
            continue
        if np.max(np.abs(w - wp)) > tol * max(1.0, np.abs(w).max()):
            logging.debug(f"Witness trial {trial}: spectra differ")
            continue
        cs = [dagger(v) @ b @ v for b in bs]
        cps = [dagger(vp) @ b @ vp for b in bps]
        phases = _align_phases(cs, cps, scale)
        u = vp @ np.diag(phases) @ dagger(v)
        residual = _witness_residual(u, bs, bps)
        logging.debug(f"Witness trial {trial}: residual {residual:.3e}")
        if residual <= tol * scale:
            return freeze(u), residual, trial
    return None, None, trials


def decide_gauge_equivalence(a, b, max_degree=None, trials=DEFAULT_TRIALS, tol=EQUIV_TOL, seed=0):
    """
    Decides whether two hermitian connections lie in the same gauge orbit.

    Phase 1 compares traces of words in the B_i over the real basis directions, up to
    `max_degree` letters (default m^2). Any gap beyond `tol` proves inequivalence and the
    word is returned. Phase 2 looks for a unitary witness u with u B_i u^dagger = B'_i by
    aligning eigenvectors of random real combinations. When the traces agree but no
    witness is found the connections are still reported equivalent, flagged as
    trace-agreement-only.

    Args:
        a (GaugeConnection): First connection.
        b (GaugeConnection): Second connection.
        max_degree (int, optional): Longest trace word compared.
        trials (int): Witness search attempts, the identity included; at least 1.
        tol (float): Relative tolerance for trace gaps and the witness residual.
        seed (int): Seed of the witness search.

    Returns:
        EquivalenceVerdict: The decision with its evidence.
    """
    if a.m != b.m or a.basis.dim != b.basis.dim or a.basis.n != b.basis.n:
        raise DimensionError(f"connections differ in shape: m {a.m} vs {b.m}, d {a.basis.dim} vs {b.basis.dim}")
    if a.basis.real_flags != b.basis.real_flags:
        raise DimensionError("connections use bases with different real directions")
    if trials < 1:
        raise ValidationError(f"trials must be at least 1, got {trials}", "trials")
    for name, conn in (("first", a), ("second", b)):
        if not hermiticity_check(conn, max(DEFAULT_TOL, tol)):
            raise NotHermitianError(f"the {name} connection is not hermitian; separation is only decided for hermitian connections")
    if max_degree is None:
        max_degree = a.m * a.m
    letters = a.basis.real_indices
    notes = []
    if not letters:
        notes.append("no real-flagged basis elements; nothing to compare")

    max_gap, separating, compared = (0.0, None, 0)
    if letters:
        max_gap, separating, compared = _compare_trace_words(a.potential, b.potential, letters, max_degree, tol)
    if separating is not None:
        return EquivalenceVerdict(False, None, max_gap, separating, 0, words_compared=compared,
                                  notes=tuple(notes))

    if not letters:
        return EquivalenceVerdict(True, None, max_gap, None, 0, trace_agreement_only=True,
                                  words_compared=compared, notes=tuple(notes))
    witness, residual, used = _search_witness(a.potential, b.potential, letters, trials, tol, seed)
    if witness is None:
        logging.warning(f"No witness after {used} trials; equivalence rests on trace agreement only")
        notes.append("witness search exhausted; likely persistent spectral degeneracy")
        return EquivalenceVerdict(True, None, max_gap, None, used, trace_agreement_only=True,
                                  words_compared=compared, notes=tuple(notes))
    return EquivalenceVerdict(True, witness, max_gap, None, used, witness_residual=residual,
                              words_compared=compared, notes=tuple(notes))
