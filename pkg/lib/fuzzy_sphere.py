# lib/fuzzy_sphere.py
"""
Fuzzy sphere presets: A = M_{2j+1}(C) with g the complexified su(2) acting through the
spin-j representation, and flat connections built from direct sums of spin
representations. Different spin contents give flat connections with identical (zero)
curvature that are not gauge equivalent, which is what the gauge-copy report shows.
"""
import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from lib.derivation_calculus import AlgebraContext, build_lie_basis
from lib.errors import DimensionError, ValidationError
from lib.linalg_core import freeze, haar_unitary
from lib.module_connection import (
    ModuleSpace,
    gauge_transform,
    hermiticity_check,
    make_connection,
    max_curvature_norm,
)
from lib.scenario import Scenario
from lib.transport_observables import decide_gauge_equivalence, index_word, observable

MAX_TWO_J = 40
# (e3), (e3, e3), (e1, e2, e3), 0-based
DEFAULT_WORDS = ((2,), (2, 2), (0, 1, 2))


@dataclass(frozen=True, order=True)
class SpinLabel:
    two_j: int

    def __post_init__(self):
        if not isinstance(self.two_j, int) or self.two_j < 0:
            raise ValidationError(f"two_j must be a non-negative integer, got {self.two_j!r}")
        if self.two_j > MAX_TWO_J:
            raise ValidationError(f"spin {self.two_j}/2 exceeds the supported maximum {MAX_TWO_J}/2")

    @classmethod
    def parse(cls, text):
        """Parses "0.5", "1", "1.5" or "3/2"; the value must be a multiple of 1/2."""
        try:
            value = Fraction(str(text).strip())
        except (ValueError, ZeroDivisionError):
            raise ValidationError(f"cannot parse spin {text!r}", "spin")
        if (2 * value).denominator != 1:
            raise ValidationError(f"spin {text!r} is not a multiple of 1/2", "spin")
        return cls(int(2 * value))

    @property
    def j(self):
        return self.two_j / 2

    @property
    def dim(self):
        return self.two_j + 1

    def __str__(self):
        return str(self.two_j // 2) if self.two_j % 2 == 0 else f"{self.two_j}/2"


def spin_matrices(spin):
    """
    Antihermitian generators theta_a = -i J_a of the spin-j representation, with
    [theta_a, theta_b] = eps_abc theta_c.

    J_+ has entries sqrt(j(j+1) - q(q+1)) above the diagonal in the basis q = j, j-1, ..., -j.
    """
    j = spin.j
    dim = spin.dim
    q = j - np.arange(dim)
    j_plus = np.zeros((dim, dim))
    for k in range(1, dim):
        j_plus[k - 1, k] = np.sqrt(j * (j + 1) - q[k] * (q[k] + 1))
    j_minus = j_plus.T
    jx = (j_plus + j_minus) / 2
    jy = (j_plus - j_minus) / 2j
    jz = np.diag(q)
    return tuple(freeze(-1j * a) for a in (jx, jy, jz))


def spin_basis(spin):
    if spin.two_j == 0:
        raise ValidationError("spin 0 gives the zero representation; the algebra needs j >= 1/2", "j")
    return build_lie_basis(AlgebraContext(spin.dim), list(spin_matrices(spin)))


def casimir(spin):
    """sum_a theta_a^2, which equals -j(j+1) times the identity."""
    return freeze(sum(t @ t for t in spin_matrices(spin)))


def block_potential(module_spins):
    """Block-diagonal gauge potential B_a = diag over module_spins of the spin-s theta_a."""
    if not module_spins:
        raise ValidationError("module spin list is empty", "spins")
    blocks = [spin_matrices(s) for s in module_spins]
    return tuple(freeze(scipy.linalg.block_diag(*(b[a] for b in blocks))) for a in range(3))


def build_scenario(spin, module_spins, words=DEFAULT_WORDS):
    """
    Fuzzy sphere scenario: n = 2j+1, the spin-j basis, and the flat hermitian connection
    whose gauge potential is the direct sum of the module spins.
    """
    basis_mats = spin_matrices(spin)
    potential = block_potential(module_spins)
    m = potential[0].shape[0]
    coeff_words = tuple(tuple(np.eye(3, dtype=np.complex128)[i] for i in w) for w in words)
    metadata = {
        "preset": "fuzzy-sphere",
        "j": str(spin),
        "module_spins": ",".join(str(s) for s in module_spins),
    }
    logging.info(f"Fuzzy sphere scenario j={spin}, spins [{metadata['module_spins']}], m={m}")
    return Scenario(spin.dim, basis_mats, (True, True, True), m, potential, coeff_words, metadata)


@dataclass(frozen=True, eq=False)
class SpinSetSummary:
    spins: tuple
    m: int
    max_curvature: float
    hermitian: bool
    observables: tuple


@dataclass(frozen=True, eq=False)
class GaugeCopyReport:
    j: SpinLabel
    words: tuple
    summaries: tuple
    verdicts: dict  # (index_a, index_b) -> EquivalenceVerdict


def gauge_copy_report(spin, spin_sets, words=DEFAULT_WORDS, seed=0, conjugate=False, **decide_kwargs):
    """
    Compares flat connections built from several spin contents.

    Every set gives zero curvature; the observables and the pairwise decider verdicts
    show which sets are gauge copies of each other.

    Args:
        spin (SpinLabel): Algebra spin j.
        spin_sets (list): Lists of SpinLabel, all with the same total dimension m.
        words (tuple): 0-based index words for the observable table.
        seed (int): Seeds the optional conjugation and the witness search.
        conjugate (bool): Gauge transform set k by a Haar unitary seeded with seed + k.

    Returns:
        GaugeCopyReport: Per-set summaries and pairwise verdicts.
    """
    if not spin_sets:
        raise ValidationError("no spin sets given", "sets")
    basis = spin_basis(spin)
    connections = []
    for k, spins in enumerate(spin_sets):
        potential = block_potential(spins)
        m = potential[0].shape[0]
        conn = make_connection(ModuleSpace(m, basis.n), basis, potential)
        if conjugate:
            conn = gauge_transform(conn, haar_unitary(m, seed + k))
        connections.append(conn)
    sizes = {c.m for c in connections}
    if len(sizes) != 1:
        raise DimensionError(f"spin sets give different module sizes {sorted(sizes)}", "sets")

    index_words = [index_word(basis, w) for w in words]
    summaries = []
    for spins, conn in zip(spin_sets, connections):
        summaries.append(SpinSetSummary(
            spins=tuple(spins),
            m=conn.m,
            max_curvature=max_curvature_norm(conn),
            hermitian=hermiticity_check(conn),
            observables=tuple(observable(conn, w) for w in index_words),
        ))
    verdicts = {}
    for a in range(len(connections)):
        for b in range(a + 1, len(connections)):
            verdicts[(a, b)] = decide_gauge_equivalence(connections[a], connections[b], seed=seed,
                                                        **decide_kwargs)
    worst = max(s.max_curvature for s in summaries)
    logging.info(f"Gauge copy report: {len(spin_sets)} sets, largest curvature {worst:.3e}")
    return GaugeCopyReport(spin, tuple(words), tuple(summaries), verdicts)
