# lib/scenario.py
"""
Scenario files: the JSON bundle of algebra size, Lie basis, module size, gauge potential
and observable words that every CLI command works from.

Complex numbers are stored as [re, im] pairs and matrices as rows of such pairs, so a
load/save cycle reproduces every finite double bit for bit.
"""
import json
import logging
import re
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from lib.derivation_calculus import AlgebraContext, build_lie_basis
from lib.errors import DimensionError, ScenarioFormatError, ValidationError
from lib.module_connection import ModuleSpace, hermiticity_check, make_connection
from lib.transport_observables import make_word

SCENARIO_KEYS = ("algebra_n", "lie_basis", "module_m", "gauge_potential", "words", "metadata")


@dataclass(frozen=True, eq=False)
class Scenario:
    algebra_n: int
    lie_basis: tuple
    real_hints: tuple
    module_m: int
    gauge_potential: tuple
    words: tuple
    metadata: dict = field(default_factory=dict)
    warnings: tuple = ()

    @cached_property
    def basis(self):
        return build_lie_basis(AlgebraContext(self.algebra_n), list(self.lie_basis))

    @cached_property
    def connection(self):
        return make_connection(ModuleSpace(self.module_m, self.algebra_n), self.basis, self.gauge_potential)

    def word_objects(self):
        return [make_word(self.basis, list(w)) for w in self.words]


# --- encoding --------------------------------------------------------------------------

def encode_complex(z):
    z = complex(z)
    return [float(z.real), float(z.imag)]


def encode_matrix(a):
    return [[encode_complex(x) for x in row] for row in np.asarray(a)]


def _decode_complex(value, path):
    if isinstance(value, bool):
        raise ScenarioFormatError("expected a number or [re, im] pair, got a boolean", path)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in value):
        return complex(value[0], value[1])
    raise ScenarioFormatError(f"expected a number or [re, im] pair, got {value!r}", path)


def decode_matrix(value, path):
    if not isinstance(value, list) or not value or not all(isinstance(r, list) for r in value):
        raise ScenarioFormatError("expected a non-empty list of rows", path)
    width = len(value[0])
    rows = []
    for i, row in enumerate(value):
        if len(row) != width:
            raise DimensionError(f"row {i} has {len(row)} entries, expected {width}", path)
        rows.append([_decode_complex(x, f"{path}[{i}][{j}]") for j, x in enumerate(row)])
    arr = np.array(rows, dtype=np.complex128)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix has non-finite entries", path)
    return arr


def scenario_to_dict(scenario):
    basis_records = []
    for mat, hint in zip(scenario.lie_basis, scenario.real_hints):
        record = {"matrix": encode_matrix(mat)}
        if hint is not None:
            record["real"] = bool(hint)
        basis_records.append(record)
    return {
        "algebra_n": scenario.algebra_n,
        "lie_basis": basis_records,
        "module_m": scenario.module_m,
        "gauge_potential": [encode_matrix(b) for b in scenario.gauge_potential],
        "words": [[[encode_complex(x) for x in letter] for letter in word] for word in scenario.words],
        "metadata": dict(scenario.metadata),
    }


def scenario_from_dict(data):
    """
    Decodes and shape-checks a scenario dictionary. Does not build the Lie basis.

    Raises:
        ScenarioFormatError: On missing keys or wrongly typed values, naming the field path.
    """
    if not isinstance(data, dict):
        raise ScenarioFormatError("top level must be a JSON object")
    for key in ("algebra_n", "lie_basis", "module_m", "gauge_potential"):
        if key not in data:
            raise ScenarioFormatError("missing required key", key)
    n = data["algebra_n"]
    m = data["module_m"]
    for key, value in (("algebra_n", n), ("module_m", m)):
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise ScenarioFormatError(f"expected a positive integer, got {value!r}", key)

    if not isinstance(data["lie_basis"], list):
        raise ScenarioFormatError("expected a list of basis records", "lie_basis")
    mats, hints = [], []
    for i, record in enumerate(data["lie_basis"]):
        path = f"lie_basis[{i}]"
        if not isinstance(record, dict) or "matrix" not in record:
            raise ScenarioFormatError("expected an object with a 'matrix' key", path)
        mat = decode_matrix(record["matrix"], f"{path}.matrix")
        if mat.shape != (n, n):
            raise DimensionError(f"expected shape ({n}, {n}), got {mat.shape}", path)
        hint = record.get("real")
        if hint is not None and not isinstance(hint, bool):
            raise ScenarioFormatError(f"'real' must be a boolean, got {hint!r}", f"{path}.real")
        mats.append(mat)
        hints.append(hint)
    d = len(mats)

    if not isinstance(data["gauge_potential"], list):
        raise ScenarioFormatError("expected a list of matrices", "gauge_potential")
    if len(data["gauge_potential"]) != d:
        raise DimensionError(f"has {len(data['gauge_potential'])} entries, lie_basis has {d}", "gauge_potential")
    potential = []
    for i, value in enumerate(data["gauge_potential"]):
        path = f"gauge_potential[{i}]"
        mat = decode_matrix(value, path)
        if mat.shape != (m, m):
            raise DimensionError(f"expected shape ({m}, {m}), got {mat.shape}", path)
        potential.append(mat)

    words = []
    raw_words = data.get("words", [])
    if not isinstance(raw_words, list):
        raise ScenarioFormatError("expected a list of words", "words")
    for w, word in enumerate(raw_words):
        if not isinstance(word, list) or not word:
            raise ScenarioFormatError("a word is a non-empty list of letters", f"words[{w}]")
        letters = []
        for k, letter in enumerate(word):
            path = f"words[{w}][{k}]"
            if not isinstance(letter, list) or len(letter) != d:
                raise DimensionError(f"a letter needs {d} coefficients", path)
            letters.append(np.array([_decode_complex(x, f"{path}[{j}]") for j, x in enumerate(letter)]))
        words.append(tuple(letters))

    metadata = data.get("metadata", {})
    if not isinstance(metadata, dict) or not all(isinstance(k, str) and isinstance(v, str)
                                                 for k, v in metadata.items()):
        raise ScenarioFormatError("metadata must map strings to strings", "metadata")
    return Scenario(n, tuple(mats), tuple(hints), m, tuple(potential), tuple(words), dict(metadata))


def validate_scenario(scenario):
    """
    Builds the Lie basis and connection and runs the hermiticity check.

    Returns:
        Scenario: The same data with load warnings recorded.
    """
    warnings = []
    basis = scenario.basis
    for i, (hint, flag) in enumerate(zip(scenario.real_hints, basis.real_flags)):
        if hint is not None and hint != flag:
            warnings.append(f"lie_basis[{i}]: real hint {hint} disagrees with computed flag {flag}")
    conn = scenario.connection
    if not hermiticity_check(conn):
        warnings.append("gauge_potential: connection is not hermitian")
    scenario.word_objects()
    for message in warnings:
        logging.warning(message)
    return Scenario(scenario.algebra_n, scenario.lie_basis, scenario.real_hints, scenario.module_m,
                    scenario.gauge_potential, scenario.words, scenario.metadata, tuple(warnings))


def load_scenario(path):
    """
    Reads, decodes and validates a scenario file.

    Raises:
        ScenarioFormatError: On malformed JSON or structure.
        ValidationError: On mathematical validation failures, naming the offending field.
    """
    logging.info(f"Loading scenario {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ScenarioFormatError(f"malformed JSON: {e}", str(path))
    except UnicodeDecodeError as e:
        raise ScenarioFormatError(f"file is not valid UTF-8: {e}", str(path))
    return validate_scenario(scenario_from_dict(data))


def dumps_scenario(scenario):
    return json.dumps(scenario_to_dict(scenario), indent=2)


def save_scenario(scenario, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps_scenario(scenario))
        f.write("\n")
    logging.info(f"Saved scenario to {path}")


# --- command-line word syntax ----------------------------------------------------------

_TERM = re.compile(r"^\s*([+-]?)\s*(?:([0-9.eE+-]+)\s*\*\s*)?e(\d+)\s*$")


def parse_letter(text, d):
    """
    Parses "e3" or "0.5*e1+1*e2" (1-based basis indices) into a real coefficient vector.
    """
    coeffs = np.zeros(d, dtype=np.complex128)
    # split on + or - that starts a new term (not inside an exponent like 1e-3)
    terms = re.split(r"(?<![eE*])(?=[+-])", text.strip())
    terms = [t for t in terms if t.strip() and t.strip() not in "+"]
    if not terms:
        raise ValidationError(f"empty letter {text!r}", "words")
    for term in terms:
        match = _TERM.match(term.lstrip("+"))
        if not match:
            raise ValidationError(f"cannot parse letter term {term!r} in {text!r}", "words")
        sign, coef, index = match.groups()
        value = float(coef) if coef else 1.0
        if sign == "-":
            value = -value
        i = int(index)
        if not 1 <= i <= d:
            raise ValidationError(f"basis index e{i} out of range e1..e{d}", "words")
        coeffs[i - 1] += value
    return coeffs


def parse_word(text, d):
    """Letters separated by commas, e.g. "e1,e2,e3"."""
    return tuple(parse_letter(part, d) for part in text.split(",") if part.strip())


def parse_words(text, d):
    """Words separated by semicolons, e.g. "e3;e3,e3;e1,e2,e3"."""
    return tuple(parse_word(part, d) for part in text.split(";") if part.strip())


def parse_coefficients(text, d):
    """A derivation given either as letter syntax ("e3") or as d comma-separated numbers."""
    parts = [p.strip() for p in text.split(",")]
    try:
        values = [complex(p.replace("i", "j")) for p in parts]
    except ValueError:
        return parse_letter(text, d)
    if len(values) != d:
        raise DimensionError(f"expected {d} coefficients, got {len(values)}", "--x")
    return np.array(values, dtype=np.complex128)


def format_word(indices):
    """1-based label of an index word, e.g. (0, 1, 2) -> "e1 e2 e3"."""
    return " ".join(f"e{i + 1}" for i in indices)


def format_letter(coeffs):
    terms = []
    for i, x in enumerate(coeffs):
        if x == 0:
            continue
        if x == 1:
            terms.append(f"e{i + 1}")
        elif x.imag == 0:
            terms.append(f"{x.real:g}*e{i + 1}")
        else:
            terms.append(f"({x.real:g}{x.imag:+g}i)*e{i + 1}")
    return "+".join(terms) if terms else "0"
