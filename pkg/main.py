# main.py
import argparse
import logging
import sys

import numpy as np

from config import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS, EQUIV_TOL, LOG_LEVEL
from lib import fuzzy_sphere
from lib.derivation_calculus import DerivationVector, lie_basis_defects, maurer_cartan_defect, unit_derivation
from lib.errors import DimensionError, FuzzyHolonomyError, ValidationError
from lib.linalg_core import frobenius, make_rng, random_matrix
from lib.module_connection import compatibility_defect, curvature, is_flat, hermiticity_check
from lib.report import Report, digest_inputs, dumps_report, save_report
from lib.scenario import (
    format_letter,
    format_word,
    load_scenario,
    parse_coefficients,
    parse_words,
    save_scenario,
)
from lib.transport_observables import (
    decide_gauge_equivalence,
    make_word,
    observable_batch,
    ode_defect,
    transport_endomorphism,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INEQUIVALENT = 2

ODE_TOL = 1e-8
ODE_STEP = 1e-5

# Configure logging
logging.basicConfig(level=LOG_LEVEL, format='%(asctime)s - %(levelname)s - %(message)s')


class ArgumentParser(argparse.ArgumentParser):
    """Reports usage errors as ValidationError so they map to the validation exit code."""

    def error(self, message):
        raise ValidationError(message, "arguments")


def _common_options():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("human", "json"), default=argparse.SUPPRESS,
                        help="report format printed to stdout")
    common.add_argument("--report", default=argparse.SUPPRESS,
                        help="also write the report to this path")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="seed of every randomized step (default from FH_SEED)")
    common.add_argument("--log-level", type=str.upper, default=argparse.SUPPRESS,
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    return common


def build_parser():
    # Subcommands share one set of SUPPRESS options so flags given before the command survive
    common = _common_options()
    parser = ArgumentParser(prog="fuzzy-holonomy", parents=[_common_options()],
                            description="Gauge theory on matrix algebras: connections, transports and observables.")
    parser.set_defaults(format="human", report=None, seed=DEFAULT_SEED, log_level=LOG_LEVEL)
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check", parents=[common], help="validate a scenario and every invariant")
    check.add_argument("scenario")
    check.add_argument("--tol", type=float, default=DEFAULT_TOL)

    curv = sub.add_parser("curvature", parents=[common], help="curvature norms and flatness")
    curv.add_argument("scenario")
    curv.add_argument("--tol", type=float, default=DEFAULT_TOL)

    transport = sub.add_parser("transport", parents=[common], help="module transport along one derivation")
    transport.add_argument("scenario")
    transport.add_argument("--x", required=True, help='coefficients "1,0,0" or letter syntax "0.5*e1+e2"')
    transport.add_argument("--tau", type=float, default=1.0)
    transport.add_argument("--verify-ode", action="store_true")

    obs = sub.add_parser("observables", parents=[common], help="Wilson-type observables per word")
    obs.add_argument("scenario")
    obs.add_argument("--tau", type=float, default=1.0)
    obs.add_argument("--words", default=None, help='e.g. "e3;e3,e3;e1,e2,e3"')

    equiv = sub.add_parser("gauge-equiv", parents=[common], help="decide gauge equivalence of two scenarios")
    equiv.add_argument("a")
    equiv.add_argument("b")
    equiv.add_argument("--degree", type=int, default=None)
    equiv.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    equiv.add_argument("--tol", type=float, default=EQUIV_TOL)

    sphere = sub.add_parser("fuzzy-sphere", parents=[common], help="write a fuzzy sphere scenario")
    sphere.add_argument("--j", required=True)
    sphere.add_argument("--spins", required=True, help='module spins, e.g. "0,0" or "0.5"')
    sphere.add_argument("--out", required=True)

    demo = sub.add_parser("demo", parents=[common], help="built-in demonstrations")
    demos = demo.add_subparsers(dest="demo", required=True)
    copy = demos.add_parser("gauge-copy", parents=[common], help="flat connections that are not gauge equivalent")
    copy.add_argument("--j", required=True)
    copy.add_argument("--sets", required=True, help='spin sets separated by ";", e.g. "0,0;0.5"')
    copy.add_argument("--conjugate", action="store_true", help="gauge transform every set by a random unitary")
    copy.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    copy.add_argument("--tol", type=float, default=EQUIV_TOL)
    return parser


def parse_args(argv=None):
    return build_parser().parse_args(argv)


def _arguments(args, *names):
    return {name: getattr(args, name) for name in names}


def _scale(*mat_lists):
    return max([1.0] + [frobenius(a) for mats in mat_lists for a in mats])


# --- commands --------------------------------------------------------------------------

def cmd_check(args):
    scenario = load_scenario(args.scenario)
    report = Report("check", digest_inputs([args.scenario], _arguments(args, "tol")), args.seed,
                    {"tol": args.tol}, warnings=list(scenario.warnings))
    basis = scenario.basis
    conn = scenario.connection
    report.add("algebra n", basis.n)
    report.add("basis dimension d", basis.dim)
    report.add("module m", conn.m)

    scale = _scale(basis.theta_mats) ** 2
    for name, value in lie_basis_defects(basis).items():
        report.check(f"lie basis {name}", value, args.tol * scale)
    report.check("maurer-cartan defect", maurer_cartan_defect(basis), args.tol * scale)

    hermitian = hermiticity_check(conn, args.tol)
    report.add("hermitian connection", hermitian)
    if hermitian:
        rng = make_rng(args.seed)
        s = random_matrix(rng, conn.m, basis.n)
        t = random_matrix(rng, conn.m, basis.n)
        worst = max((compatibility_defect(conn, unit_derivation(basis, i), s, t) for i in basis.real_indices),
                    default=0.0)
        size = _scale(basis.theta_mats, conn.potential) * frobenius(s) * frobenius(t)
        report.check("compatibility defect", worst, args.tol * size)
    report.add("flat", is_flat(conn, args.tol))
    report.add("words", len(scenario.words))
    return report, EXIT_INVALID if report.failed else EXIT_OK


def cmd_curvature(args):
    scenario = load_scenario(args.scenario)
    report = Report("curvature", digest_inputs([args.scenario], _arguments(args, "tol")), args.seed,
                    {"tol": args.tol}, warnings=list(scenario.warnings))
    conn = scenario.connection
    scale = _scale(conn.potential) ** 2
    d = conn.basis.dim
    for i in range(d):
        for j in range(i + 1, d):
            report.check(f"||F(e{i + 1},e{j + 1})||", frobenius(curvature(conn, i, j)), args.tol * scale)
    report.add("flat", is_flat(conn, args.tol))
    return report, EXIT_OK


def cmd_transport(args):
    scenario = load_scenario(args.scenario)
    report = Report("transport", digest_inputs([args.scenario], _arguments(args, "x", "tau", "verify_ode")),
                    args.seed, {"ode": ODE_TOL} if args.verify_ode else {}, warnings=list(scenario.warnings))
    conn = scenario.connection
    X = DerivationVector(parse_coefficients(args.x, conn.basis.dim))
    endo = transport_endomorphism(conn, X, args.tau)
    report.add("X", format_letter(X.coeffs))
    report.add("tau", args.tau)
    report.add("transport endomorphism", np.asarray(endo))
    report.add("||exp(tau B(X))||_F", frobenius(endo))
    report.add("det exp(tau B(X))", complex(np.linalg.det(endo)))
    report.add("unitary", bool(frobenius(endo.conj().T @ endo - np.eye(conn.m)) <= DEFAULT_TOL * conn.m))
    if args.verify_ode:
        s = random_matrix(make_rng(args.seed), conn.m, conn.basis.n)
        norm = frobenius(s)
        coarse = ode_defect(conn, X, args.tau, ODE_STEP, s)
        fine = ode_defect(conn, X, args.tau, ODE_STEP / 2, s)
        report.check("ode defect", coarse, ODE_TOL * max(1.0, norm))
        if fine > 0:
            report.add("ode defect ratio (h -> h/2)", coarse / fine)
        else:
            report.warnings.append("ode defect vanishes at h/2; convergence ratio undefined")
    return report, EXIT_INVALID if report.failed else EXIT_OK


def cmd_observables(args):
    scenario = load_scenario(args.scenario)
    basis = scenario.basis
    words = parse_words(args.words, basis.dim) if args.words else scenario.words
    if not words:
        raise ValidationError("scenario has no words; pass --words", "words")
    report = Report("observables", digest_inputs([args.scenario], _arguments(args, "tau", "words")), args.seed,
                    warnings=list(scenario.warnings))
    word_objects = [make_word(basis, list(w)) for w in words]
    values = observable_batch(scenario.connection, word_objects, args.tau)
    report.add("tau", args.tau)
    for w, value in zip(words, values):
        report.add("W(" + " ".join(format_letter(letter) for letter in w) + ")", value)
    return report, EXIT_OK


def cmd_gauge_equiv(args):
    a = load_scenario(args.a)
    b = load_scenario(args.b)
    if a.basis.dim != b.basis.dim or a.basis.n != b.basis.n or frobenius(a.basis.stacked - b.basis.stacked) > \
            DEFAULT_TOL * _scale(a.basis.theta_mats):
        raise DimensionError("scenarios use different Lie bases", "lie_basis")
    report = Report("gauge-equiv",
                    digest_inputs([args.a, args.b], _arguments(args, "degree", "trials", "tol", "seed")),
                    args.seed, {"tol": args.tol}, warnings=list(a.warnings) + list(b.warnings))
    verdict = decide_gauge_equivalence(a.connection, b.connection, max_degree=args.degree, trials=args.trials,
                                       tol=args.tol, seed=args.seed)
    _add_verdict(report, "", verdict, args.tol)
    return report, EXIT_OK if verdict.equivalent else EXIT_INEQUIVALENT


def _add_verdict(report, prefix, verdict, tol):
    report.add(f"{prefix}verdict", "equivalent" if verdict.equivalent else "inequivalent")
    report.add(f"{prefix}max trace gap", verdict.max_trace_gap, tolerance=tol)
    report.add(f"{prefix}trace words compared", verdict.words_compared)
    if verdict.separating_word is not None:
        report.add(f"{prefix}separating word", format_word(verdict.separating_word))
    if verdict.equivalent:
        report.add(f"{prefix}trials used", verdict.trials_used)
        report.add(f"{prefix}trace agreement only", verdict.trace_agreement_only)
    if verdict.witness is not None:
        report.add(f"{prefix}witness residual", verdict.witness_residual, tolerance=tol)
        report.add(f"{prefix}witness", np.asarray(verdict.witness))
    report.warnings.extend(verdict.notes)


def cmd_fuzzy_sphere(args):
    spin = fuzzy_sphere.SpinLabel.parse(args.j)
    spins = _parse_spin_list(args.spins)
    scenario = fuzzy_sphere.build_scenario(spin, spins)
    save_scenario(scenario, args.out)
    reloaded = load_scenario(args.out)
    report = Report("fuzzy-sphere", digest_inputs((), _arguments(args, "j", "spins")), args.seed,
                    warnings=list(reloaded.warnings))
    report.add("j", str(spin))
    report.add("module spins", ",".join(str(s) for s in spins))
    report.add("algebra n", reloaded.algebra_n)
    report.add("module m", reloaded.module_m)
    report.add("out", args.out)
    report.add("flat", is_flat(reloaded.connection))
    return report, EXIT_OK


def _parse_spin_list(text):
    spins = [fuzzy_sphere.SpinLabel.parse(part) for part in text.split(",") if part.strip()]
    if not spins:
        raise ValidationError(f"no spins in {text!r}", "spins")
    return spins


def cmd_gauge_copy(args):
    spin = fuzzy_sphere.SpinLabel.parse(args.j)
    spin_sets = [_parse_spin_list(part) for part in args.sets.split(";") if part.strip()]
    report = Report("demo gauge-copy",
                    digest_inputs((), _arguments(args, "j", "sets", "conjugate", "trials", "tol", "seed")),
                    args.seed, {"flat": DEFAULT_TOL, "tol": args.tol})
    result = fuzzy_sphere.gauge_copy_report(spin, spin_sets, seed=args.seed, conjugate=args.conjugate,
                                            trials=args.trials, tol=args.tol)
    for k, summary in enumerate(result.summaries, 1):
        name = "{" + ",".join(str(s) for s in summary.spins) + "}"
        report.add(f"set {k} spins", name)
        report.check(f"set {k} max ||F||", summary.max_curvature, DEFAULT_TOL)
        report.add(f"set {k} hermitian", summary.hermitian)
        for word, value in zip(result.words, summary.observables):
            report.add(f"set {k} W({format_word(word)})", value)
    any_inequivalent = False
    for (a, b), verdict in sorted(result.verdicts.items()):
        _add_verdict(report, f"sets {a + 1}~{b + 1} ", verdict, args.tol)
        any_inequivalent = any_inequivalent or not verdict.equivalent
    if report.failed:
        return report, EXIT_INVALID
    return report, EXIT_INEQUIVALENT if any_inequivalent else EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "curvature": cmd_curvature,
    "transport": cmd_transport,
    "observables": cmd_observables,
    "gauge-equiv": cmd_gauge_equiv,
    "fuzzy-sphere": cmd_fuzzy_sphere,
    "demo": cmd_gauge_copy,
}


def run_command(args):
    """
    Runs one parsed command.

    Returns:
        tuple: (Report, exit code) with 0 for success, 1 for validation or file errors and
        2 when a gauge-equivalence verdict is "inequivalent".
    """
    logging.getLogger().setLevel(args.log_level)
    command = args.command if args.command != "demo" else f"demo {args.demo}"
    logging.info(f"=== Running: {command} ===")
    try:
        return COMMANDS[args.command](args)
    except FuzzyHolonomyError as e:
        logging.error(f"{command} failed: {e}")
        return _error_report(command, args, e), EXIT_INVALID
    except OSError as e:
        logging.error(f"{command} failed on a file: {e}")
        return _error_report(command, args, e), EXIT_INVALID


def _error_report(command, args, error):
    report = Report(command, digest_inputs((), {"error": type(error).__name__}), args.seed)
    report.add("error", str(error), passed=False)
    field = getattr(error, "field", None)
    if field:
        report.add("field", field)
    return report


def main(argv=None):
    try:
        args = parse_args(argv)
    except ValidationError as e:
        logging.error(f"Invalid arguments: {e}")
        return EXIT_INVALID
    report, code = run_command(args)
    sys.stdout.write(dumps_report(report, args.format))
    if args.report:
        try:
            save_report(report, args.report, args.format)
        except OSError as e:
            logging.error(f"Could not write report: {e}")
            return EXIT_INVALID
    return code


if __name__ == "__main__":
    sys.exit(main())
