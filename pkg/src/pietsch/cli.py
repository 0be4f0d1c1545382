"""Command-line front end.

Exit codes: 0 success, 2 input error, 3 tolerance failure (or a check that
came back negative), 4 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from . import __version__
from .bruteforce import pi_by_multisets
from .core_model import InstanceError, SummingInstance, instance_from_dict, validate_axioms
from .corpus import acceptance_corpus, shipped_families, summary_row
from .domination import (
    CERTIFICATE_TOL,
    EQUIVALENCE_TOL,
    DominationCertificate,
    NotSummingError,
    check_equivalence,
    dominating_measure,
    residuals_for,
    summing_constant,
    verify_certificate,
)
from .instances import LinearOperatorSpec, prepare_from_spec, prepare_linear
from .balls import Discretization, norm
from .lp_core import IterationLimitError
from .semi_infinite import DEFAULT_GAP_TOL, DEFAULT_MAX_ITER, EuclideanSphereOracle, solve_with_oracle

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TOLERANCE = 3
EXIT_NONCONVERGED = 4

COMMANDS = ("validate", "pi", "measure", "verify", "duality", "bruteforce", "exchange", "suite")
ORACLES = ("circle", "sphere")
SUITE_FIELDS = ("family", "m", "k", "p", "pi", "c", "gap", "status")


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    tol: float | None = None
    seed: int = 0
    max_iter: int | None = None
    oracle: str = "circle"
    bound: int = 10
    certificate: str | None = None

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise InputError(f"unknown command {self.command!r}")
        if self.tol is not None and not self.tol > 0:
            raise InputError("--tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise InputError("--max-iter must be >= 1")
        if self.bound < 1:
            raise InputError("--bound must be >= 1")


def format_float(v: float) -> str:
    """Fixed 17-significant-digit rendering so artifacts are byte-stable."""
    if not math.isfinite(v):
        raise ValueError(f"non-finite float {v!r} in artifact")
    return format(v, ".17g")


def _encode(obj, indent: int | None) -> str:
    """Sorted-key JSON; ``indent=None`` gives a single line."""
    sub = None if indent is None else indent + 1
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{json.dumps(str(k))}: {_encode(obj[k], sub)}" for k in sorted(obj)]
        if indent is None:
            return "{" + ", ".join(items) + "}"
        pad, inner = "  " * indent, "  " * sub
        return "{\n" + ",\n".join(inner + it for it in items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        return "[" + ", ".join(_encode(v, sub) for v in obj) + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    return json.dumps(str(obj))


def _dump(obj) -> str:
    return _encode(obj, 0) + "\n"


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    with os.fdopen(fd, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _read_json(path: str | None, what: str = "--input"):
    if path is None:
        raise InputError(f"{what} is required")
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {what} {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _load_instance(obj) -> SummingInstance:
    if isinstance(obj, dict) and "builder" in obj:
        return prepare_from_spec(obj).instance()
    if not isinstance(obj, dict):
        raise InputError("expected a JSON object describing an instance or a family spec")
    return instance_from_dict(obj)


def _load_many(obj) -> list[SummingInstance]:
    if isinstance(obj, dict) and "instances" in obj:
        obj = obj["instances"]
    if isinstance(obj, list):
        out = []
        for i, item in enumerate(obj):
            try:
                out.append(_load_instance(item))
            except (InstanceError, InputError) as exc:
                raise InputError(f"instances[{i}]: {exc}") from None
        return out
    return [_load_instance(obj)]


def _witness_dict(pi, witness) -> dict:
    if witness is None:
        return {"weights": None, "value": None, "active_row": None}
    return {"weights": [float(v) for v in witness.weights], "value": float(witness.value),
            "active_row": int(witness.active_row)}


def _finite(v):
    return None if v is None or (isinstance(v, float) and not math.isfinite(v)) else v


# --------------------------------------------------------------------------
# commands


def cmd_validate(cfg: RunConfig) -> int:
    obj = _read_json(cfg.input)
    if isinstance(obj, dict) and "builder" in obj:
        prep = prepare_from_spec(obj)
        inst = prep.instance()
        samples = prep.axiom_samples(100, np.random.default_rng(cfg.seed))
        rep = validate_axioms((prep.r_eval, prep.s_eval), samples, null_element=prep.null_element)
        out = {
            "schema_version": 1,
            "family": inst.family,
            "schema_ok": True,
            "null_element_ok": rep.null_element_ok,
            "r_subhomogeneous_ok": rep.r_subhomogeneous_ok,
            "s_superhomogeneous_ok": rep.s_superhomogeneous_ok,
            "continuity": rep.continuity,
            "samples_checked": rep.samples_checked,
            "violations": [
                {"axiom": v.axiom, "eta": v.eta, "lhs": v.lhs, "rhs": v.rhs} for v in rep.violations[:50]
            ],
            "invalid_samples": len(rep.invalid_samples),
        }
        _write(cfg.output, _dump(out))
        return EXIT_OK if rep.ok else EXIT_TOLERANCE
    inst = _load_instance(obj)
    out = {"schema_version": 1, "family": inst.family, "schema_ok": True, "k": inst.k, "m": inst.m,
           "null_pair": inst.null_pair, "continuity": "not applicable (finite K)",
           "axioms": "not checked (raw instance carries no evaluators)"}
    _write(cfg.output, _dump(out))
    return EXIT_OK


def cmd_pi(cfg: RunConfig) -> int:
    inst = _load_instance(_read_json(cfg.input))
    pi, witness = summing_constant(inst)
    out = {
        "schema_version": 1,
        "pi": _finite(float(pi)),
        "status": "not summing" if math.isinf(pi) else "summing",
        "witness": _witness_dict(pi, witness),
        "instance_hash": inst.content_hash(),
    }
    _write(cfg.output, _dump(out))
    return EXIT_OK


def cmd_measure(cfg: RunConfig) -> int:
    inst = _load_instance(_read_json(cfg.input))
    try:
        cert = dominating_measure(inst)
    except NotSummingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    _write(cfg.output, _dump(cert.to_dict()))
    return EXIT_OK


def _certificate_from(obj, inst: SummingInstance) -> DominationCertificate:
    for key in ("c", "mu"):
        if key not in obj:
            raise InputError(f"certificate: missing field {key!r}")
    mu = np.asarray(obj["mu"], dtype=float)
    if mu.shape != (inst.k,):
        raise InputError(f"certificate: field 'mu' has length {mu.size}, instance has k={inst.k}")
    c = float(obj["c"])
    return DominationCertificate(c, mu, residuals_for(inst, c, mu), float(obj.get("p", inst.p)),
                                 obj.get("instance_hash", ""))


def cmd_verify(cfg: RunConfig) -> int:
    inst = _load_instance(_read_json(cfg.input))
    cobj = _read_json(cfg.certificate, "--certificate")
    cert = _certificate_from(cobj, inst)
    if cert.instance_hash and cert.instance_hash != inst.content_hash():
        print("warning: certificate instance_hash does not match the instance", file=sys.stderr)
    try:
        chk = verify_certificate(inst, cert, cfg.tol)
    except ValueError as exc:
        raise InputError(f"certificate: {exc}") from None
    out = {"schema_version": 1, "valid": chk.valid, "worst_pair": chk.worst_pair,
           "worst_residual": chk.worst_residual, "tol": chk.tol}
    _write(cfg.output, _dump(out))
    print(f"{'valid' if chk.valid else 'INVALID'}: worst residual {chk.worst_residual!r} at pair {chk.worst_pair}",
          file=sys.stderr)
    return EXIT_OK if chk.valid else EXIT_TOLERANCE


def cmd_duality(cfg: RunConfig) -> int:
    tol = EQUIVALENCE_TOL if cfg.tol is None else cfg.tol
    if cfg.input is None:
        insts = [prep.instance() for prep in shipped_families(cfg.seed).values()]
    else:
        insts = _load_many(_read_json(cfg.input))
    reports = []
    ok = True
    for inst in insts:
        rep = check_equivalence(inst, tol)
        ok &= rep.ok
        reports.append({"family": inst.family, "k": inst.k, "m": inst.m, "p": inst.p,
                        "pi": _finite(rep.pi), "c": _finite(rep.c), "gap": _finite(rep.gap),
                        "ok": rep.ok, "primal_status": rep.primal_status, "dual_status": rep.dual_status})
    _write(cfg.output, _dump({"schema_version": 1, "tol": tol, "all_ok": ok, "reports": reports}))
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_bruteforce(cfg: RunConfig) -> int:
    inst = _load_instance(_read_json(cfg.input))
    rep = pi_by_multisets(inst, cfg.bound)
    _write(cfg.output, _dump(rep.to_dict()))
    return EXIT_OK


def _exchange_problem(obj, oracle_name: str):
    for key in ("p", "test_vectors"):
        if key not in obj:
            raise InputError(f"exchange input: missing field {key!r}")
    X = np.atleast_2d(np.asarray(obj["test_vectors"], dtype=float))
    d = X.shape[1]
    if oracle_name == "circle" and d != 2:
        raise InputError(f"exchange input: oracle 'circle' needs 2-dimensional test_vectors, got {d}")
    T = np.asarray(obj.get("operator", np.eye(d).tolist()), dtype=float)
    lam = np.asarray(obj.get("scalars", np.ones(len(X)).tolist()), dtype=float)
    if T.ndim != 2 or T.shape[1] != d:
        raise InputError(f"exchange input: field 'operator' must have {d} columns")
    if lam.shape != (len(X),):
        raise InputError(f"exchange input: field 'scalars' must have length {len(X)}")
    s = np.abs(lam) * norm(X @ T.T, obj.get("target_norm", "l2"))
    seeds = obj.get("seed_points") or [np.eye(d)[0].tolist()]
    seeds = [tuple(float(v) for v in pt) for pt in seeds]
    oracle = EuclideanSphereOracle(X, lam, float(obj["p"]))
    return s, float(obj["p"]), oracle, seeds


def cmd_exchange(cfg: RunConfig) -> int:
    if cfg.oracle not in ORACLES:
        raise InputError(f"unknown oracle {cfg.oracle!r}; built-in oracles: {', '.join(ORACLES)}")
    s, p, oracle, seeds = _exchange_problem(_read_json(cfg.input), cfg.oracle)
    res = solve_with_oracle(s, p, oracle, seeds, gap_tol=cfg.tol or DEFAULT_GAP_TOL,
                            max_iter=cfg.max_iter or DEFAULT_MAX_ITER)
    lines = [_encode(r.to_dict(), None) for r in res.history.iterations]
    lines.append(_encode({"final_status": res.status}, None))
    _write(cfg.output, "\n".join(lines) + "\n")
    summary = {"pi": _finite(res.pi), "lower_bound": _finite(res.lower_bound),
               "upper_bound": _finite(res.upper_bound), "oracle_calls": res.oracle_calls,
               "status": res.status, "converged": res.converged}
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return EXIT_OK if res.converged else EXIT_NONCONVERGED


def suite_rows(seed: int = 2024, tol: float = EQUIVALENCE_TOL) -> tuple[list[dict], bool]:
    """Run the random corpus, every shipped family and the circle anchor."""
    rows = []
    ok = True
    entries = [(inst.family, inst) for inst in acceptance_corpus(seed)]
    entries += [(name, prep.instance()) for name, prep in shipped_families(seed).items()]
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((32, 2))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    entries.append(("linear-circle-720", prepare_linear(
        LinearOperatorSpec(np.eye(2), X, None, Discretization("sphere-grid", 720)), 2.0).instance()))
    for family, inst in entries:
        rep = check_equivalence(inst, tol)
        status = "ok" if rep.ok else ("not summing" if math.isinf(rep.pi) else "gap exceeded")
        if rep.ok:
            chk = verify_certificate(inst, rep.certificate)
            if not chk.valid:
                status = "invalid certificate"
        ok &= status == "ok"
        rows.append(summary_row(family, inst, rep.pi, rep.c, rep.gap, status))
    return rows, ok


def cmd_suite(cfg: RunConfig) -> int:
    rows, ok = suite_rows(2024 if cfg.seed == 0 else cfg.seed, EQUIVALENCE_TOL if cfg.tol is None else cfg.tol)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUITE_FIELDS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _write(cfg.output, buf.getvalue())
    bad = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} entries, {bad} failing", file=sys.stderr)
    return EXIT_OK if ok else EXIT_TOLERANCE


HANDLERS = {
    "validate": cmd_validate,
    "pi": cmd_pi,
    "measure": cmd_measure,
    "verify": cmd_verify,
    "duality": cmd_duality,
    "bruteforce": cmd_bruteforce,
    "exchange": cmd_exchange,
    "suite": cmd_suite,
}


def run(cfg: RunConfig) -> int:
    try:
        return HANDLERS[cfg.command](cfg)
    except (InputError, InstanceError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except IterationLimitError as exc:
        print(f"non-convergence: {exc} (best value {exc.best_value!r})", file=sys.stderr)
        return EXIT_NONCONVERGED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pietsch", description="Summing constants and dominating measures on finite instances.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", "-i")
    parser.add_argument("--output", "-o")
    parser.add_argument("--certificate", help="certificate JSON (verify)")
    parser.add_argument("--tol", type=float)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-iter", type=int, dest="max_iter")
    parser.add_argument("--oracle", default="circle", help=f"built-in K-oracle for exchange: {', '.join(ORACLES)}")
    parser.add_argument("--bound", type=int, default=10, help="multiplicity bound for bruteforce")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(**vars(args))
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
