"""Command-line front end.

Every command writes one JSON report (to ``--out`` or stdout) and exits with
0 for a true verdict or a successful evaluation, 1 for false, 2 for
undetermined and 3 for input errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import functionals as fn
from .cyclic import CyclePolicy
from .dist import InputError, ReferenceMeasure, quantile_cells, read_csv, reference_measure, to_csv
from .orders import (
    MEAN_TOL,
    MONO_TOL,
    FusionStep,
    fuse,
    is_bl_less_dispersed_1d,
    is_mpir,
    is_mu_bl,
    lm_decompose,
    stochastic_dominance,
    strong_dispersive_check,
)
from .quantile import is_c_comonotonic, is_mu_comonotonic, mu_quantile
from .sharing import insurance_premium, pareto_check, read_allocation_csv
from .verdict import Holds, OrderVerdict, to_jsonable

EXIT = {Holds.TRUE: 0, Holds.FALSE: 1, Holds.UNDETERMINED: 2}
INPUT_ERROR = 3

_REF_KINDS = {"grid": "grid", "sobol": "low-discrepancy", "iid": "iid-uniform"}
ORDER_KINDS = (
    "sd",
    "mpir",
    "bl",
    "mmpir",
    "mubl",
    "mummpir",
    "lm",
    "strong-dispersive",
    "comonotone",
    "c-comonotone",
    "pareto",
)
AVERSION_TESTS = ("concave", "pessimistic", "mmpir", "mu-mmpir", "weak", "mpir-averse", "risk")


class _Run:
    """Collects inputs, parameters and the outcome of one command."""

    def __init__(self, args):
        self.args = args
        self.inputs: dict = {}
        self.parameters: dict = {}

    def read(self, name: str, path: str | None, reader=read_csv):
        if path is None:
            raise InputError(f"--{name} is required")
        p = Path(path)
        if not p.is_file():
            raise InputError(f"no such file: {path}")
        self.inputs[name] = {"path": str(path), "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
        try:
            return reader(p)
        except InputError as exc:
            exc.args = (f"{path}: {exc}",)
            raise

    def spec(self, path: str | None, label: str = "spec") -> dict:
        if path is None:
            return {}
        p = Path(path)
        if not p.is_file():
            raise InputError(f"no such file: {path}")
        self.inputs[label] = {"path": str(path), "sha256": hashlib.sha256(p.read_bytes()).hexdigest()}
        try:
            return json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc.msg})", line=exc.lineno) from None


# ---------------------------------------------------------------- parsing helpers


def parse_ref(text: str | None, d: int, seed: int) -> ReferenceMeasure | None:
    if text is None:
        return None
    kind, _, m = text.partition(":")
    if kind not in _REF_KINDS or not m.isdigit():
        raise InputError(f"--ref must be grid:m, sobol:m or iid:m, got {text!r}")
    return reference_measure(_REF_KINDS[kind], int(m), d, seed=seed)


def _need_ref(ref):
    if ref is None:
        raise InputError("--ref is required for this command")
    return ref


def _vector(text: str | None, d: int, name: str):
    if text is None:
        return None
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise InputError(f"--{name} must be comma-separated numbers") from None
    if v.size != d:
        raise InputError(f"--{name} needs {d} components")
    return v


def build_weight_map(cfg: dict, ref: ReferenceMeasure) -> fn.MultiRDUSpec:
    fam = cfg.get("family", "affine")
    d = ref.dim
    if fam == "affine":
        return fn.MultiRDUSpec.affine(ref, float(cfg.get("alpha", 1.0)), cfg.get("u0", np.zeros(d)))
    if fam == "constant":
        return fn.MultiRDUSpec.constant(ref, cfg.get("value", np.ones(d)))
    if fam == "linear":
        M = np.asarray(cfg["matrix"], dtype=float).reshape(d, d)
        u0 = np.asarray(cfg.get("u0", np.zeros(d)), dtype=float)
        return fn.MultiRDUSpec.from_function(ref, lambda u: u @ M.T + u0)
    if fam == "tabulated":
        return fn.MultiRDUSpec(ref, np.asarray(cfg["values"], dtype=float))
    raise InputError(f"unknown weight_map family {fam!r}")


def build_functional(cfg: dict, distortion: str | None, name: str | None, ref, d: int):
    """Functional object from a spec dict plus command-line overrides."""
    kind = name or cfg.get("functional") or ("rdu1d" if distortion else None)
    if kind is None:
        raise InputError("choose a functional with --functional or --spec")
    if kind == "expectation":
        return fn.Expectation(tuple(cfg["w"]) if "w" in cfg else None)
    if kind == "rdu1d":
        if distortion is not None:
            f = fn.DistortionFunction.parse(distortion)
        elif "distortion" in cfg:
            f = fn.DistortionFunction.from_dict(cfg["distortion"])
        else:
            raise InputError("rdu1d needs a distortion")
        return fn.RankDependentUtility(f)
    if kind == "yaari":
        alphas = tuple(float(a) for a in cfg.get("alphas", [1.0] * d))
        phis = cfg.get("phis")
        if phis is None:
            if "distortion" in cfg or distortion is not None:
                f = fn.DistortionFunction.parse(distortion) if distortion else fn.DistortionFunction.from_dict(cfg["distortion"])
                phis = [fn.QuantileWeight.from_distortion(f)] * len(alphas)
            else:
                phis = [fn.QuantileWeight.constant(1.0)] * len(alphas)
        else:
            phis = [fn.QuantileWeight.from_dict(p) for p in phis]
        return fn.YaariIndependent(fn.YaariSpec(alphas, tuple(phis)))
    if kind == "multirdu":
        return fn.MultivariateRDU(build_weight_map(cfg.get("weight_map", {}), _need_ref(ref)))
    raise InputError(f"unknown functional {kind!r}")


def _policy(args) -> CyclePolicy:
    if args.cycles is None:
        return CyclePolicy(seed=args.seed, tol=args.tol_mono)
    try:
        return CyclePolicy.parse(args.cycles, seed=args.seed, tol=args.tol_mono)
    except ValueError:
        raise InputError("--cycles must be R:L") from None


def _write_csv(path: str | None, text: str, run: _Run, label: str):
    if path:
        Path(path).write_text(text, encoding="utf-8")
        run.parameters[label] = path


def _artifact_path(args, suffix: str) -> str | None:
    if args.csv:
        return args.csv
    if args.out:
        return str(Path(args.out).with_suffix("")) + suffix
    return None


# ---------------------------------------------------------------- commands


def cmd_quantile(args, run: _Run):
    X = run.read("input", args.input)
    ref = parse_ref(args.ref, X.dim, args.seed)
    if ref is None:
        if X.dim != 1:
            raise InputError("--ref is required for d > 1")
        atoms, cdf = quantile_cells(X)
        lines = ["t_lo,t_hi,x1"] + [f"{float(a)!r},{float(b)!r},{float(x)!r}" for a, b, x in zip(np.r_[0.0, cdf[:-1]], cdf, atoms)]
        _write_csv(_artifact_path(args, ".quantile.csv"), "\n".join(lines) + "\n", run, "csv")
        return None, None, {"atoms": atoms, "cdf": cdf}
    qm = mu_quantile(X, ref)
    _write_csv(_artifact_path(args, ".quantile.csv"), qm.to_csv(), run, "csv")
    return None, qm.value, {"quantile_map": qm, "deterministic": qm.is_deterministic()}


def cmd_order(args, run: _Run):
    kind = args.kind
    run.parameters["kind"] = kind
    if kind == "pareto":
        alloc = run.read("input", args.input, reader=read_allocation_csv)
        ref = _need_ref(parse_ref(args.ref, alloc.dim, args.seed))
        return pareto_check(alloc, ref, _policy(args)), None, None
    X = run.read("x", args.x)
    Y = run.read("y", args.y)
    if X.dim != Y.dim:
        raise InputError(f"dimension mismatch between --x (d={X.dim}) and --y (d={Y.dim})")
    if args.fusions:
        steps = [FusionStep.from_dict(s) for s in run.spec(args.fusions, "fusions")]
        Y = fuse(Y, steps)
        run.parameters["fusions"] = steps
    ref = parse_ref(args.ref, X.dim, args.seed)
    if kind == "sd":
        return stochastic_dominance(X, Y), None, None
    if kind == "mpir":
        return is_mpir(X, Y, tol_mean=args.tol_mean), None, None
    if kind in ("bl", "mmpir"):
        return is_bl_less_dispersed_1d(X, Y, kind == "mmpir", tol=args.tol_mono, tol_mean=args.tol_mean), None, None
    if kind in ("mubl", "mummpir"):
        v = is_mu_bl(X, Y, _need_ref(ref), kind == "mummpir", _policy(args), tol_mean=args.tol_mean)
        return v, None, None
    if kind == "lm":
        Z, v = lm_decompose(X, Y, ref, _policy(args))
        if Z is not None:
            v.certificate["Z"] = Z
            _write_csv(_artifact_path(args, ".z.csv"), to_csv(Z), run, "csv")
        return v, None, None
    if kind == "strong-dispersive":
        return strong_dispersive_check(X, Y, ref, cycle_policy=_policy(args)), None, None
    if kind == "comonotone":
        return is_mu_comonotonic(X, Y, _need_ref(ref)), None, None
    if kind == "c-comonotone":
        if X.n != Y.n:
            raise InputError("--x and --y must list the same number of paired rows")
        return is_c_comonotonic(X.points, Y.points, _policy(args)), None, None
    raise InputError(f"unknown order kind {kind!r}")


def _functional_and_input(args, run: _Run):
    X = run.read("input", args.input)
    cfg = run.spec(args.spec)
    ref = parse_ref(args.ref, X.dim, args.seed)
    phi = build_functional(cfg, args.distortion, args.functional, ref, X.dim)
    run.parameters["functional"] = type(phi).__name__
    return X, cfg, ref, phi


def cmd_eval(args, run: _Run):
    X, _, _, phi = _functional_and_input(args, run)
    return None, float(phi(X)), None


def cmd_localutility(args, run: _Run):
    X, _, _, phi = _functional_and_input(args, run)
    if hasattr(phi, "local_utility"):
        table = phi.local_utility(X)
        run.parameters["method"] = "closed form"
    else:
        grid = _default_grid(X)
        table = fn.tabulate_local_utility(phi, X, grid, t0=args.t0)
        run.parameters.update(method="finite difference", t0=args.t0)
    _write_csv(_artifact_path(args, ".lu.csv"), table.to_csv(), run, "csv")
    return None, None, {"table": table}


def _default_grid(X, per_axis: int = 7):
    lo, hi = X.points.min(axis=0), X.points.max(axis=0)
    pad = 0.5 * np.maximum(hi - lo, 1.0)
    axes = [np.linspace(a - p, b + p, per_axis) for a, b, p in zip(lo, hi, pad)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


def cmd_aversion(args, run: _Run):
    test = args.test
    run.parameters["test"] = test
    if test == "pessimistic":
        if args.distortion is None:
            raise InputError("--distortion is required")
        return fn.is_pessimistic(fn.DistortionFunction.parse(args.distortion)), None, None
    X, cfg, ref, phi = _functional_and_input(args, run)
    if test == "concave":
        if hasattr(phi, "local_utility"):
            table = phi.local_utility(X)
        else:
            table = fn.tabulate_local_utility(phi, X, _default_grid(X), t0=args.t0)
        return fn.is_concave(table, tol=args.tol_mono, seed=args.seed), None, None
    if test == "mmpir":
        return fn.mmpir_aversion_test_1d(phi, X), None, None
    if test == "risk":
        F_star = run.read("y", args.y)
        return fn.risk_aversion_probe(phi, X, F_star), None, None
    if not isinstance(phi, fn.MultivariateRDU):
        raise InputError(f"--test {test} needs a multirdu functional")
    if test == "mu-mmpir":
        pots = fn.standard_potentials(phi.reference, args.count, args.seed)
        return fn.mu_mmpir_aversion_test(phi, X, phi.reference, pots, t0=args.t0), None, None
    if test == "weak":
        return fn.weak_risk_aversion_multi_rdu(phi.spec, [X] + fn.standard_test_set(phi.reference, args.count, seed=args.seed)), None, None
    if test == "mpir-averse":
        return fn.is_mpir_averse_multi_rdu(phi.spec), None, None
    raise InputError(f"unknown aversion test {test!r}")


def cmd_compare(args, run: _Run):
    cfg_a = run.spec(args.spec, "spec")
    cfg_b = run.spec(args.spec_b, "spec_b")
    if not cfg_a or not cfg_b:
        raise InputError("--spec and --spec-b are required")
    d = int(cfg_a.get("dim", len(cfg_a.get("weight_map", {}).get("u0", [0]))))
    ref = _need_ref(parse_ref(args.ref, d, args.seed))
    A = build_weight_map(cfg_a.get("weight_map", {}), ref)
    B = build_weight_map(cfg_b.get("weight_map", {}), ref)
    base = fn.standard_test_set(ref, args.count, seed=args.seed)
    if args.input:
        base = [run.read("input", args.input)] + base
    return fn.more_risk_averse_multi_rdu(A, B, fn.kernel_test_vectors(A, base)), None, None


def cmd_insure(args, run: _Run):
    X, _, _, phi = _functional_and_input(args, run)
    direction = _vector(args.direction, X.dim, "direction")
    bracket = tuple(_vector(args.bracket, 2, "bracket")) if args.bracket else None
    run.parameters.update(direction=direction, bracket=bracket)
    return None, insurance_premium(phi, X, direction, bracket), None


COMMANDS = {
    "quantile": cmd_quantile,
    "order": cmd_order,
    "eval": cmd_eval,
    "localutility": cmd_localutility,
    "aversion": cmd_aversion,
    "compare": cmd_compare,
    "insure": cmd_insure,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mvrisk", description="Risk orders, quantiles and rank-dependent functionals.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--x")
        s.add_argument("--y")
        s.add_argument("--input")
        s.add_argument("--ref", help="grid:m, sobol:m or iid:m")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--tol-mean", type=float, default=MEAN_TOL)
        s.add_argument("--tol-mono", type=float, default=MONO_TOL)
        s.add_argument("--cycles", help="R:L sampled cycles")
        s.add_argument("--distortion", help="power:p or linear")
        s.add_argument("--functional", choices=("expectation", "rdu1d", "yaari", "multirdu"))
        s.add_argument("--spec")
        s.add_argument("--spec-b")
        s.add_argument("--fusions", help="JSON list of {indices, beta} applied to --y")
        s.add_argument("--out")
        s.add_argument("--csv", help="path for the tabular artifact")
        s.add_argument("--t0", type=float, default=1e-4)
        s.add_argument("--count", type=int, default=50)
        s.add_argument("--direction")
        s.add_argument("--bracket", help="lo,hi")
        if name == "order":
            s.add_argument("--kind", choices=ORDER_KINDS, required=True)
        if name == "aversion":
            s.add_argument("--test", choices=AVERSION_TESTS, required=True)
    return p


def _tolerances(args) -> dict:
    return {"mean": args.tol_mean, "monotonicity": args.tol_mono}


def run(argv=None) -> tuple[int, dict]:
    """Execute one command; returns (exit code, report)."""
    args = build_parser().parse_args(argv)
    r = _Run(args)
    started = time.perf_counter()
    report: dict = {"command": args.command}
    try:
        for flag in ("tol_mean", "tol_mono", "t0"):
            if getattr(args, flag) <= 0:
                raise InputError(f"--{flag.replace('_', '-')} must be positive")
        verdict, value, extra = COMMANDS[args.command](args, r)
        code = 0
        if isinstance(verdict, OrderVerdict):
            report.update(verdict.to_dict())
            code = EXIT[verdict.holds]
        else:
            report["value"] = value
            report["certificate"] = extra or {}
            report["tolerances"] = _tolerances(args)
    except InputError as exc:
        code = INPUT_ERROR
        report["error"] = str(exc)
        report["line"] = exc.line
    report["inputs"] = r.inputs
    report["parameters"] = {k: v for k, v in vars(args).items() if v is not None and k != "command"} | r.parameters
    report["seed"] = args.seed
    report["runtime_ms"] = round((time.perf_counter() - started) * 1000.0, 3)
    return code, to_jsonable(report)


def main(argv=None) -> int:
    code, report = run(argv)
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
    out = report["parameters"].get("out")
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)
    if code == INPUT_ERROR:
        print(f"error: {report['error']}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
