"""Command-line interface: ``fdcpath {slem,optimize,certify,simulate,oracle}``.

Every command prints one report, either as ``key = value`` lines or (with
``--json``) a single JSON object. Exit codes: 0 success, 1 invalid input,
2 failed verification or numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import consensus_engine as ce
from . import dual_certificate as dc
from . import weight_optimizer as wo
from .errors import FdcError, ValidationError
from .path_model import as_weights, check_node_count, weight_matrix
from .tridiag_spectra import DEFAULT_TOL, eigenvalues, slem

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2

DEFAULT_WEIGHT = 0.5
DEFAULT_INIT = 0.3
DEFAULT_CERT_TOL = 1e-8
DEFAULT_STEPS = 1000
DEFAULT_RESOLUTION = 0.01


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for failed checks here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


@dataclass
class RunReport:
    command: str
    inputs: dict
    outputs: dict = field(default_factory=dict)
    residuals: dict | None = None
    passed: bool | None = None

    def to_dict(self) -> dict:
        out = {"command": self.command, "inputs": self.inputs, "outputs": self.outputs}
        if self.residuals is not None:
            out["residuals"] = self.residuals
        if self.passed is not None:
            out["pass"] = self.passed
        return _plain(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), allow_nan=False)

    def to_text(self) -> str:
        lines = []
        _flatten(self.to_dict(), "", lines)
        return "\n".join(lines)


def _plain(obj):
    """Builtin types only; nan/inf become None so the JSON stays valid."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def _flatten(obj, prefix, lines):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(v, f"{prefix}.{k}" if prefix else k, lines)
    elif isinstance(obj, list):
        lines.append(f"{prefix} = " + ",".join(_scalar(v) for v in obj))
    else:
        lines.append(f"{prefix} = {_scalar(obj)}")


def _scalar(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def parse_floats(text) -> list[float]:
    """Comma-separated binary64 literals."""
    try:
        vals = [float(tok) for tok in text.split(",")]
    except ValueError:
        raise ValidationError(f"malformed number list: {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise ValidationError(f"values must be finite: {text!r}")
    return vals


def _weights_arg(text, n, default) -> np.ndarray:
    if text is None:
        return np.full(n - 1, default)
    vals = parse_floats(text)
    if len(vals) == 1 and n > 2:
        vals = vals * (n - 1)
    return as_weights(vals, n)


def _theory_slem(n, w):
    return math.cos(math.pi / n) if np.all(np.asarray(w) == 0.5) else None


def cmd_slem(args) -> tuple[RunReport, int]:
    n = check_node_count(args.n)
    w = _weights_arg(args.weights, n, DEFAULT_WEIGHT)
    spec = eigenvalues(weight_matrix(n, w), args.tol)
    report = RunReport("slem", {"n": n, "weights": w, "tol": args.tol})
    report.outputs = {"spectrum": spec.eigenvalues, "slem": spec.slem}
    return report, EXIT_OK


def cmd_optimize(args) -> tuple[RunReport, int]:
    n = check_node_count(args.n)
    init = _weights_arg(args.init, n, DEFAULT_INIT)
    params = wo.OptimizerParams(max_iters=args.max_iters, seed=args.seed)
    res = wo.optimize_weights(n, init, params)
    w = np.asarray(res.weights)
    optimum = math.cos(math.pi / n)
    report = RunReport(
        "optimize",
        {"n": n, "init": init, "max_iters": params.max_iters, "step_scale": params.step_scale,
         "eig_tol": params.eig_tol, "seed": params.seed},
    )
    report.outputs = {
        "weights": w,
        "slem": res.slem,
        "iterations": res.iterations,
        "subgradient_iterations": res.subgradient_iterations,
        "refine_iterations": res.refine_iterations,
        "closed_form_slem": optimum,
        "max_weight_deviation": float(np.abs(w - 0.5).max()),
        "slem_deviation": abs(res.slem - optimum),
    }
    if args.csv:
        _write_csv(args.csv, ("iteration", "slem"), res.history)
    return report, EXIT_OK


def cmd_certify(args) -> tuple[RunReport, int]:
    n = check_node_count(args.n)
    w = _weights_arg(args.weights, n, DEFAULT_WEIGHT)
    if not args.tol >= 0:
        raise ValidationError(f"--tol must be non-negative, got {args.tol}")
    cert = dc.build_certificate(n)
    check = dc.verify_certificate(cert, w, args.tol)
    report = RunReport("certify", {"n": n, "weights": w, "tol": args.tol})
    report.outputs = {"theta": cert.theta, "s": cert.s, "failures": check.failures()}
    report.residuals = check.residuals
    report.passed = check.passed
    return report, EXIT_OK if check.passed else EXIT_FAILED


def cmd_simulate(args) -> tuple[RunReport, int]:
    n = check_node_count(args.n)
    w = _weights_arg(args.weights, n, DEFAULT_WEIGHT)
    if args.steps < 1:
        raise ValidationError(f"--steps must be at least 1, got {args.steps}")
    burn_in = args.steps // 4 if args.burn_in is None else args.burn_in
    if not 0 <= burn_in < args.steps:
        raise ValidationError(f"--burn-in must lie in [0, steps), got {burn_in}")
    x0 = ce.generic_start(n, w, args.seed)
    trace = ce.iterate(n, w, x0, args.steps)
    rate = ce.estimate_rate(trace, burn_in, min_window=1)
    report = RunReport(
        "simulate", {"n": n, "weights": w, "steps": args.steps, "burn_in": burn_in, "seed": args.seed}
    )
    report.outputs = {
        "rate_estimate": rate.rate,
        "rate_window_end": rate.last_step,
        "rate_degenerate": rate.degenerate,
        "slem": slem(n, w),
        "theory_slem": _theory_slem(n, w),
        "final_error_norm": float(trace.error_norms[-1]),
        "mean": trace.mean,
    }
    if args.csv:
        rows = zip(range(trace.steps + 1), trace.error_norms, ce.running_rates(trace))
        _write_csv(args.csv, ("t", "error_norm", "rate_estimate"), rows)
    return report, EXIT_OK


def cmd_oracle(args) -> tuple[RunReport, int]:
    n = check_node_count(args.n)
    point, value = wo.grid_oracle(n, args.resolution)
    w = np.asarray(point)
    dist = float(np.abs(w - 0.5).max())
    optimum = math.cos(math.pi / n)
    report = RunReport("oracle", {"n": n, "resolution": args.resolution})
    report.outputs = {
        "argmin": w,
        "min_slem": value,
        "closed_form_slem": optimum,
        "argmin_distance": dist,
        "within_one_cell": dist <= args.resolution,
        "slem_gap": abs(value - optimum),
    }
    return report, EXIT_OK


def _write_csv(target, header, rows):
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(int(v))
                           for v in row) + "\n")
    if target == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(target, "w", newline="\n") as fh:
            fh.write(buf.getvalue())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fdcpath", description="Fastest distributed consensus weights on path networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--n", type=int, required=True, help="number of nodes (>= 2)")
        p.add_argument("--json", action="store_true", help="print the report as one JSON object")

    p = sub.add_parser("slem", help="spectrum and SLEM of the weight matrix")
    common(p)
    p.add_argument("--weights", help=f"comma-separated edge weights (default: all {DEFAULT_WEIGHT})")
    p.add_argument("--tol", type=float, default=DEFAULT_TOL, help=f"eigenvalue tolerance (default: {DEFAULT_TOL:g})")
    p.set_defaults(func=cmd_slem)

    p = sub.add_parser("optimize", help="minimize the SLEM numerically")
    common(p)
    p.add_argument("--init", help=f"starting weights, one value or a list (default: all {DEFAULT_INIT})")
    p.add_argument("--max-iters", type=int, default=wo.OptimizerParams.max_iters,
                   help=f"subgradient iterations (default: {wo.OptimizerParams.max_iters})")
    p.add_argument("--seed", type=int, default=0, help="seed for inverse-iteration start vectors (default: 0)")
    p.add_argument("--csv", help="write the iteration,slem history here ('-' for stdout)")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("certify", help="verify the closed-form dual certificate")
    common(p)
    p.add_argument("--weights", help=f"primal weights to certify (default: all {DEFAULT_WEIGHT})")
    p.add_argument("--tol", type=float, default=DEFAULT_CERT_TOL,
                   help=f"tolerance for every residual (default: {DEFAULT_CERT_TOL:g})")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("simulate", help="run the averaging iteration and estimate its rate")
    common(p)
    p.add_argument("--weights", help=f"edge weights (default: all {DEFAULT_WEIGHT})")
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS, help=f"iterations (default: {DEFAULT_STEPS})")
    p.add_argument("--seed", type=int, default=0, help="seed for the random start (default: 0)")
    p.add_argument("--burn-in", type=int, default=None, help="steps skipped by the rate estimate (default: steps // 4)")
    p.add_argument("--csv", help="write t,error_norm,rate_estimate rows here ('-' for stdout)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="exhaustive grid search (n <= 4)")
    common(p)
    p.add_argument("--resolution", type=float, default=DEFAULT_RESOLUTION,
                   help=f"grid spacing (default: {DEFAULT_RESOLUTION:g})")
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report, code = args.func(args)
    except ValidationError as exc:
        print(f"fdcpath {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FdcError as exc:
        print(f"fdcpath {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as exc:
        print(f"fdcpath {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(report.to_json() if args.json else report.to_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
