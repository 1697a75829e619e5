"""Command-line interface.

Subcommands: ``estimate``, ``bounds``, ``coverage``, ``compare``,
``project``, ``geometry``.  Every flag overrides the key of the same name
(dashes become underscores) in the ``--config`` YAML file.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from robpca import bounds as bnd
from robpca.errors import NumericalError, ValidationError
from robpca.robust_pca import (
    cutoff_estimate,
    eigenvalue_report,
    frobenius_certificate,
    operator_norm_certificate,
)
from robpca.projector_geometry import (
    analyze_pair,
    canonical_bases,
    projector_distance,
    ranks_equal,
    restricted_distance,
)
from robpca.gram_estimator import MethodConfig, NetConfig, RobustGramEstimate, estimate_gram
from robpca.harness import io
from robpca.harness.config import load_config
from robpca.harness.experiments import project_data, run_comparison, run_coverage

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2

_ESTIMATE_KEYS = ("epsilon", "a", "sigma", "delta", "net_strategy", "net_size",
                  "net_delta", "method", "blocks", "width", "seed")


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file")
    p.add_argument("--distribution")
    p.add_argument("--dof", type=float)
    p.add_argument("--contamination-rate", type=float)
    p.add_argument("--contamination-scale", type=float)
    p.add_argument("--spectrum", type=float, nargs="+")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--net-strategy")
    p.add_argument("--net-size", type=int)
    p.add_argument("--net-delta", type=float)
    p.add_argument("--method")
    p.add_argument("--blocks", type=int)
    p.add_argument("--width", type=float)
    p.add_argument("--moments")
    p.add_argument("--gram-frobenius")
    p.add_argument("--rank", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--output", "-o")
    p.add_argument("--summary-csv")


_EXPERIMENT_KEYS = (
    "distribution", "dof", "contamination_rate", "contamination_scale", "spectrum",
    "n", "d", "trials", "epsilon", "a", "sigma", "delta", "net_strategy", "net_size",
    "net_delta", "method", "blocks", "width", "moments", "gram_frobenius", "rank",
    "seed", "workers", "output", "summary_csv",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="robpca", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="robust Gram estimate of a data file")
    p.add_argument("input", help="CSV or RSPM data file (rows = observations)")
    p.add_argument("--skip-header", action="store_true")
    p.add_argument("--center", action="store_true", help="subtract the sample mean first")
    p.add_argument("--config")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--net-strategy")
    p.add_argument("--net-size", type=int)
    p.add_argument("--net-delta", type=float)
    p.add_argument("--method")
    p.add_argument("--blocks", type=int)
    p.add_argument("--width", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", "-o")

    p = sub.add_parser("bounds", help="tabulate zeta, B_* and B")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--s4-sq", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--gram-frobenius", type=float)
    p.add_argument("--t", type=float, nargs="+", help="evaluation points")
    p.add_argument("--output", "-o")

    p = sub.add_parser("coverage", help="Monte Carlo coverage of the certified events")
    _add_experiment_flags(p)
    p = sub.add_parser("compare", help="compare empirical Gram, G_hat and G_tilde")
    _add_experiment_flags(p)

    p = sub.add_parser("project", help="scores on the top-r robust eigenvectors")
    p.add_argument("input")
    p.add_argument("estimate", help="estimate JSON written by 'estimate'")
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--use", choices=("g_hat", "g_tilde"), default="g_hat")
    p.add_argument("--skip-header", action="store_true")
    p.add_argument("--output", "-o")

    p = sub.add_parser("geometry", help="joint geometry of two projectors")
    p.add_argument("P")
    p.add_argument("Q")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--output", "-o")
    return parser


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _yaml_mapping(path: str | None) -> dict:
    if path is None:
        return {}
    import yaml
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError("config file must hold a mapping")
    return data


def _merged(args, keys) -> dict:
    conf = _yaml_mapping(getattr(args, "config", None))
    out = {k: conf[k] for k in keys if k in conf}
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def estimate_to_dict(est: RobustGramEstimate) -> dict:
    out = est.to_dict()
    rep = eigenvalue_report(est)
    out["eigenvalues"] = rep.to_dict()
    try:
        out["eigenvalues"]["lambda_tilde"] = cutoff_estimate(est).lambda_tilde.tolist()
    except NumericalError:
        out["eigenvalues"]["lambda_tilde"] = None
    lam = rep.lambda_hat
    out["certificates"] = {
        "B_lambda1_hat": bnd.bound_B(float(lam[0]), est.params),
        "frobenius_plugin": frobenius_certificate(lam, est.params)[0],
        "operator_plugin_L1": operator_norm_certificate(lam, 1.0, est.params)[0],
    }
    return out


def load_estimate(path) -> RobustGramEstimate:
    import json

    try:
        data = json.loads(open(path).read())
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read estimate {path}: {exc}") from exc
    try:
        g_hat = np.array(data["g_hat"], dtype=float)
        q = np.array(data["q"], dtype=float)
        params = bnd.BoundParams(**{k: (math.inf if v == "inf" else v)
                                    for k, v in data["params"].items()})
        dirs = np.array([p["theta"] for p in data["per_direction"]], dtype=float)
        vals = np.array([p["estimate"] for p in data["per_direction"]], dtype=float)
        meta = data["net_meta"]
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed estimate file {path}: {exc}") from exc
    from robpca.gram_estimator import DeltaNet
    net = DeltaNet(g_hat.shape[0], meta.get("delta") or math.nan, dirs,
                   meta.get("strategy", "randomized"), meta.get("seed", 0))
    return RobustGramEstimate(q, g_hat, net, vals, params)


def cmd_estimate(args) -> int:
    x = io.read_matrix(args.input, args.skip_header)
    if args.center:
        x = x - x.mean(axis=0)
    o = _merged(args, _ESTIMATE_KEYS)
    netc = NetConfig(o.get("net_strategy", "randomized"), o.get("net_size", 500),
                     o.get("net_delta"), o.get("seed", 0))
    methc = MethodConfig(o.get("method", "mom"), o.get("blocks"), o.get("width"),
                         o.get("seed", 0))
    est = estimate_gram(x, None, netc, methc, epsilon=o.get("epsilon", 0.05),
                        a=o.get("a", 1.0), sigma=o.get("sigma"))
    if "delta" in o:
        est = RobustGramEstimate(est.q_matrix, est.g_hat, est.net, est.scalar_estimates,
                                 est.params.replace(delta=o["delta"]), est.method)
    _emit(io.dumps(estimate_to_dict(est)), args.output)
    return EXIT_OK


def cmd_bounds(args) -> int:
    o = _merged(args, ("n", "kappa", "s4_sq", "sigma", "delta", "epsilon", "a",
                       "gram_frobenius", "t"))
    missing = [k for k in ("n", "kappa", "s4_sq") if k not in o]
    if missing:
        raise ValidationError(f"bounds needs {', '.join(missing)}")
    eps, a = o.get("epsilon", 0.05), o.get("a", 1.0)
    sigma = o.get("sigma")
    if sigma is None:
        sigma = bnd.choose_sigma(o["n"], o["kappa"], o["s4_sq"], eps, a)
    params = bnd.BoundParams(n=o["n"], kappa=o["kappa"], s4_sq=o["s4_sq"], sigma=sigma,
                             delta=o.get("delta", 0.0), epsilon=eps, a=a,
                             gram_frobenius=o.get("gram_frobenius", 0.0))
    ts = o.get("t") or list(np.geomspace(params.sigma / 100, params.s4_sq * 100, 9))
    lines = [f"# c={bnd.constant_c()!r} K={bnd.grid_size_K(params)} sigma={params.sigma!r} "
             f"standing_assumption={bnd.standing_assumption_holds(params)}",
             "t,zeta,b_star,B"]
    for t in ts:
        z = bnd.zeta(t, params) if t > 0 else math.inf
        lines.append(f"{t!r},{z!r},{bnd.b_star(t, params)!r},{bnd.bound_B(t, params)!r}")
    _emit("\n".join(lines), args.output)
    return EXIT_OK


def _experiment(args, runner) -> int:
    overrides = {k: getattr(args, k, None) for k in _EXPERIMENT_KEYS}
    config = load_config(args.config, **overrides)
    report = runner(config)
    text = io.dumps(report.to_dict())
    if config.output:
        _emit(text, config.output)
    if config.summary_csv:
        io.write_rows_csv(config.summary_csv, report.summary_rows())
    if not config.output:
        _emit(io.dumps(report.summary), None)
    return EXIT_OK


def cmd_project(args) -> int:
    x = io.read_matrix(args.input, args.skip_header)
    est = load_estimate(args.estimate)
    scores = project_data(x, est, args.r, args.use)
    if args.output:
        io.write_csv_matrix(args.output, scores)
    else:
        _emit("\n".join(",".join(repr(float(v)) for v in row) for row in scores), None)
    return EXIT_OK


def cmd_geometry(args) -> int:
    P = io.read_matrix(args.P)
    Q = io.read_matrix(args.Q)
    an = analyze_pair(P, Q, args.tol)
    fam_p, fam_q = canonical_bases(an, P, Q)
    out = an.to_dict()
    out["projector_distance"] = projector_distance(P, Q)
    if ranks_equal(an):
        out["restricted_distance"] = restricted_distance(P, Q)
    out["basis_im_P"] = fam_p.tolist()
    out["basis_im_Q"] = fam_q.tolist()
    _emit(io.dumps(out), args.output)
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "bounds": cmd_bounds,
    "coverage": lambda a: _experiment(a, run_coverage),
    "compare": lambda a: _experiment(a, run_comparison),
    "project": cmd_project,
    "geometry": cmd_geometry,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except BrokenPipeError:
        sys.stderr.close()
        return EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
