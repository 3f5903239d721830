"""Command-line surface: simulate, build, fit, lrtest, mc, predict, ratio.

Exit codes: 0 success, 1 validation error (bad flags, schema violations,
failed preconditions), 2 numerical failure (non-convergence, singular
information matrix).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import data, report
from .errors import NumericalError, PartialProbitError
from .estimator import FitOptions, FitResult, LrTestResult, chi2_sf, fit_biprobit_partial, fit_probit
from .queries import RatioQuery, predict, prob_ratio
from .simulate import SimConfig, monte_carlo, simulate_market

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2


def _parse_spec(spec: str):
    """Resolve --spec: a preset name or 'invite:a,b;accept:c,d'."""
    if spec in data.SPEC_PRESETS:
        return data.SPEC_PRESETS[spec]
    parts = dict(p.split(":", 1) for p in spec.split(";") if ":" in p)
    if set(parts) != {"invite", "accept"}:
        raise data.SpecError(
            f"--spec must be a preset ({', '.join(data.SPEC_PRESETS)}) or "
            "'invite:a,b,...;accept:c,d,...'")
    return ([c for c in parts["invite"].split(",") if c],
            [c for c in parts["accept"].split(",") if c])


def _parse_sets(pairs):
    out = {}
    for item in pairs or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise data.SpecError(f"--set/--counter expects name=value, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError as exc:
            raise data.SpecError(f"value for '{name}' is not numeric: {value!r}") from exc
    return out


def _load_params(path):
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise data.DataError(f"cannot read parameter file {path}: {exc}") from exc
    if "coefficients" in raw:   # a fit report
        return report.params_from_fit_dict(raw)
    for key in ("beta_invite", "beta_accept"):
        if key not in raw or not isinstance(raw[key], dict):
            raise data.DataError(f"parameter file must map '{key}' to a "
                                 "coefficient dictionary")
    raw.setdefault("rho", 0.0)
    return raw


def _cmd_simulate(args):
    config = SimConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
    sim = simulate_market(config)
    sim.write_csvs(args.out)
    truth = {"beta_invite": config.true_beta_invite,
             "beta_accept": config.true_beta_accept, "rho": config.true_rho,
             "seed": config.seed, "n_dyads": len(sim.dyads),
             "n_seminars": int(sum(r.z for r in sim.dyads))}
    with open(f"{args.out}/truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {len(sim.dyads)} dyads worth of rosters to {args.out} "
          f"({truth['n_seminars']} seminar events)")
    return EXIT_OK


def _cmd_build(args):
    departments = data.load_departments(args.departments)
    scholars = data.load_scholars(args.scholars, args.reference_year)
    seminars = data.load_seminars(args.seminars)
    dyads = data.build_dyads(departments, scholars, seminars, args.reference_year)
    data.write_dyads_csv(dyads, args.out)
    print(f"wrote {len(dyads)} dyads to {args.out}")
    return EXIT_OK


def _cmd_fit(args):
    dyads = data.read_dyads_csv(args.design)
    invite_spec, accept_spec = _parse_spec(args.spec)
    options = FitOptions(seed=args.seed, fix_rho_at_zero=args.fix_rho,
                         n_starts=args.starts)
    if args.probit:
        combined = list(dict.fromkeys(invite_spec + accept_spec))
        # The probit baseline needs a design too; reuse the invite slot and a
        # dummy accept slot, then keep only the combined matrix.
        design = data.build_design(dyads, combined, combined[:1],
                                   drop_missing=args.drop_missing)
        fit = fit_probit(design.x_invite, design.z, options,
                         cluster_id=design.cluster_id,
                         names=["const"] + combined)
        lr = None
    else:
        design = data.build_design(dyads, invite_spec, accept_spec,
                                   drop_missing=args.drop_missing)
        fit = fit_biprobit_partial(design, options)
        lr = None
        if fit.converged and not args.fix_rho:
            restr = FitOptions(seed=args.seed, fix_rho_at_zero=True,
                               n_starts=args.starts)
            fit0 = fit_biprobit_partial(design, restr, compute_covariance=False)
            if fit0.converged:
                from .estimator import lr_test_rho
                lr = lr_test_rho(fit, fit0)
    if args.out:
        report.write_fit_json(fit, args.out, lr)
    sys.stdout.write(report.fit_report_text(fit, lr))
    return EXIT_OK if fit.converged else EXIT_NUMERICAL


def _cmd_lrtest(args):
    d_u = report.load_fit_dict(args.unrestricted)
    d_r = report.load_fit_dict(args.restricted)
    fit_u = _fit_stub(d_u)
    fit_r = _fit_stub(d_r)
    from .estimator import lr_test_rho
    lr = lr_test_rho(fit_u, fit_r)
    out = {"statistic": lr.statistic, "df": lr.df, "p_value": lr.p_value}
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def _fit_stub(d: dict) -> FitResult:
    return FitResult(
        model=d.get("model", "biprobit"), param_names=[], params=np.array([]),
        loglik=d["loglik"], n_obs=d["n_obs"], converged=d.get("converged", True),
        status=d.get("status", ""), fixed_rho=d.get("fixed_rho", False),
        invite_names=d.get("invite_names"), accept_names=d.get("accept_names"))


def _cmd_mc(args):
    config = SimConfig.from_json(args.config)
    if args.seed is not None:
        config.seed = args.seed
    options = FitOptions(seed=config.seed, n_starts=args.starts)
    rep = monte_carlo(config, args.reps, options, do_lr_test=not args.no_lr,
                      compute_coverage=not args.no_coverage)
    payload = json.dumps(rep.to_dict(), indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    print(payload)
    return EXIT_OK


def _cmd_predict(args):
    params = _load_params(args.params)
    p = predict(args.equation, _parse_sets(args.set), params)
    print(json.dumps({"equation": args.equation, "probability": p},
                     indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_ratio(args):
    params = _load_params(args.params)
    query = RatioQuery(equation=args.equation, baseline=_parse_sets(args.set),
                       counterfactual=_parse_sets(args.counter),
                       parameters=params)
    out = prob_ratio(query)
    print(json.dumps({"equation": args.equation, **out}, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partialprobit",
        description="Bivariate probit with partial observability: simulate, "
                    "build, fit, test, and query seminar-market models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic market")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("build", help="construct the dyadic estimation sample")
    p.add_argument("--departments", required=True)
    p.add_argument("--scholars", required=True)
    p.add_argument("--seminars", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--reference-year", type=int,
                   default=data.DEFAULT_REFERENCE_YEAR)
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("fit", help="estimate the model on a dyad file")
    p.add_argument("--design", required=True, help="dyads CSV from 'build'")
    p.add_argument("--spec", required=True,
                   help="preset name or 'invite:a,b;accept:c,d'")
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--biprobit", action="store_true", default=True)
    kind.add_argument("--probit", action="store_true", default=False)
    p.add_argument("--fix-rho", action="store_true")
    p.add_argument("--drop-missing", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--starts", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("lrtest", help="LR test for rho = 0 from two fit reports")
    p.add_argument("--unrestricted", required=True)
    p.add_argument("--restricted", required=True)
    p.set_defaults(func=_cmd_lrtest)

    p = sub.add_parser("mc", help="Monte Carlo parameter-recovery study")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--starts", type=int, default=1)
    p.add_argument("--no-lr", action="store_true")
    p.add_argument("--no-coverage", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_mc)

    p = sub.add_parser("predict", help="invite/accept/seminar probability")
    p.add_argument("--equation", required=True,
                   choices=["invite", "accept", "seminar"])
    p.add_argument("--params", required=True)
    p.add_argument("--set", action="append", metavar="name=value")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("ratio", help="counterfactual probability ratio")
    p.add_argument("--equation", required=True,
                   choices=["invite", "accept", "seminar"])
    p.add_argument("--params", required=True)
    p.add_argument("--set", action="append", metavar="name=value",
                   help="baseline covariate")
    p.add_argument("--counter", action="append", metavar="name=value",
                   help="counterfactual covariate")
    p.set_defaults(func=_cmd_ratio)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PartialProbitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
