"""Command-line interface: select / fit / diagnose / simulate.

Every run writes a ``run_manifest.json`` with the fully resolved
configuration so it can be reproduced bit-identically.  Output files are
UTF-8 TSV written atomically (temp file + rename).
"""

import argparse
import json
import os
import sys
from importlib import metadata

import numpy as np

from . import backend
from .baselines import ivw, mr_egger, weighted_median
from .diagnostics import default_het_df, diagnostic_table, heterogeneity_test, qq_data
from .gwas_io import InstrumentTable, harmonize, parse_summary_file, select_instruments
from .prior_model import fit_prior
from .raps_core import make_psi, per_snp_terms, solve
from .sim_harness import (SETTING_NAMES, make_estimator, make_setting, run_study)

GENOME_WIDE_P = 5e-8
STRATA = (("all", 0.0, 1.0), ("significant", 0.0, GENOME_WIDE_P),
          ("nonsignificant", GENOME_WIDE_P, 1.0))


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_tsv(path, header, rows):
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(str(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(x, spec=".8g"):
    if x is None:
        return "NA"
    return format(x, spec)


def _write_manifest(outdir, args_dict):
    try:
        version = metadata.version("rapsmr")
    except metadata.PackageNotFoundError:
        version = "unknown"
    manifest = {"rapsmr_version": version, "backend": backend.BACKEND}
    manifest.update(args_dict)
    _atomic_write(os.path.join(outdir, "run_manifest.json"),
                  json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")


def _parse_columns(text):
    if not text:
        return None
    out = {}
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"bad column mapping {item!r}; expected role=name")
        role, name = item.split("=", 1)
        out[role.strip()] = name.strip()
    return out


def _load_instruments(args):
    if args.instruments:
        return InstrumentTable.from_tsv(args.instruments)
    if not (args.selection and args.exposure and args.outcome):
        raise ValueError("provide either --instruments or all of "
                         "--selection/--exposure/--outcome")
    colmap = _parse_columns(args.columns)
    sel, n_sel = parse_summary_file(args.selection, colmap)
    exp, n_exp = parse_summary_file(args.exposure, colmap)
    out, n_out = parse_summary_file(args.outcome, colmap)
    skipped = n_sel + n_exp + n_out
    if skipped:
        print(f"skipped {skipped} unparseable rows across inputs", file=sys.stderr)
    return harmonize(sel, exp, out, drop_palindromic=not args.keep_palindromic)


def _select(table, args):
    return select_instruments(table, p_range=(args.p_min, args.p_max),
                              min_distance_bp=args.distance_bp)


def _fit_one(data, args, seed):
    prior_fit = fit_prior(data.gamma_hat / data.sigma_x)
    psi = make_psi(args.psi, args.huber_k)
    fit = solve(data, prior=prior_fit.prior, psi=psi,
                overdispersion=args.overdispersion == "on",
                weight_mode=args.weights)
    het_p = None
    records = None
    if fit.status == "ok":
        records = diagnostic_table(fit, data, prior_fit.prior)
        df = args.het_df if args.het_df else default_het_df(len(data))
        try:
            het_p = heterogeneity_test(records, df)
        except ValueError:
            het_p = None
    baselines = []
    for fn in (ivw, mr_egger):
        try:
            baselines.append(fn(data))
        except ValueError:
            pass
    try:
        baselines.append(weighted_median(data, seed=seed))
    except ValueError:
        pass
    return fit, prior_fit, het_p, records, baselines


_SUMMARY_HEADER = ("stratum", "method", "n_snps", "status", "beta_hat", "se_beta",
                   "tau_sq_hat", "se_tau_sq", "het_pval", "prior_p1",
                   "prior_sigma1", "prior_sigma2", "egger_intercept")


def _summary_rows(stratum, fit, prior_fit, het_p, baselines):
    p = prior_fit.prior
    method = f"raps_{fit.weight_mode}_{fit.psi.kind}_" \
             f"{'od' if fit.overdispersed else 'tau0'}"
    rows = [(stratum, method, fit.n_snps, fit.status, _fmt(fit.beta_hat),
             _fmt(fit.se_beta), _fmt(fit.tau_sq_hat), _fmt(fit.se_tau_sq),
             _fmt(het_p), _fmt(p.p1), _fmt(np.sqrt(p.sigma1_sq)),
             _fmt(np.sqrt(p.sigma2_sq)), "NA")]
    for b in baselines:
        rows.append((stratum, b.method, fit.n_snps, "ok", _fmt(b.beta_hat),
                     _fmt(b.se_beta), "NA", "NA", "NA", "NA", "NA", "NA",
                     _fmt(b.intercept)))
    return rows


def _write_fit_outputs(outdir, data, fit, prior_fit, records):
    if fit.status != "ok":
        return
    prior = prior_fit.prior if fit.weight_mode == "shrinkage" else None
    w, t, s = per_snp_terms(fit.beta_hat, fit.tau_sq_hat, data, prior)
    _write_tsv(os.path.join(outdir, "snps.tsv"),
               ("rsid", "t_j", "eb_weight", "s_j"),
               [(data.snps[j], _fmt(t[j]), _fmt(w[j]), _fmt(s[j]))
                for j in range(len(data))])
    if records is not None:
        _write_tsv(os.path.join(outdir, "diagnostic.tsv"),
                   ("rsid", "strength", "residual", "spike_resp"),
                   [(r.rsid, _fmt(r.strength), _fmt(r.residual), _fmt(r.spike_resp))
                    for r in records])
        qq = qq_data(records)
        _write_tsv(os.path.join(outdir, "qq.tsv"), ("theoretical", "observed"),
                   [(_fmt(a), _fmt(b)) for a, b in qq])


def cmd_select(args):
    os.makedirs(args.out, exist_ok=True)
    table = _select(_load_instruments(args), args)
    table.to_tsv(os.path.join(args.out, "instruments.tsv"))
    _write_manifest(args.out, {"command": "select", **vars(args)})
    print(f"selected {len(table)} instruments -> {args.out}/instruments.tsv")
    return 0


def cmd_fit(args):
    os.makedirs(args.out, exist_ok=True)
    table = _load_instruments(args)
    rows = []
    exit_code = 0
    if args.strata:
        for name, lo, hi in STRATA:
            try:
                sub = select_instruments(table, p_range=(lo, hi),
                                         min_distance_bp=args.distance_bp)
            except ValueError as exc:
                print(f"stratum {name}: {exc}", file=sys.stderr)
                continue
            data = sub.to_summary_set()
            fit, prior_fit, het_p, records, baselines = _fit_one(data, args, args.seed)
            rows.extend(_summary_rows(name, fit, prior_fit, het_p, baselines))
            if name == "all":
                _write_fit_outputs(args.out, data, fit, prior_fit, records)
                if fit.status == "multiple_ambiguous_roots":
                    exit_code = 2
    else:
        sub = _select(table, args)
        data = sub.to_summary_set()
        fit, prior_fit, het_p, records, baselines = _fit_one(data, args, args.seed)
        rows.extend(_summary_rows("selected", fit, prior_fit, het_p, baselines))
        _write_fit_outputs(args.out, data, fit, prior_fit, records)
        if fit.status == "multiple_ambiguous_roots":
            exit_code = 2
    _write_tsv(os.path.join(args.out, "summary.tsv"), _SUMMARY_HEADER, rows)
    _write_manifest(args.out, {"command": "fit", **vars(args)})
    if exit_code == 2:
        print("estimate withheld: multiple roots at comparable distance from "
              "the profile-likelihood anchor", file=sys.stderr)
    return exit_code


def cmd_diagnose(args):
    os.makedirs(args.out, exist_ok=True)
    table = _load_instruments(args)
    sub = _select(table, args)
    data = sub.to_summary_set()
    fit, prior_fit, het_p, records, _ = _fit_one(data, args, args.seed)
    if fit.status != "ok":
        print(f"fit status: {fit.status}; no diagnostics produced", file=sys.stderr)
        return 2 if fit.status == "multiple_ambiguous_roots" else 1
    _write_fit_outputs(args.out, data, fit, prior_fit, records)
    block = fit.to_text() + f"het_pval\t{_fmt(het_p)}\n" + prior_fit.to_text()
    _atomic_write(os.path.join(args.out, "fit_block.txt"), block)
    _write_manifest(args.out, {"command": "diagnose", **vars(args)})
    return 0


def cmd_simulate(args):
    os.makedirs(args.out, exist_ok=True)
    settings = [s.strip().upper() for s in args.setting.split(",") if s.strip()]
    for name in settings:
        if name not in SETTING_NAMES:
            print(f"unknown setting {name!r}; choose from {SETTING_NAMES}",
                  file=sys.stderr)
            return 1
    est_names = [e.strip() for e in args.estimators.split(",") if e.strip()]
    specs = [make_estimator(n, psi_kind=args.psi, huber_k=args.huber_k,
                            overdispersion=args.overdispersion == "on")
             for n in est_names]

    rows = []
    rep_rows = []
    for name in settings:
        setting = make_setting(name)
        results = run_study(setting, specs, n_reps=args.reps, seed=args.seed,
                            keep_reps=args.dump_reps)
        for spec in specs:
            m = results[spec.name]
            rows.append((name, spec.name, _fmt(m.mean_beta), _fmt(m.rmse),
                         _fmt(m.coverage), _fmt(m.power), m.n_reps_used))
            if args.dump_reps:
                beta, se = m.reps
                rep_rows.extend((name, spec.name, i, _fmt(b), _fmt(s))
                                for i, (b, s) in enumerate(zip(beta, se)))
    _write_tsv(os.path.join(args.out, "metrics.tsv"),
               ("setting", "estimator", "mean", "rmse", "coverage", "power", "n_used"),
               rows)
    if args.dump_reps:
        _write_tsv(os.path.join(args.out, "replications.tsv"),
                   ("setting", "estimator", "rep", "beta_hat", "se_beta"), rep_rows)
    _write_manifest(args.out, {"command": "simulate", **vars(args)})
    return 0


def _add_input_opts(p):
    p.add_argument("--selection", help="selection-study GWAS summary file")
    p.add_argument("--exposure", help="exposure-study GWAS summary file")
    p.add_argument("--outcome", help="outcome-study GWAS summary file")
    p.add_argument("--instruments", help="pre-harmonized instrument TSV "
                                         "(esp. the output of `select`)")
    p.add_argument("--columns", default="",
                   help="role=name pairs, comma separated (roles: rsid, chrom, "
                        "pos, effect_allele, other_allele, beta, se, pval)")
    p.add_argument("--keep-palindromic", action="store_true",
                   help="keep strand-ambiguous A/T and C/G SNPs")


def _add_select_opts(p):
    p.add_argument("--p-min", type=float, default=0.0,
                   help="selection p-value window lower bound, exclusive")
    p.add_argument("--p-max", type=float, default=1.0,
                   help="selection p-value window upper bound, inclusive")
    p.add_argument("--distance-bp", type=int, default=10_000_000,
                   help="minimum same-chromosome distance between instruments")


def _add_fit_opts(p):
    p.add_argument("--weights", choices=("mle", "shrinkage"), default="shrinkage")
    p.add_argument("--psi", choices=("identity", "huber"), default="huber")
    p.add_argument("--huber-k", type=float, default=1.345)
    p.add_argument("--overdispersion", choices=("on", "off"), default="on")
    p.add_argument("--het-df", type=int, default=0,
                   help="spline df for the heterogeneity test (0 = #SNPs/20)")
    p.add_argument("--seed", type=int, default=0)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rapsmr",
        description="Robust profile-score Mendelian randomization with "
                    "empirical Bayes instrument weighting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("select", help="harmonize and pick independent instruments")
    _add_input_opts(p)
    _add_select_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("fit", help="estimate the causal effect")
    _add_input_opts(p)
    _add_select_opts(p)
    _add_fit_opts(p)
    p.add_argument("--strata", action="store_true",
                   help="fit all / significant / non-significant strata")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="fit and emit diagnostic plot data")
    _add_input_opts(p)
    _add_select_opts(p)
    _add_fit_opts(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("simulate", help="run the validation studies")
    p.add_argument("--setting", required=True,
                   help=f"comma-separated subset of {', '.join(SETTING_NAMES)}")
    p.add_argument("--estimators",
                   default="raps_shrinkage,raps_mle,egger,weighted_median")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--psi", choices=("identity", "huber"), default="huber")
    p.add_argument("--huber-k", type=float, default=1.345)
    p.add_argument("--overdispersion", choices=("on", "off"), default="on")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dump-reps", action="store_true",
                   help="also write per-replication estimates")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
