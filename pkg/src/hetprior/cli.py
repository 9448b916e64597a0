"""Command-line surface: validate corpora, fit the hierarchical model,
compare heterogeneity families, condense priors, run a single
meta-analysis, and tabulate frequentist heterogeneity estimates.

Every run writes a manifest (inputs with content hashes, full
configuration, seed, tool version) next to its outputs so any artifact
can be reproduced bit for bit.  Exit codes: 0 success, 2 input/format
problems, 3 numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .data import FormatError, RecordError, parse_collection, subset_recent, validate_collection
from .dic import compare_models, comparison_to_dict, format_comparison_table
from .dist import InfeasibleError, Normal, format_distribution, parse_distribution
from .metaanalysis import (
    GridError,
    SingleMeta,
    UndefinedEstimatorError,
    bayes_ma,
    forest_rows,
    tau_estimate_collection,
)
from .sampler import (
    BACKEND,
    ConfigError,
    HET_FAMILIES,
    InitializationError,
    McmcConfig,
    ModelSpec,
    run_hierarchical,
    samples_from_csv,
    samples_to_csv,
    summary_dict,
)
from .summarize import (
    FitError,
    approximation_table,
    fit_predictive_ml,
    fit_predictive_moments,
    format_approximation_table,
    mixture_match_prior,
    point_estimate_prior,
    prior_to_dict,
)
from .svg import density_svg, forest_svg, histogram_svg

SCHEMA_VERSION = 1

_FIT_FAMILY_TOKENS = ("half-normal", "half-t", "exp", "half-cauchy", "log-normal", "lomax")


# -- plumbing ---------------------------------------------------------------------


def _jsonify(obj):
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON-serializable: {obj!r}")


def _dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonify) + "\n"


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(
    out: Path, subcommand: str, inputs: list[Path], options: dict, seed, outputs: list[str]
) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "backend": BACKEND,
        "subcommand": subcommand,
        "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in inputs],
        "options": options,
        "seed": seed,
        "outputs": sorted(outputs + ["manifest.json"]),
    }
    (out / "manifest.json").write_text(_dump_json(doc))


def _load_corpus(args):
    path = Path(args.path)
    c = parse_collection(path.read_text())
    if args.subset_recent is not None:
        c = subset_recent(c, args.subset_recent)
    return c, path


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    seed = int.from_bytes(os.urandom(4), "big")
    print(f"seed: {seed} (generated; pass --seed {seed} to reproduce)")
    return seed


def _mcmc_config(args, seed: int) -> McmcConfig:
    return McmcConfig(
        chains=args.chains, burn_in=args.burnin, iterations=args.iters, seed=seed
    )


def _forest_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["label", "estimate", "lo", "hi", "weight_or_type"])
    for r in rows:
        writer.writerow(
            [
                r["label"],
                repr(float(r["estimate"])),
                repr(float(r["lo"])),
                repr(float(r["hi"])),
                r["weight_or_type"],
            ]
        )
    return out.getvalue()


def _cell(v, width=9) -> str:
    return ("-" if v is None else f"{v:.3f}").rjust(width)


# -- subcommands ------------------------------------------------------------------


def cmd_validate(args) -> int:
    c, path = _load_corpus(args)
    report = validate_collection(c)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "analyses": c.n_analyses,
        "studies": c.n_studies,
        "per_analysis": [
            {"analysis": aid, "k": len(c.analysis(aid))} for aid in c.analysis_ids
        ],
        "warnings": list(report.warnings),
    }
    out = _out_dir(args)
    (out / "summary.json").write_text(_dump_json(doc))
    _write_manifest(
        out,
        "validate",
        [path],
        {"subset_recent": args.subset_recent},
        None,
        ["summary.json"],
    )
    if args.json:
        print(_dump_json(doc), end="")
    else:
        print(f"{c.n_analyses} analyses, {c.n_studies} studies")
        for w in report.warnings:
            print(f"warning: {w}")
    return 0


def _fit_table(s, doc: dict) -> str:
    names = list(s.hyper_names) + ["tau_star", "deviance"]
    lines = [
        f"{'parameter':<12} {'mean':>9} {'sd':>9} {'50%':>9} {'95%':>9} {'99%':>9}"
        f" {'rhat':>7} {'ess':>9}"
    ]
    diag = doc.get("diagnostics", {})
    for name in names:
        p = doc["parameters"][name]
        d = diag.get(name, {})
        rhat = d.get("rhat")
        ess = d.get("ess")
        lines.append(
            f"{name:<12} {p['mean']:>9.4f} {p['sd']:>9.4f} {p['median']:>9.4f}"
            f" {p['q95']:>9.4f} {p['q99']:>9.4f}"
            f" {('-' if rhat is None else f'{rhat:.3f}'):>7}"
            f" {('-' if ess is None else f'{ess:.0f}'):>9}"
        )
    return "\n".join(lines)


def cmd_fit(args) -> int:
    c, path = _load_corpus(args)
    seed = _resolve_seed(args)
    m = ModelSpec(het_family=args.family)
    cfg = _mcmc_config(args, seed)
    s = run_hierarchical(c, m, cfg)
    doc = summary_dict(s)
    doc["schema_version"] = SCHEMA_VERSION
    doc["seed"] = seed
    doc["config"] = {
        "family": args.family,
        "chains": cfg.chains,
        "burn_in": cfg.burn_in,
        "iterations": cfg.iterations,
        "thin": cfg.thin,
        "seed": seed,
    }
    out = _out_dir(args)
    (out / "samples.csv").write_text(samples_to_csv(s))
    (out / "summary.json").write_text(_dump_json(doc))
    outputs = ["samples.csv", "summary.json"]
    if args.svg:
        (out / "tau_star.svg").write_text(
            histogram_svg(
                s.predictive.ravel(),
                x_label="predictive heterogeneity",
                title=f"predictive heterogeneity ({args.family})",
            )
        )
        outputs.append("tau_star.svg")
    _write_manifest(
        out,
        "fit",
        [path],
        {
            "family": args.family,
            "chains": cfg.chains,
            "iterations": cfg.iterations,
            "burn_in": cfg.burn_in,
            "subset_recent": args.subset_recent,
        },
        seed,
        outputs,
    )
    if args.json:
        print(_dump_json(doc), end="")
    else:
        print(_fit_table(s, doc))
        for w in doc.get("warnings", []):
            print(f"warning: {w}")
    return 0


def cmd_compare(args) -> int:
    c, path = _load_corpus(args)
    seed = _resolve_seed(args)
    families = tuple(f.strip() for f in args.families.split(",") if f.strip())
    cfg = _mcmc_config(args, seed)
    rows = compare_models(c, families, cfg=cfg)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "seed": seed,
        "models": comparison_to_dict(rows),
    }
    out = _out_dir(args)
    (out / "dic.json").write_text(_dump_json(doc))
    _write_manifest(
        out,
        "compare",
        [path],
        {
            "families": list(families),
            "chains": cfg.chains,
            "iterations": cfg.iterations,
            "burn_in": cfg.burn_in,
            "subset_recent": args.subset_recent,
        },
        seed,
        ["dic.json"],
    )
    if args.json:
        print(_dump_json(doc), end="")
    else:
        print(format_comparison_table(rows))
    if all(r.error is not None for r in rows):
        print("numerical failure: every family failed to fit", file=sys.stderr)
        return 3
    return 0


def _expand_method(method: str, s, fit_families, source: str):
    if method == "mixture":
        return [mixture_match_prior(s, source=source)]
    if method.startswith("point:"):
        return [point_estimate_prior(s, method.split(":", 1)[1], source=source)]
    draws = s.predictive.ravel()
    if method == "ml":
        return [fit_predictive_ml(draws, fam, source=source) for fam in fit_families]
    if method == "moments":
        return [fit_predictive_moments(draws, fam, source=source) for fam in fit_families]
    raise ValueError(
        f"unknown method {method!r}; choose point:mean, point:median, point:q95, "
        "mixture, ml or moments"
    )


def cmd_approx(args) -> int:
    src = Path(args.samples)
    csv_path = src / "samples.csv" if src.is_dir() else src
    family = args.family
    if family is None:
        sibling = csv_path.parent / "summary.json"
        if sibling.exists():
            family = json.loads(sibling.read_text()).get("family")
    if family is None:
        raise ValueError("family not given and no summary.json next to the samples file")
    s = samples_from_csv(csv_path.read_text(), family)
    fit_families = tuple(f.strip() for f in args.fit_families.split(",") if f.strip())
    for fam in fit_families:
        if fam not in _FIT_FAMILY_TOKENS:
            raise ValueError(f"unknown fit family {fam!r}; choose from {_FIT_FAMILY_TOKENS}")
    source = str(csv_path)

    specs = []
    failures = []
    for method in (m.strip() for m in args.methods.split(",")):
        if not method:
            continue
        try:
            specs.extend(_expand_method(method, s, fit_families, source))
        except (InfeasibleError, FitError) as e:
            failures.append({"method": method, "error": str(e)})
            print(f"warning: {method} failed: {e}", file=sys.stderr)
    if not specs:
        raise FitError(
            "no prior could be produced: "
            + "; ".join(f["method"] + ": " + f["error"] for f in failures)
        )

    rows = approximation_table(specs, s.predictive)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "family": family,
        "source": source,
        "table": [r.as_dict() for r in rows],
        "failures": failures,
    }
    priors_doc = {
        "schema_version": SCHEMA_VERSION,
        "family": family,
        "source": source,
        "priors": [prior_to_dict(spec) for spec in specs],
        "failures": failures,
    }
    out = _out_dir(args)
    (out / "summary.json").write_text(_dump_json(doc))
    (out / "priors.json").write_text(_dump_json(priors_doc))
    outputs = ["summary.json", "priors.json"]
    if args.svg:
        draws = s.predictive.ravel()
        hi = float(np.quantile(draws, 0.995))
        xs = np.linspace(0.0, hi, 400)
        overlays = [(spec.text(), xs, spec.distribution.density(xs)) for spec in specs]
        (out / "approx.svg").write_text(
            histogram_svg(
                draws[draws <= hi],
                overlays=overlays,
                x_label="predictive heterogeneity",
                title="predictive draws and matched priors",
            )
        )
        outputs.append("approx.svg")
    _write_manifest(
        out,
        "approx",
        [csv_path],
        {
            "family": family,
            "methods": args.methods,
            "fit_families": list(fit_families),
        },
        None,
        outputs,
    )
    if args.json:
        print(_dump_json(doc), end="")
    else:
        print(format_approximation_table(rows))
    return 0


def cmd_analyze(args) -> int:
    path = Path(args.path)
    c = parse_collection(path.read_text())
    aid = args.analysis
    if aid is None:
        if c.n_analyses != 1:
            raise ValueError(
                f"input holds {c.n_analyses} analyses; pass --analysis to pick one"
            )
        aid = c.analysis_ids[0]
    records = c.analysis(aid)
    sm = SingleMeta(
        y=tuple(r.estimate for r in records), sigma=tuple(r.std_err for r in records)
    )
    labels = [r.study_id for r in records]
    prior = parse_distribution(args.prior)
    mu_prior = None
    if args.mu_prior is not None:
        mu_prior = parse_distribution(args.mu_prior)
        if not isinstance(mu_prior, Normal):
            raise ValueError(
                f"--mu-prior must be a normal distribution, got {format_distribution(mu_prior)}"
            )
    res = bayes_ma(sm, prior, mu_prior)
    rows = forest_rows(sm, res, labels)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "analysis": aid,
        "k": sm.k,
        "prior": prior_to_dict(res.prior),
        "mu": {
            "mean": res.mu_mean,
            "median": res.mu_median,
            "sd": res.mu_sd,
            "interval": list(res.mu_interval),
            "grid": res.mu_density.grid,
            "density": res.mu_density.density,
        },
        "tau": {
            "median": res.tau_median,
            "interval": list(res.tau_interval),
            "grid": res.tau_density.grid,
            "density": res.tau_density.density,
        },
        "comparators": [
            {"label": ci.label, "estimate": ci.estimate, "lo": ci.lo, "hi": ci.hi}
            for ci in res.comparators
        ],
    }
    out = _out_dir(args)
    (out / "summary.json").write_text(_dump_json(doc))
    (out / "forest.csv").write_text(_forest_csv(rows))
    outputs = ["summary.json", "forest.csv"]
    if args.svg:
        (out / "forest.svg").write_text(forest_svg(rows, title=f"meta-analysis {aid}"))
        (out / "mu_density.svg").write_text(
            density_svg(
                [("effect posterior", res.mu_density.grid, res.mu_density.density)],
                shade=res.mu_interval,
                x_label="effect",
                title="effect posterior",
            )
        )
        grid = res.tau_density.grid
        (out / "tau_density.svg").write_text(
            density_svg(
                [
                    ("heterogeneity posterior", grid, res.tau_density.density),
                    ("prior", grid, res.prior.distribution.density(grid)),
                ],
                shade=res.tau_interval,
                x_label="heterogeneity",
                title="heterogeneity prior and posterior",
            )
        )
        outputs += ["forest.svg", "mu_density.svg", "tau_density.svg"]
    _write_manifest(
        out,
        "analyze",
        [path],
        {"analysis": aid, "prior": args.prior, "mu_prior": args.mu_prior},
        None,
        outputs,
    )
    if args.json:
        print(_dump_json(doc), end="")
    else:
        lo, hi = res.mu_interval
        print(f"analysis {aid} (k={sm.k}) under prior {res.prior.text()}")
        print(f"effect: median {res.mu_median:.4f}  95% [{lo:.4f}, {hi:.4f}]  sd {res.mu_sd:.4f}")
        tlo, thi = res.tau_interval
        print(f"heterogeneity: median {res.tau_median:.4f}  95% [{tlo:.4f}, {thi:.4f}]")
        for ci in res.comparators:
            print(f"{ci.label:<14} {ci.estimate:>8.4f}  [{ci.lo:.4f}, {ci.hi:.4f}]")
    return 0


def cmd_tau_estimates(args) -> int:
    c, path = _load_corpus(args)
    est = tau_estimate_collection(c, args.method)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "method": est.method,
        "estimates": [{"analysis": aid, "tau": tau} for aid, tau in est.estimates],
        "skipped": list(est.skipped),
        "summary": est.summary(),
    }
    out = _out_dir(args)
    (out / "summary.json").write_text(_dump_json(doc))
    _write_manifest(
        out,
        "tau-estimates",
        [path],
        {"method": est.method, "subset_recent": args.subset_recent},
        None,
        ["summary.json"],
    )
    if args.json:
        print(_dump_json(doc), end="")
    else:
        print(f"{'analysis':<20} {'tau_hat':>9}")
        for aid, tau in est.estimates:
            print(f"{aid:<20} {tau:>9.4f}")
        summary = est.summary()
        print(
            f"n={summary['n']}  fraction zero={summary['fraction_zero']:.2f}  "
            f"mean={summary['mean']:.4f}  median={summary['median']:.4f}"
        )
    return 0


# -- parser -----------------------------------------------------------------------


def _add_output_flags(sp) -> None:
    sp.add_argument("--out", default=".", help="output directory (default: current directory)")
    sp.add_argument("--json", action="store_true", help="print JSON instead of a text table")
    sp.add_argument("--svg", action="store_true", help="also write SVG plots")


def _add_corpus_flags(sp) -> None:
    sp.add_argument("path", help="corpus CSV (analysis_id,study_id,estimate,std_err[,seq])")
    sp.add_argument(
        "--subset-recent",
        type=int,
        metavar="N",
        default=None,
        help="keep only the N most recent analyses (by seq)",
    )


def _add_mcmc_flags(sp) -> None:
    sp.add_argument("--seed", type=int, default=None, help="RNG seed (generated if omitted)")
    sp.add_argument("--chains", type=int, default=4, help="number of chains (default 4)")
    sp.add_argument(
        "--iters", type=int, default=20000, help="kept iterations per chain (default 20000)"
    )
    sp.add_argument(
        "--burnin", type=int, default=5000, help="burn-in iterations per chain (default 5000)"
    )


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="hetprior",
        description="Heterogeneity priors for random-effects meta-analysis.",
    )
    p.add_argument("--version", action="version", version=f"hetprior {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("validate", help="check a corpus CSV and report its shape")
    _add_corpus_flags(sp)
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("fit", help="fit the hierarchical heterogeneity model")
    _add_corpus_flags(sp)
    sp.add_argument(
        "--family",
        default="half-normal",
        choices=tuple(HET_FAMILIES),
        help="heterogeneity family (default half-normal)",
    )
    _add_mcmc_flags(sp)
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("compare", help="DIC comparison across heterogeneity families")
    _add_corpus_flags(sp)
    sp.add_argument(
        "--families",
        default=",".join(HET_FAMILIES),
        help="comma-separated families (default: all)",
    )
    _add_mcmc_flags(sp)
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("approx", help="condense fitted samples into parametric priors")
    sp.add_argument("samples", help="samples.csv from a fit run (or its output directory)")
    sp.add_argument(
        "--family",
        default=None,
        choices=tuple(HET_FAMILIES),
        help="family that produced the samples (read from summary.json if omitted)",
    )
    sp.add_argument(
        "--methods",
        default="point:mean,mixture",
        help="comma list of point:mean, point:median, point:q95, mixture, ml, moments",
    )
    sp.add_argument(
        "--fit-families",
        default="half-t",
        help="families for the ml/moments direct fits (comma list)",
    )
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_approx)

    sp = sub.add_parser("analyze", help="Bayesian meta-analysis of one dataset under a prior")
    sp.add_argument("path", help="CSV with the studies of one meta-analysis")
    sp.add_argument(
        "--prior", required=True, help="heterogeneity prior, e.g. 'half-t(8.2,0.20)'"
    )
    sp.add_argument(
        "--mu-prior",
        default=None,
        help="optional normal effect prior, e.g. 'normal(0,2)' (default: flat)",
    )
    sp.add_argument("--analysis", default=None, help="analysis id if the file holds several")
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("tau-estimates", help="DL/PM heterogeneity estimates per analysis")
    _add_corpus_flags(sp)
    sp.add_argument("--method", default="DL", help="DL or PM (default DL)")
    _add_output_flags(sp)
    sp.set_defaults(func=cmd_tau_estimates)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GridError, FitError, InitializationError, InfeasibleError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3
    except (FormatError, RecordError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except (ConfigError, UndefinedEstimatorError, ValueError, TypeError, KeyError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
