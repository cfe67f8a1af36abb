"""Command-line front end: fit, tune, simulate, predict.

Every command writes delimited data files plus rendered figures under
--out, and embeds a run manifest in its JSON report so a run can be
reproduced exactly from the report alone.

Exit codes: 0 success, 2 usage error, 3 data validation error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.special import ndtr

from . import __version__, cavi, evaluation, gibbs, plots
from .data import Dataset, Hyperparameters, derive_nu2, validate_and_cache
from .errors import DomainError, NumericalError, ValidationError

SCHEMA_VERSION = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_NUMERICAL = 4

THREADS_ENV_VAR = "SPARSEPROBIT_THREADS"


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- ingestion

def _read_table(path: str, no_header: bool) -> pd.DataFrame:
    try:
        df = pd.read_csv(path, header=None if no_header else 0,
                         encoding="utf-8")
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except (pd.errors.ParserError, ValueError) as exc:
        raise ValidationError(f"cannot parse {path}: {exc}") from exc
    if no_header:
        df.columns = [f"col{j}" for j in range(df.shape[1])]
    else:
        df.columns = [str(c) for c in df.columns]
    return df


def _split_response(df: pd.DataFrame, response: str) -> tuple[pd.DataFrame, np.ndarray]:
    cols = list(df.columns)
    if response in cols:
        name = response
    else:
        try:
            idx = int(response)
        except ValueError:
            raise UsageError(f"response column {response!r} not found") from None
        if not (0 <= idx < len(cols)):
            raise UsageError(f"response index {idx} out of range for {len(cols)} columns")
        name = cols[idx]
    y = df[name].to_numpy()
    features = df.drop(columns=[name])
    return features, y


def _build_dataset(features: pd.DataFrame, y: np.ndarray, standardize: bool,
                   intercept: bool):
    """Dataset plus the preprocessing stats the manifest must carry."""
    X = features.to_numpy(dtype=float)
    names = [str(c) for c in features.columns]
    if standardize:
        means = X.mean(axis=0)
        sds = X.std(axis=0)
        sds = np.where(sds > 0.0, sds, 1.0)
        X = (X - means) / sds
    else:
        means = np.zeros(X.shape[1])
        sds = np.ones(X.shape[1])
    if intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
        base = "intercept"
        while base in names:
            base = "_" + base
        names.append(base)
    dataset = Dataset(X=X, y=y, feature_names=tuple(names))
    prep = {
        "standardize": standardize,
        "intercept": intercept,
        "column_means": means.tolist(),
        "column_sds": sds.tolist(),
        "input_features": len(names) - (1 if intercept else 0),
        "feature_names": names,
    }
    return dataset, prep


def _apply_preprocessing(features: pd.DataFrame, prep: dict) -> np.ndarray:
    X = features.to_numpy(dtype=float)
    if X.shape[1] != prep["input_features"]:
        raise ValidationError(
            f"expected {prep['input_features']} feature columns, got {X.shape[1]}")
    if prep["standardize"]:
        X = (X - np.array(prep["column_means"])) / np.array(prep["column_sds"])
    if prep["intercept"]:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
    return X


# ----------------------------------------------------------------- emission

def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_csv(df: pd.DataFrame, path: Path) -> None:
    df.to_csv(path, index=False)


def _json_default(obj):
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _write_json(payload: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=_json_default)
        fh.write("\n")


def _manifest(command: str, args: argparse.Namespace, **extra) -> dict:
    skip = {"func"}
    flat = {k: v for k, v in vars(args).items() if k not in skip}
    return {
        "command": command,
        "tool_version": __version__,
        "schema_version": SCHEMA_VERSION,
        "args": flat,
        **extra,
    }


def _check_rho(rho: float) -> float:
    if not (0.0 < rho < 1.0):
        raise UsageError(f"--rho must lie strictly inside (0, 1), got {rho}")
    return rho


def _resolve_threads(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{THREADS_ENV_VAR} must be an integer, got {env!r}")
    return os.cpu_count() or 1


# ----------------------------------------------------------------- commands

def cmd_fit(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    out = _outdir(args.out)
    df = _read_table(args.data, args.no_header)
    features, y = _split_response(df, args.response)
    dataset, prep = _build_dataset(features, y, args.standardize, args.intercept)
    gram = validate_and_cache(dataset)
    if gram.has_zero_columns:
        print(f"warning: constant-zero feature columns {list(gram.zero_columns)}; "
              "their inclusion probability stays at the prior", file=sys.stderr)

    rho = _check_rho(args.rho)
    nu2 = args.nu2 if args.nu2 is not None else derive_nu2(rho, dataset.p, args.nu0sq)
    hyper = Hyperparameters(nu2=nu2, rho=rho, nu0_2=args.nu0sq)
    names = list(dataset.names())

    timings = {}
    if args.method == "vb":
        config = cavi.CaviConfig(max_iter=args.max_iter, tol_elbo=args.tol,
                                 tol_param=args.tol)
        result = cavi.fit(dataset, hyper, config, gram=gram)
        pips = result.state.w
        masked = result.state.masked_mean
        converged = result.converged
        timings["fit_seconds"] = result.runtime_s
        _write_csv(pd.DataFrame({"sweep": np.arange(1, len(result.trace.values) + 1),
                                 "elbo": result.trace.values}),
                   out / "elbo_trace.csv")
        _write_csv(pd.DataFrame({"feature": names, "w": pips, "mu": result.state.mu}),
                   out / "state.csv")
        plots.plot_elbo_trace(result.trace.values, out / "elbo_trace.png")
        method_report = {"n_sweeps": result.n_sweeps,
                         "final_elbo": result.trace.values[-1]}
    else:
        config = gibbs.GibbsConfig(iterations=args.iters, burn_in=args.burnin,
                                   seed=args.seed, thin=args.thin)
        draws = gibbs.run_chain(dataset, hyper, config, gram=gram)
        summary = gibbs.posterior_summaries(draws)
        pips = summary.pip
        masked = summary.masked_mean
        converged = True
        timings["fit_seconds"] = draws.runtime_s
        cols = {f"gamma_{nm}": draws.gamma_draws[:, j] for j, nm in enumerate(names)}
        cols.update({f"beta_{nm}": draws.beta_draws[:, j] for j, nm in enumerate(names)})
        _write_csv(pd.DataFrame(cols), out / "draws.csv")
        method_report = {"stored_draws": draws.n_stored,
                         "flip_counts": draws.flip_counts.tolist()}

    _write_csv(pd.DataFrame({"feature": names, "pip": pips,
                             "masked_coefficient": masked}),
               out / "pips.csv")
    plots.plot_pips(names, pips, out / "pips.png")

    selected = [names[j] for j in np.flatnonzero(np.asarray(pips) > 0.5)]
    timings["total_seconds"] = time.perf_counter() - t_start
    report = {
        "schema_version": SCHEMA_VERSION,
        "manifest": _manifest("fit", args, preprocessing=prep,
                              hyperparameters={"rho": rho, "nu2": nu2,
                                               "nu0_2": args.nu0sq}),
        "method": args.method,
        "n": dataset.n,
        "p": dataset.p,
        "converged": converged,
        "selected_features": selected,
        "selection_threshold": 0.5,
        "zero_columns": list(gram.zero_columns),
        "companions": {
            "pips": "pips.csv",
            "state": "state.csv" if args.method == "vb" else None,
            "draws": "draws.csv" if args.method == "gibbs" else None,
        },
        **method_report,
        "timings": timings,
    }
    _write_json(report, out / "report.json")
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    out = _outdir(args.out)
    df = _read_table(args.data, args.no_header)
    features, y = _split_response(df, args.response)
    dataset, prep = _build_dataset(features, y, args.standardize, args.intercept)

    grid = _parse_grid(args.rho_grid)
    cv = evaluation.CvConfig(K=args.folds, rho_grid=grid, nu0_2=args.nu0sq,
                             seed=args.seed)
    config = cavi.CaviConfig(max_iter=args.max_iter, tol_elbo=args.tol,
                             tol_param=args.tol)
    tuned = evaluation.tune_rho(dataset, cv, config)

    _write_csv(pd.DataFrame([{"rho": pt.rho, "nu2": pt.nu2, "dev_cv": pt.dev_cv,
                              "nonconverged_folds": pt.nonconverged_folds}
                             for pt in tuned.curve]),
               out / "cv_curve.csv")
    fold_rows = [{"index": int(i), "fold": k}
                 for k, members in enumerate(tuned.folds) for i in members]
    fold_rows.sort(key=lambda r: r["index"])
    _write_csv(pd.DataFrame(fold_rows), out / "folds.csv")
    plots.plot_cv_curve([pt.rho for pt in tuned.curve],
                        [pt.dev_cv for pt in tuned.curve],
                        out / "cv_curve.png")
    _write_json({
        "schema_version": SCHEMA_VERSION,
        "manifest": _manifest("tune", args, preprocessing=prep),
        "rho": tuned.rho,
        "nu2": tuned.nu2,
        "timings": {"total_seconds": time.perf_counter() - t_start},
    }, out / "best.json")
    return 0


_PRESETS = {
    "s1": dict(p=200, n=1000, replicates=50),
    "s2": dict(p=1000, n=500, replicates=20),
}


def cmd_simulate(args: argparse.Namespace) -> int:
    t_start = time.perf_counter()
    out = _outdir(args.out)
    if args.scenario in _PRESETS:
        preset = dict(_PRESETS[args.scenario])
    else:
        preset = {}
    n = args.n if args.n is not None else preset.get("n")
    p = args.p if args.p is not None else preset.get("p")
    replicates = args.replicates if args.replicates is not None else preset.get("replicates")
    if n is None or p is None or replicates is None:
        raise UsageError("custom scenarios require --n, --p and --replicates")

    scenario = evaluation.SimulationScenario(n=n, p=p, replicates=replicates,
                                             seed=args.seed)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    for m in methods:
        if m not in ("vb", "gibbs"):
            raise UsageError(f"unknown method {m!r}; choose from vb, gibbs")
    cavi_config = cavi.CaviConfig(max_iter=args.max_iter, tol_elbo=args.tol,
                                  tol_param=args.tol)
    gibbs_config = gibbs.GibbsConfig(iterations=args.iters, burn_in=args.burnin,
                                     seed=args.seed)
    report = evaluation.run_scenario(scenario, methods,
                                     cavi_config=cavi_config,
                                     gibbs_config=gibbs_config,
                                     n_jobs=_resolve_threads(args))

    _write_csv(pd.DataFrame(report.summary_rows()), out / "table1.csv")
    pip_df = pd.DataFrame(report.pip_rows())
    _write_csv(pip_df, out / "pip_vs_truth.csv")
    plots.plot_pip_vs_truth(
        pip_df["true_effect"].to_numpy(),
        {m: pip_df[f"pip_{m}"].to_numpy() for m in methods},
        out / "pip_vs_truth.png")
    _write_json({
        "schema_version": SCHEMA_VERSION,
        "manifest": _manifest("simulate", args,
                              scenario={"n": n, "p": p, "replicates": replicates,
                                        "active": scenario.n_active}),
        "methods": list(methods),
        "tuned_rho": [rep.rho for rep in report.replicates],
        "timings": {"total_seconds": time.perf_counter() - t_start},
    }, out / "report.json")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    out = _outdir(args.out)
    model_path = Path(args.model)
    try:
        with open(model_path, encoding="utf-8") as fh:
            report = json.load(fh)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"cannot parse model report: {exc}") from exc
    if report.get("manifest", {}).get("command") != "fit":
        raise ValidationError("model report was not produced by the fit command")
    prep = report["manifest"]["preprocessing"]
    method = report["method"]
    model_dir = model_path.parent

    df = _read_table(args.data, args.no_header)
    X = _apply_preprocessing(df, prep)

    if method == "vb":
        state = pd.read_csv(model_dir / report["companions"]["state"])
        probs = ndtr(X @ (state["w"].to_numpy() * state["mu"].to_numpy()))
    else:
        draws_df = pd.read_csv(model_dir / report["companions"]["draws"])
        p = len(prep["feature_names"])
        gamma = draws_df.iloc[:, :p].to_numpy()
        beta = draws_df.iloc[:, p:2 * p].to_numpy()
        eff = gamma * beta
        probs = ndtr(X @ eff.T).mean(axis=1)

    _write_csv(pd.DataFrame({"row": np.arange(len(probs)), "p_hat": probs}),
               out / "predictions.csv")
    return 0


# --------------------------------------------------------------- arg parser

def _parse_grid(spec: str) -> tuple[float, ...]:
    """Either 'start:stop:step' or a comma-separated list."""
    try:
        if ":" in spec:
            start, stop, step = (float(tok) for tok in spec.split(":"))
            k = int(round((stop - start) / step))
            return tuple(np.round(start + step * np.arange(k + 1), 10))
        return tuple(float(tok) for tok in spec.split(","))
    except ValueError as exc:
        raise UsageError(f"cannot parse rho grid {spec!r}") from exc


def _add_data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="input CSV path")
    p.add_argument("--response", required=True,
                   help="response column name or 0-based index")
    p.add_argument("--no-header", action="store_true",
                   help="the CSV has no header row")
    p.add_argument("--standardize", action="store_true",
                   help="standardize features to zero mean, unit variance")
    p.add_argument("--intercept", action="store_true",
                   help="append an intercept column (masked like any feature)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparseprobit",
        description="Sparse Bayesian probit regression (spike-and-slab) "
                    "via variational Bayes or collapsed Gibbs sampling.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit one model and write a report")
    _add_data_flags(p_fit)
    p_fit.add_argument("--method", choices=("vb", "gibbs"), default="vb")
    p_fit.add_argument("--rho", type=float, required=True,
                       help="prior inclusion probability, in (0, 1)")
    p_fit.add_argument("--nu0sq", type=float, default=25.0,
                       help="base prior variance of the linear predictor")
    p_fit.add_argument("--nu2", type=float, default=None,
                       help="explicit slab variance (default: nu0sq / (rho p))")
    p_fit.add_argument("--seed", type=int, default=0)
    p_fit.add_argument("--tol", type=float, default=1e-6)
    p_fit.add_argument("--max-iter", type=int, default=500)
    p_fit.add_argument("--iters", type=int, default=11_000,
                       help="gibbs: total iterations")
    p_fit.add_argument("--burnin", type=int, default=1_000)
    p_fit.add_argument("--thin", type=int, default=1)
    p_fit.add_argument("--out", required=True)
    p_fit.set_defaults(func=cmd_fit)

    p_tune = sub.add_parser("tune", help="cross-validate the inclusion prior")
    _add_data_flags(p_tune)
    p_tune.add_argument("--folds", type=int, default=5)
    p_tune.add_argument("--rho-grid", default="0.05:0.5:0.05",
                        help="'start:stop:step' or comma-separated values")
    p_tune.add_argument("--nu0sq", type=float, default=25.0)
    p_tune.add_argument("--seed", type=int, default=0)
    p_tune.add_argument("--tol", type=float, default=1e-6)
    p_tune.add_argument("--max-iter", type=int, default=500)
    p_tune.add_argument("--out", required=True)
    p_tune.set_defaults(func=cmd_tune)

    p_sim = sub.add_parser("simulate", help="run a synthetic benchmark scenario")
    p_sim.add_argument("--scenario", choices=("s1", "s2", "custom"), default="custom")
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--p", type=int, default=None)
    p_sim.add_argument("--replicates", type=int, default=None)
    p_sim.add_argument("--methods", default="vb",
                       help="comma-separated subset of vb,gibbs")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--tol", type=float, default=1e-6)
    p_sim.add_argument("--max-iter", type=int, default=500)
    p_sim.add_argument("--iters", type=int, default=11_000)
    p_sim.add_argument("--burnin", type=int, default=1_000)
    p_sim.add_argument("--threads", type=int, default=None,
                       help=f"worker processes (default: ${THREADS_ENV_VAR} "
                            "or machine parallelism)")
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_pred = sub.add_parser("predict", help="score new rows with a fitted model")
    p_pred.add_argument("--model", required=True,
                        help="path to a fit report.json")
    p_pred.add_argument("--data", required=True,
                        help="CSV of new feature rows (no response column)")
    p_pred.add_argument("--no-header", action="store_true")
    p_pred.add_argument("--out", required=True)
    p_pred.set_defaults(func=cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (UsageError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
