"""Command-line front end.

Subcommands: ``datagen``, ``fit``, ``gridsearch``, ``evaluate``, ``curves``.
Experiments are driven by a plain-text config file with sections (INI
style); command-line flags override file values.  All outputs land under
``--out`` as CSV/JSON/SVG with no timestamps, so identical configs and
seeds reproduce identical bytes.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import configparser
import itertools
import json
import os
import sys

import numpy as np

from . import datagen, laplace, mcmc, metrics, nn
from .dataset import (
    DatasetError,
    IntervalDataset,
    Standardizer,
    apply_standardizer,
    fit_standardizer,
    read_dataset,
    split_by_item,
    write_dataset,
)
from .svgplot import SvgPlot

MODEL_KINDS = (
    "baseline",
    "linear-mvn",
    "spike-slab-continuous",
    "spike-slab-discrete",
    "laplace-nn",
    "bnn",
)


class UsageError(Exception):
    """Bad flags or config; maps to exit code 2."""


def _load_config(path):
    cp = configparser.ConfigParser()
    if path:
        if not os.path.exists(path):
            raise UsageError(f"config file not found: {path}")
        cp.read(path)
    return cp


def _get(cp, section, key, cast=str, default=None):
    if cp.has_option(section, key):
        raw = cp.get(section, key)
        if cast is bool:
            return raw.strip().lower() in ("1", "true", "yes", "on")
        return cast(raw)
    return default


def _json_dump(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _ensure_out(out):
    if not out:
        raise UsageError("an output directory is required (--out or [output] dir)")
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# datagen
# ---------------------------------------------------------------------------

def cmd_datagen(args, cp):
    kind = args.kind or _get(cp, "dataset", "kind")
    if kind not in ("moons1", "banana1", "moons2", "banana2", "heartfailure"):
        raise UsageError(f"unknown datagen kind {kind!r}")
    out = _ensure_out(args.out or _get(cp, "output", "dir"))
    seed = args.seed if args.seed is not None else _get(cp, "dataset", "seed", int, 0)
    window = args.window or _get(cp, "dataset", "window", float, 2.0)
    if kind == "heartfailure":
        src = args.input or _get(cp, "dataset", "input")
        if not src:
            raise UsageError("heartfailure ingestion needs --input CSV")
        window_days = args.window_days or _get(cp, "dataset", "window_days", float, 30.0)
        ds = datagen.ingest_heartfailure(src, window_days)
    else:
        n = args.n or _get(cp, "dataset", "n", int, 1000)
        noise = args.noise if args.noise is not None else _get(cp, "dataset", "noise", float, 0.1)
        max_time = _get(cp, "dataset", "max_time", float, 100.0)
        maker = datagen.make_moons if kind.startswith("moons") else datagen.make_banana
        points, labels = maker(n, noise=noise, seed=seed)
        wspec = datagen.CensorWindowSpec(window=window, max_time=max_time)
        if kind.endswith("1"):
            specs = (
                datagen.WeibullClassSpec(0.1, 2.5),
                datagen.WeibullClassSpec(0.5, 3.0),
            )
            ds = datagen.generate_synthetic_1(points, labels, specs, wspec, seed)
        else:
            ds = datagen.generate_synthetic_2(points, labels, (2.5, 3.0), wspec, seed)
    path = os.path.join(out, "dataset.csv")
    write_dataset(ds, path)
    print(f"wrote {len(ds)} records over {ds.n_items} items to {path}")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _standardizer_json(sc):
    return {"mean": list(sc.mean), "std": list(sc.std)}


def _standardizer_from_json(obj):
    return Standardizer(tuple(obj["mean"]), tuple(obj["std"]))


def _train_config(cp, args):
    seed = args.seed if args.seed is not None else _get(cp, "model", "seed", int, 0)
    return nn.TrainConfig(
        learning_rate=_get(cp, "model", "learning_rate", float, 1e-2),
        batch_size=_get(cp, "model", "batch_size", int, 128),
        epochs=_get(cp, "model", "epochs", int, 2000),
        precision=_get(cp, "model", "precision", float, 1e-2),
        coordinate_descent=_get(cp, "model", "coordinate_descent", bool, False),
        seed=seed,
    )


def _nuts_config(cp, args):
    seed = args.seed if args.seed is not None else _get(cp, "model", "seed", int, 0)
    return mcmc.NutsConfig(
        chains=_get(cp, "model", "chains", int, 4),
        warmup=_get(cp, "model", "warmup", int, 20000),
        draws=_get(cp, "model", "draws", int, 1000),
        target_accept=_get(cp, "model", "target_accept", float, 0.99),
        max_depth=_get(cp, "model", "max_depth", int, 10),
        seed=seed,
    )


def _priors(cp):
    return mcmc.BaselinePriors(t_fix=_get(cp, "model", "t_fix", float, 1.0))


def _spike_slab_config(cp):
    return mcmc.SpikeSlabConfig(
        spike_var=_get(cp, "model", "spike_var", float, 0.0025),
        slab_var=_get(cp, "model", "slab_var", float, 1.0),
        inclusion_prob=_get(cp, "model", "inclusion_prob", float, 0.5),
    )


def _load_and_split(cp, args):
    path = args.dataset or _get(cp, "dataset", "path")
    if not path:
        raise UsageError("a dataset CSV is required (--dataset or [dataset] path)")
    ds = read_dataset(path)
    frac = _get(cp, "dataset", "test_fraction", float, 0.25)
    split_seed = _get(cp, "dataset", "split_seed", int, 0)
    if frac and ds.n_items >= 2:
        train, test = split_by_item(ds, frac, split_seed)
    else:
        train, test = ds, None
    return train, test


def _mcmc_diag_summary(samples):
    worst_rhat = max(
        (d.rhat for d in samples.diagnostics.values() if np.isfinite(d.rhat)),
        default=float("nan"),
    )
    min_ess = min(
        (d.ess for d in samples.diagnostics.values() if np.isfinite(d.ess)),
        default=float("nan"),
    )
    return worst_rhat, min_ess


def cmd_fit(args, cp):
    kind = args.model or _get(cp, "model", "kind")
    if kind not in MODEL_KINDS:
        raise UsageError(
            f"unknown model kind {kind!r}; choose from {', '.join(MODEL_KINDS)}"
        )
    out = _ensure_out(args.out or _get(cp, "output", "dir"))
    train, test = _load_and_split(cp, args)
    sc = fit_standardizer(train)
    train_std = apply_standardizer(sc, train)
    write_dataset(train, os.path.join(out, "train.csv"))
    if test is not None:
        write_dataset(test, os.path.join(out, "test.csv"))

    artifact = {
        "kind": kind,
        "n_features": train.n_features,
        "standardizer": _standardizer_json(sc),
    }
    status = 0
    if kind in ("laplace-nn", "bnn"):
        cfg = _train_config(cp, args)
        spec = nn.MlpSpec(train.n_features, _get(cp, "model", "hidden_units", int, 0))
        result, posterior = laplace.fit_laplace(spec, train_std, cfg)
        artifact["nn"] = {
            "spec": {"n_features": spec.n_features, "hidden_units": spec.hidden_units},
            "phi": result.phi.tolist(),
            "train_config": {
                "learning_rate": cfg.learning_rate,
                "batch_size": cfg.batch_size,
                "epochs": cfg.epochs,
                "precision": cfg.precision,
                "coordinate_descent": cfg.coordinate_descent,
                "seed": cfg.seed,
            },
            "final_objective": result.objective,
        }
        artifact["laplace"] = {
            "phi_star": posterior.phi.tolist(),
            "sigma": posterior.Sigma.reshape(-1).tolist(),
            "rho": posterior.rho,
            "log_marginal": posterior.log_marginal,
        }
        artifact["predictive"] = {
            "n_samples": _get(cp, "model", "predictive_samples", int, 100),
            "mode": "bnn" if kind == "bnn" else "glm",
            "seed": _get(cp, "model", "predictive_seed", int, 0),
        }
        print(f"log marginal likelihood: {posterior.log_marginal:.6f}")
        print(f"final MAP objective:     {result.objective:.6f}")
    else:
        cfg = _nuts_config(cp, args)
        priors = _priors(cp)
        if kind == "baseline":
            samples = mcmc.fit_baseline(train_std, cfg, priors)
        elif kind == "linear-mvn":
            samples = mcmc.fit_linear_mvn(train_std, cfg, priors)
        else:
            ss = _spike_slab_config(cp)
            mode = (
                "continuous_nmig"
                if kind == "spike-slab-continuous"
                else "discrete_marginalized"
            )
            samples, pip = mcmc.fit_spike_slab(train_std, ss, mode, cfg, priors)
            artifact["spike_slab"] = {
                "spike_var": ss.spike_var,
                "slab_var": ss.slab_var,
                "inclusion_prob": ss.inclusion_prob,
            }
            artifact["pip"] = pip.tolist()
        artifact["mcmc"] = samples.to_json()
        worst_rhat, min_ess = _mcmc_diag_summary(samples)
        print("parameter diagnostics (rhat, ess, mcse):")
        for name, d in samples.diagnostics.items():
            print(f"  {name:>14s}  {d.rhat:8.4f}  {d.ess:10.1f}  {d.mcse:.3e}")
        print(f"divergences: {int(samples.divergences.sum())}")
        for w in samples.warnings:
            print(f"warning: {w}")
        if (np.isfinite(worst_rhat) and worst_rhat > 1.05) or (
            np.isfinite(min_ess) and min_ess < 100
        ):
            print("diagnostics failure: rhat > 1.05 or ess < 100", file=sys.stderr)
            status = 1
    path = os.path.join(out, "model.json")
    _json_dump(artifact, path)
    print(f"wrote {path}")
    return status


# ---------------------------------------------------------------------------
# gridsearch
# ---------------------------------------------------------------------------

def _grid_values(cp, key, cast, default):
    raw = _get(cp, "grid", key)
    if raw is None:
        return [default]
    vals = []
    for tok in raw.replace(",", " ").split():
        if cast is bool:
            vals.append(tok.strip().lower() in ("1", "true", "yes", "on"))
        else:
            vals.append(cast(tok))
    return vals


def cmd_gridsearch(args, cp):
    out = _ensure_out(args.out or _get(cp, "output", "dir"))
    train, _ = _load_and_split(cp, args)
    sc = fit_standardizer(train)
    train_std = apply_standardizer(sc, train)
    seed = args.seed if args.seed is not None else _get(cp, "model", "seed", int, 0)

    grid = {
        "precision": _grid_values(cp, "precision", float, 1e-2),
        "batch_size": _grid_values(cp, "batch_size", int, 128),
        "hidden_units": _grid_values(cp, "hidden_units", int, 0),
        "learning_rate": _grid_values(cp, "learning_rate", float, 1e-2),
        "epochs": _grid_values(cp, "epochs", int, 2000),
        "coordinate_descent": _grid_values(cp, "coordinate_descent", bool, False),
    }
    keys = list(grid)
    combos = list(itertools.product(*(grid[k] for k in keys)))
    if not combos:
        raise UsageError("empty hyperparameter grid")
    rows = []
    for combo in combos:
        params = dict(zip(keys, combo))
        cfg = nn.TrainConfig(
            learning_rate=params["learning_rate"],
            batch_size=params["batch_size"],
            epochs=params["epochs"],
            precision=params["precision"],
            coordinate_descent=params["coordinate_descent"],
            seed=seed,
        )
        spec = nn.MlpSpec(train.n_features, params["hidden_units"])
        _, posterior = laplace.fit_laplace(spec, train_std, cfg)
        rows.append((params, posterior.log_marginal))
        print(
            f"hidden={params['hidden_units']:>3d} rho={params['precision']:<8g} "
            f"B={params['batch_size']:<5d} lr={params['learning_rate']:<8g} "
            f"epochs={params['epochs']:<6d} cd={params['coordinate_descent']} "
            f"-> evidence {posterior.log_marginal:.4f}"
        )
    # sort by evidence then by the combo itself so enumeration order is irrelevant
    rows.sort(key=lambda r: (-r[1], tuple(sorted(r[0].items(), key=str))))
    table = os.path.join(out, "gridsearch.csv")
    with open(table, "w", encoding="utf-8") as fh:
        fh.write(",".join(keys) + ",log_marginal\n")
        for params, ev in rows:
            fh.write(",".join(str(params[k]) for k in keys) + f",{ev:.17g}\n")
    best = dict(rows[0][0])
    best["log_marginal"] = rows[0][1]
    _json_dump(best, os.path.join(out, "best_config.json"))
    print(f"best: {best}")
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _load_artifact(path):
    if not os.path.exists(path):
        raise UsageError(f"model artifact not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _artifact_scores(artifact, ds):
    if ds.n_features != artifact["n_features"]:
        raise DatasetError(
            f"dataset has {ds.n_features} features, model expects "
            f"{artifact['n_features']}"
        )
    sc = _standardizer_from_json(artifact["standardizer"])
    ds_std = apply_standardizer(sc, ds)
    X, y, t1, t2 = ds_std.arrays()
    kind = artifact["kind"]
    if kind in ("laplace-nn", "bnn"):
        spec = nn.MlpSpec(**artifact["nn"]["spec"])
        lp = artifact["laplace"]
        P = spec.n_params
        posterior = laplace.LaplacePosterior(
            spec=spec,
            phi=np.asarray(lp["phi_star"]),
            Sigma=np.asarray(lp["sigma"]).reshape(P, P),
            rho=lp["rho"],
            log_marginal=lp["log_marginal"],
        )
        pcfg = laplace.PredictiveConfig(
            n_samples=artifact["predictive"]["n_samples"],
            mode=artifact["predictive"]["mode"],
            seed=artifact["predictive"]["seed"],
        )
        if pcfg.mode == "bnn":
            pred = laplace.bnn_predict(spec, posterior, X, t1, t2, pcfg)
        else:
            pred = laplace.glm_predict(spec, posterior, X, t1, t2, pcfg)
        scores = pred.mean
    else:
        samples = mcmc.PosteriorSamples.from_json(artifact["mcmc"])
        scores = mcmc.predict_failure_probability(samples, X, t1, t2)
    return scores, y


def cmd_evaluate(args, cp):
    artifact = _load_artifact(args.artifact)
    path = args.dataset or _get(cp, "dataset", "path")
    if not path:
        raise UsageError("a test dataset CSV is required (--dataset)")
    ds = read_dataset(path)
    scores, y = _artifact_scores(artifact, ds)
    report = {
        "roc_auc": metrics.roc_auc(scores, y.astype(int)),
        "pr_auc": metrics.pr_auc(scores, y.astype(int)),
    }
    if args.relative_to:
        with open(args.relative_to, "r", encoding="utf-8") as fh:
            base = json.load(fh)
        for key in ("roc_auc", "pr_auc"):
            if base.get(key):
                report[f"{key}_pct_vs_baseline"] = (
                    100.0 * (report[key] - base[key]) / base[key]
                )
    for key, val in sorted(report.items()):
        if key.endswith("_pct_vs_baseline"):
            print(f"{key}: {val:+.2f}%")
        else:
            print(f"{key}: {val:.6f}")
    if args.out:
        out = _ensure_out(args.out)
        _json_dump(report, os.path.join(out, "metrics.json"))
        print(f"wrote {os.path.join(out, 'metrics.json')}")
    return 0


# ---------------------------------------------------------------------------
# curves
# ---------------------------------------------------------------------------

def _artifact_reliability_draws(artifact, ds_std, item_X):
    kind = artifact["kind"]
    if kind in ("laplace-nn", "bnn"):
        spec = nn.MlpSpec(**artifact["nn"]["spec"])
        lp = artifact["laplace"]
        P = spec.n_params
        posterior = laplace.LaplacePosterior(
            spec=spec,
            phi=np.asarray(lp["phi_star"]),
            Sigma=np.asarray(lp["sigma"]).reshape(P, P),
            rho=lp["rho"],
            log_marginal=lp["log_marginal"],
        )
        pcfg = laplace.PredictiveConfig(
            n_samples=artifact["predictive"]["n_samples"],
            mode=artifact["predictive"]["mode"],
            seed=artifact["predictive"]["seed"],
        )
        return laplace.reliability_draw_arrays(spec, posterior, item_X, pcfg)
    samples = mcmc.PosteriorSamples.from_json(artifact["mcmc"])
    return mcmc.reliability_draw_arrays(samples, item_X)


def _write_curve_csv(path, curve, km=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,mean,lo,hi" + (",km" if km is not None else "") + "\n")
        for i, (t, m, lo, hi) in enumerate(curve.rows()):
            row = f"{t:.17g},{m:.17g},{lo:.17g},{hi:.17g}"
            if km is not None:
                row += f",{km[i]:.17g}"
            fh.write(row + "\n")


def cmd_curves(args, cp):
    artifact = _load_artifact(args.artifact)
    path = args.dataset or _get(cp, "dataset", "path")
    if not path:
        raise UsageError("a dataset CSV is required (--dataset)")
    ds = read_dataset(path)
    out = _ensure_out(args.out or _get(cp, "output", "dir"))
    sc = _standardizer_from_json(artifact["standardizer"])
    ds_std = apply_standardizer(sc, ds)

    if args.grid:
        start, stop, num = args.grid.split(":")
        times = np.linspace(float(start), float(stop), int(num))
    else:
        t_max = max(r.t_age for r in ds.records)
        times = np.linspace(0.0, t_max, 50)

    wanted = args.items.split(",") if args.items else []
    for item in wanted:
        if item not in ds.items:
            raise UsageError(f"item {item!r} not in dataset")
    all_ids = list(ds_std.item_ids)
    X_items = np.vstack(
        [np.asarray(ds_std.records[ds_std.items[i][0]].x) for i in all_ids]
    )
    g, lam, k = _artifact_reliability_draws(artifact, ds_std, X_items)
    per_item, population = metrics.reliability_curves(g, lam, k, times)

    km_curve = metrics.kaplan_meier(ds) if args.km else None
    km_vals = km_curve.evaluate(times) if km_curve is not None else None

    pop_path = os.path.join(out, "population.csv")
    _write_curve_csv(pop_path, population, km_vals)
    plot = SvgPlot(title="population reliability", xlabel="age",
                   ylabel="reliability", ylim=(0.0, 1.02))
    plot.add_band(population.times, population.lower, population.upper,
                  label=f"{int(population.level * 100)}% credible band")
    plot.add_line(population.times, population.mean, label="posterior mean")
    if km_curve is not None:
        plot.add_steps(np.concatenate([[0.0], km_curve.times]),
                       np.concatenate([[1.0], km_curve.survival]),
                       label="Kaplan-Meier")
    plot.write(os.path.join(out, "population.svg"))
    written = [pop_path]

    for item in wanted:
        idx = all_ids.index(item)
        curve = per_item[idx]
        cpath = os.path.join(out, f"item_{item}.csv")
        _write_curve_csv(cpath, curve)
        iplot = SvgPlot(title=f"item {item} reliability", xlabel="age",
                        ylabel="reliability", ylim=(0.0, 1.02))
        iplot.add_band(curve.times, curve.lower, curve.upper,
                       label=f"{int(curve.level * 100)}% credible band")
        iplot.add_line(curve.times, curve.mean, label="posterior mean")
        iplot.write(os.path.join(out, f"item_{item}.svg"))
        written.append(cpath)
    print(f"wrote {', '.join(written)}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="intervalweib",
        description="Bayesian Weibull reliability models for interval-censored data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="INI-style experiment config")
        p.add_argument("--seed", type=int, help="override the model/data seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("datagen", help="generate or ingest a dataset CSV")
    common(p)
    p.add_argument("--kind", choices=["moons1", "banana1", "moons2", "banana2", "heartfailure"])
    p.add_argument("--n", type=int, help="number of base points / items")
    p.add_argument("--window", type=float, help="inspection window width")
    p.add_argument("--noise", type=float, help="base point cluster noise")
    p.add_argument("--input", help="source CSV for heartfailure ingestion")
    p.add_argument("--window-days", dest="window_days", type=float)

    p = sub.add_parser("fit", help="fit a model and persist the artifact")
    common(p)
    p.add_argument("--model", help=f"one of {', '.join(MODEL_KINDS)}")
    p.add_argument("--dataset", help="dataset CSV")

    p = sub.add_parser("gridsearch", help="hyperparameter search by training evidence")
    common(p)
    p.add_argument("--dataset", help="dataset CSV")

    p = sub.add_parser("evaluate", help="score a fitted model on a test dataset")
    common(p)
    p.add_argument("--artifact", required=True, help="model.json from fit")
    p.add_argument("--dataset", help="test dataset CSV")
    p.add_argument("--relative-to", dest="relative_to",
                   help="baseline metrics.json for percentage deltas")

    p = sub.add_parser("curves", help="emit reliability curves as CSV and SVG")
    common(p)
    p.add_argument("--artifact", required=True, help="model.json from fit")
    p.add_argument("--dataset", help="dataset CSV")
    p.add_argument("--grid", help="time grid start:stop:num")
    p.add_argument("--items", help="comma-separated item ids for per-item curves")
    p.add_argument("--km", action="store_true", help="overlay a Kaplan-Meier curve")

    return parser


_COMMANDS = {
    "datagen": cmd_datagen,
    "fit": cmd_fit,
    "gridsearch": cmd_gridsearch,
    "evaluate": cmd_evaluate,
    "curves": cmd_curves,
}


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cp = _load_config(args.config)
        return _COMMANDS[args.command](args, cp)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DatasetError, ValueError, OSError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
