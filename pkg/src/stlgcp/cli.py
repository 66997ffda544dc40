"""Batch front door: fit / cv / simulate / classify / report / oracle."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import sys
import time

import click
import numpy as np

from . import __version__
from .cv import cv_spatial_kfold, cv_temporal_loo
from .dataset import DatasetError, PanelDataset, assemble_panel
from .graph import GraphError, load_graph
from .laplace import GridConfig, NumericError, explore_hyper, posterior_summaries
from .mcmc import ChainConfig, dump_samples, run_chain
from .model import ModelSpec, build_layout, hyper_names
from .simulate import SimConfig, SimulationError, sample_dataset, write_dataset_csvs
from .validate import ClassLabel, roc_auc

EXIT_VALIDATION = 2
EXIT_NUMERIC = 3

_USER_ERRORS = (DatasetError, GraphError, SimulationError, ValueError, OSError)


def _fmt(v) -> str:
    return format(float(v), ".12g")


def _read_config_file(path):
    """Flat `key = value` pairs; '#' starts a comment."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DatasetError(f"{path}:{line_no}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = val
    return out


def _merge(flag_value, config, key, default, cast=str):
    """Flags override the config file, which overrides the default."""
    if flag_value is not None:
        return flag_value
    if key in config:
        raw = config[key]
        if cast is bool:
            return str(raw).strip().lower() in ("1", "true", "yes")
        return cast(raw)
    return default


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, inputs, settings):
    manifest = {
        "command": command,
        "stlgcp_version": __version__,
        "numpy_version": np.__version__,
        "created_unix": time.time(),
        "inputs": {k: {"path": str(p), "sha256": _sha256(p)} for k, p in inputs.items() if p},
        "settings": settings,
        "conventions": {
            "field_ordering": "period-major (all units of period 1, then period 2, ...)",
            "spatial_precision": "conditional tau; intrinsic matrix unscaled",
            "newton_tolerance": 1e-6,
            "constraint_tolerance": 1e-8,
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_panel(units, edges, covariates, counts, overlaps, slices, sd_convention):
    graph = load_graph(units, edges)
    return assemble_panel(graph, covariates, counts_path=counts,
                          overlaps_path=overlaps, slices_path=slices,
                          sd_convention=sd_convention)


def _write_summary_csv(path, data: PanelDataset, summ):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "period", "eta_mean", "eta_sd", "intensity_plugin",
                    "intensity_mean", "susceptibility", "class"])
        for j, label in enumerate(data.period_labels):
            for i, u in enumerate(data.graph.unit_ids):
                w.writerow([u, label, _fmt(summ.eta_mean[i, j]), _fmt(summ.eta_sd[i, j]),
                            _fmt(summ.intensity_plugin[i, j]), _fmt(summ.intensity_mean[i, j]),
                            _fmt(summ.susceptibility[i, j]), ClassLabel(summ.classes[i, j]).name])


def _read_summary_csv(path):
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"unit", "period", "intensity_plugin", "intensity_mean", "susceptibility", "class"}
        if not need.issubset(reader.fieldnames or ()):
            raise DatasetError(f"{path}: not a summary.csv (columns {reader.fieldnames})")
        for row in reader:
            rows.append(row)
    if not rows:
        raise DatasetError(f"{path}: empty summary")
    return rows


shared_input_options = [
    click.option("--units", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--edges", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--covariates", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--counts", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--overlaps", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--slices", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--sd-convention", type=click.Choice(["sample", "population"]), default=None),
]

model_options = [
    click.option("--model", type=click.Choice(["mod1", "mod2", "mod3", "mod4", "mod5"]), default=None),
    click.option("--fixed-prior-sd", type=float, default=None),
    click.option("--pc-sd-rate", type=float, default=None),
    click.option("--pc-cor-u", type=float, default=None),
    click.option("--pc-cor-alpha", type=float, default=None),
    click.option("--fix-ar-coef", type=float, default=None),
    click.option("--allow-isolated", is_flag=True, default=None),
    click.option("--grid-k", type=int, default=None),
    click.option("--grid-h", type=float, default=None),
    click.option("--intensity-estimator", type=click.Choice(["mean", "plugin"]), default=None),
]


def _add_options(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


def _build_spec(cfg, model, fixed_prior_sd, pc_sd_rate, pc_cor_u, pc_cor_alpha,
                fix_ar_coef, allow_isolated):
    return ModelSpec(
        family=_merge(model, cfg, "model", "mod1"),
        fixed_prior_sd=_merge(fixed_prior_sd, cfg, "fixed_prior_sd", 1.0, float),
        pc_sd_rate=_merge(pc_sd_rate, cfg, "pc_sd_rate", math.log(2.0), float),
        pc_cor_u=_merge(pc_cor_u, cfg, "pc_cor_u", 0.5, float),
        pc_cor_alpha=_merge(pc_cor_alpha, cfg, "pc_cor_alpha", 0.5, float),
        fix_ar_coef=_merge(fix_ar_coef, cfg, "fix_ar_coef", None,
                           lambda s: None if s in ("", "none") else float(s)),
        allow_isolated=bool(_merge(allow_isolated, cfg, "allow_isolated", False, bool)),
    )


@click.group()
def main():
    """Spatio-temporal LGCP count models over slope-unit graphs."""


@main.command("fit")
@_add_options(shared_input_options)
@_add_options(model_options)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
def cmd_fit(units, edges, covariates, counts, overlaps, slices, sd_convention,
            model, fixed_prior_sd, pc_sd_rate, pc_cor_u, pc_cor_alpha, fix_ar_coef,
            allow_isolated, grid_k, grid_h, intensity_estimator, out, seed, jobs, config_path):
    """Fit one family on the full panel and write posterior products."""
    try:
        cfg = _read_config_file(config_path) if config_path else {}
        units = _merge(units, cfg, "units", None)
        edges = _merge(edges, cfg, "edges", None)
        covariates = _merge(covariates, cfg, "covariates", None)
        counts = _merge(counts, cfg, "counts", None)
        overlaps = _merge(overlaps, cfg, "overlaps", None)
        slices = _merge(slices, cfg, "slices", None)
        for name, path in (("units", units), ("edges", edges), ("covariates", covariates)):
            if path is None:
                raise DatasetError(f"missing required input --{name}")
            if not os.path.exists(path):
                raise DatasetError(f"{name} file not found: {path}")
        for name, path in (("counts", counts), ("overlaps", overlaps), ("slices", slices)):
            if path is not None and not os.path.exists(path):
                raise DatasetError(f"{name} file not found: {path}")
        sd_convention = _merge(sd_convention, cfg, "sd_convention", "sample")
        estimator = _merge(intensity_estimator, cfg, "intensity_estimator", "mean")
        seed = _merge(seed, cfg, "seed", 0, int)
        jobs = _merge(jobs, cfg, "jobs", os.cpu_count() or 1, int)
        spec = _build_spec(cfg, model, fixed_prior_sd, pc_sd_rate, pc_cor_u,
                           pc_cor_alpha, fix_ar_coef, allow_isolated)
        grid = GridConfig(k=_merge(grid_k, cfg, "grid_k", 3, int),
                          h_factor=_merge(grid_h, cfg, "grid_h", 0.75, float))
        data = _load_panel(units, edges, covariates, counts, overlaps, slices, sd_convention)
        layout = build_layout(spec, data)
    except _USER_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)

    try:
        hyper = explore_hyper(layout, spec, data, grid_config=grid)
        summ = posterior_summaries(layout, spec, hyper, data, intensity_estimator=estimator,
                                   jobs=jobs)
    except NumericError as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)

    os.makedirs(out, exist_ok=True)
    _write_summary_csv(os.path.join(out, "summary.csv"), data, summ)
    with open(os.path.join(out, "fixed_effects.csv"), "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "mean", "sd", "q2.5", "q97.5"])
        for name, (m, s, lo, hi) in summ.fixed_effects.items():
            w.writerow([name, _fmt(m), _fmt(s), _fmt(lo), _fmt(hi)])
    names = hyper_names(spec)
    with open(os.path.join(out, "hyper_posterior.csv"), "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, "log_posterior", "weight"])
        for gp in hyper.grid_points:
            w.writerow([*(_fmt(getattr(gp.theta, nm)) for nm in names),
                        _fmt(gp.log_posterior), _fmt(gp.weight)])
    settings = {"model": spec.family.value, "seed": seed, "sd_convention": sd_convention,
                "intensity_estimator": estimator, "grid_k": grid.k, "grid_h": grid.h_factor,
                "fixed_prior_sd": spec.fixed_prior_sd, "pc_sd_rate": spec.pc_sd_rate,
                "pc_cor_u": spec.pc_cor_u, "pc_cor_alpha": spec.pc_cor_alpha,
                "fix_ar_coef": spec.fix_ar_coef, "allow_isolated": spec.allow_isolated}
    _write_manifest(out, "fit", {"units": units, "edges": edges, "covariates": covariates,
                                 "counts": counts, "overlaps": overlaps, "slices": slices}, settings)
    click.echo(f"fit {spec.family.value}: {layout.total_dim} latent dims, "
               f"{len(hyper.grid_points)} grid points -> {out}")


@main.command("cv")
@_add_options(shared_input_options)
@_add_options(model_options)
@click.option("--scheme", type=click.Choice(["spatial", "temporal"]), required=True)
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--jobs", type=int, default=None, help="concurrent folds [default: cpu count]")
def cmd_cv(units, edges, covariates, counts, overlaps, slices, sd_convention,
           model, fixed_prior_sd, pc_sd_rate, pc_cor_u, pc_cor_alpha, fix_ar_coef,
           allow_isolated, grid_k, grid_h, intensity_estimator, scheme, k, out, seed, jobs):
    """Spatial k-fold or temporal leave-one-out cross-validation."""
    try:
        data = _load_panel(units, edges, covariates, counts, overlaps, slices,
                           sd_convention or "sample")
        spec = _build_spec({}, model, fixed_prior_sd, pc_sd_rate, pc_cor_u,
                           pc_cor_alpha, fix_ar_coef, allow_isolated)
        grid = GridConfig(k=grid_k if grid_k is not None else 3,
                          h_factor=grid_h if grid_h is not None else 0.75)
        estimator = intensity_estimator or "mean"
    except _USER_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    if jobs is None:
        jobs = os.cpu_count() or 1
    try:
        if scheme == "spatial":
            result = cv_spatial_kfold(data, spec, k=k, seed=seed, grid_config=grid,
                                      jobs=jobs, intensity_estimator=estimator)
        else:
            result = cv_temporal_loo(data, spec, grid_config=grid, jobs=jobs,
                                     intensity_estimator=estimator)
    except NumericError as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)

    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "metrics.csv"), "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "scheme", "fold", "auc", "coverage"])
        for fm in result.folds:
            w.writerow([spec.family.value, scheme, fm.fold,
                        _fmt(fm.auc) if np.isfinite(fm.auc) else "nan", _fmt(fm.coverage)])
    if scheme == "spatial":
        folds_dir = os.path.join(out, "folds")
        os.makedirs(folds_dir, exist_ok=True)
        for f in range(k):
            with open(os.path.join(folds_dir, f"fold_{f:02d}.csv"), "w", newline="\n",
                      encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["unit"])
                for i in np.flatnonzero(result.assignment == f):
                    w.writerow([data.graph.unit_ids[i]])
    labels = (data.counts.ravel() >= 1)
    scores = result.heldout.susceptibility.ravel()
    if labels.any() and not labels.all():
        points, auc = roc_auc(scores, labels)
        with open(os.path.join(out, "roc.csv"), "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["threshold", "fpr", "tpr"])
            for thr, fpr, tpr in points:
                w.writerow(["inf" if math.isinf(thr) else _fmt(thr), _fmt(fpr), _fmt(tpr)])
    else:
        auc = float("nan")
    _write_summary_csv(os.path.join(out, "heldout_summary.csv"), data, result.heldout)
    _write_manifest(out, "cv", {"units": units, "edges": edges, "covariates": covariates,
                                "counts": counts},
                    {"model": spec.family.value, "scheme": scheme, "k": k, "seed": seed,
                     "jobs": jobs, "pooled_auc": auc, "intensity_estimator": estimator})
    click.echo(f"cv {scheme} {spec.family.value}: mean fold AUC "
               f"{result.mean_auc():.4f}, pooled AUC {auc:.4f} -> {out}")


@main.command("simulate")
@click.option("--family", type=click.Choice(["mod1", "mod2", "mod3", "mod4", "mod5"]), default="mod1")
@click.option("--lattice", default="6x6", show_default=True, help="WxH unit lattice")
@click.option("--periods", type=int, default=3, show_default=True)
@click.option("--covariates", "n_covariates", type=int, default=2, show_default=True)
@click.option("--beta0", type=float, default=0.0, show_default=True)
@click.option("--beta", default=None, help="comma-separated covariate effects")
@click.option("--time-intercepts", default=None, help="comma-separated, centered before use")
@click.option("--tau-spatial", type=float, default=1.0, show_default=True)
@click.option("--tau-temporal", type=float, default=1.0, show_default=True)
@click.option("--tau-innovation", type=float, default=1.0, show_default=True)
@click.option("--ar-coef", type=float, default=0.5, show_default=True)
@click.option("--unit-area", type=float, default=1.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def cmd_simulate(family, lattice, periods, n_covariates, beta0, beta, time_intercepts,
                 tau_spatial, tau_temporal, tau_innovation, ar_coef, unit_area, seed, out):
    """Simulate a synthetic dataset and write loader-compatible CSVs."""
    try:
        w, h = (int(v) for v in lattice.lower().split("x"))
        cfg = SimConfig(
            family=family, n_periods=periods, n_covariates=n_covariates, beta0=beta0,
            beta=tuple(float(v) for v in beta.split(",")) if beta else None,
            time_intercepts=tuple(float(v) for v in time_intercepts.split(",")) if time_intercepts else None,
            tau_spatial=tau_spatial, tau_temporal=tau_temporal, tau_innovation=tau_innovation,
            ar_coef=ar_coef, width=w, height=h, unit_area=unit_area, seed=seed)
        data, truth = sample_dataset(cfg)
    except _USER_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    write_dataset_csvs(out, data, truth)
    _write_manifest(out, "simulate", {},
                    {"family": cfg.family.value, "lattice": lattice, "periods": periods,
                     "covariates": n_covariates, "seed": seed, "beta0": beta0,
                     "tau_spatial": tau_spatial, "tau_temporal": tau_temporal,
                     "tau_innovation": tau_innovation, "ar_coef": ar_coef})
    click.echo(f"simulated {cfg.family.value}: {data.n_units} units x {periods} periods, "
               f"{int(data.counts.sum())} events -> {out}")


@main.command("classify")
@click.option("--summary", "summary_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--intensity-estimator", type=click.Choice(["mean", "plugin"]), default="mean",
              show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def cmd_classify(summary_path, intensity_estimator, out):
    """Re-derive the four-class labels from a fitted summary."""
    from .validate import classify, susceptibility

    try:
        rows = _read_summary_csv(summary_path)
    except _USER_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    os.makedirs(out, exist_ok=True)
    col = "intensity_mean" if intensity_estimator == "mean" else "intensity_plugin"
    with open(os.path.join(out, "classes.csv"), "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["unit", "period", "intensity", "susceptibility", "class"])
        for row in rows:
            lam = float(row[col])
            w.writerow([row["unit"], row["period"], _fmt(lam), _fmt(susceptibility(lam)),
                        classify(lam).name])
    click.echo(f"classified {len(rows)} cells -> {out}")


@main.command("report")
@click.option("--summary", "summary_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--units", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--baseline", type=click.Path(exists=True, dir_okay=False), default=None,
              help="baseline summary.csv for intensity/susceptibility ratio maps")
@click.option("--table3/--no-table3", default=True, show_default=True)
@click.option("--centroids", type=click.Path(exists=True, dir_okay=False), default=None,
              help="id,x,y CSV enabling the SVG class map")
@click.option("--out", type=click.Path(file_okay=False), required=True)
def cmd_report(summary_path, units, baseline, table3, centroids, out):
    """Class-share tables, ratio maps and an optional SVG shading."""
    try:
        rows = _read_summary_csv(summary_path)
        areas = {}
        if units:
            with open(units, newline="", encoding="utf-8") as fh:
                for row in csv.DictReader(fh):
                    areas[row["id"]] = float(row["area_m2"])
    except _USER_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    os.makedirs(out, exist_ok=True)

    if table3:
        periods = sorted({r["period"] for r in rows})
        with open(os.path.join(out, "table3.csv"), "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["period", "class", "su_count", "su_pct", "area_km2", "area_pct"])
            for per in periods:
                sel = [r for r in rows if r["period"] == per]
                total_area = sum(areas.get(r["unit"], 0.0) for r in sel)
                for label in ClassLabel:
                    inc = [r for r in sel if r["class"] == label.name]
                    a = sum(areas.get(r["unit"], 0.0) for r in inc)
                    w.writerow([per, label.name, len(inc), _fmt(100.0 * len(inc) / len(sel)),
                                _fmt(a / 1e6), _fmt(100.0 * a / total_area if total_area else 0.0)])

    if baseline:
        base_rows = {(r["unit"], r["period"]): r for r in _read_summary_csv(baseline)}
        with open(os.path.join(out, "ratios.csv"), "w", newline="\n", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["unit", "period", "ir", "sr"])
            for r in rows:
                b = base_rows.get((r["unit"], r["period"]))
                if b is None:
                    raise click.ClickException(f"baseline lacks cell {(r['unit'], r['period'])}")
                ai, bi = float(r["intensity_mean"]), float(b["intensity_mean"])
                asu, bsu = float(r["susceptibility"]), float(b["susceptibility"])
                ir = 1.0 if ai == bi == 0.0 else ai / bi
                sr = 1.0 if asu == bsu == 0.0 else asu / bsu
                w.writerow([r["unit"], r["period"], _fmt(ir), _fmt(sr)])

    if centroids:
        _write_svg(out, rows, centroids)
    click.echo(f"report -> {out}")


_CLASS_COLORS = {"CLEARLY_STABLE": "#2166ac", "UNCERTAIN_1": "#fddbc7",
                 "UNCERTAIN_2": "#ef8a62", "CLEARLY_UNSTABLE": "#b2182b"}


def _write_svg(out, rows, centroids_path):
    pts = {}
    with open(centroids_path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            pts[row["id"]] = (float(row["x"]), float(row["y"]))
    periods = sorted({r["period"] for r in rows})
    xs = [p[0] for p in pts.values()]
    ys = [p[1] for p in pts.values()]
    if not xs:
        return
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    span = max(x1 - x0, y1 - y0) or 1.0
    size = 480.0
    for per in periods:
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}">']
        for r in rows:
            if r["period"] != per or r["unit"] not in pts:
                continue
            x, y = pts[r["unit"]]
            cx = 20 + (x - x0) / span * (size - 40)
            cy = size - (20 + (y - y0) / span * (size - 40))
            color = _CLASS_COLORS.get(r["class"], "#999999")
            parts.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="5" fill="{color}"/>')
        parts.append("</svg>")
        with open(os.path.join(out, f"map_{per}.svg"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(parts) + "\n")


@main.command("oracle")
@_add_options(shared_input_options)
@click.option("--model", type=click.Choice(["mod1", "mod2", "mod3", "mod4", "mod5"]), default="mod1")
@click.option("--n-iter", type=int, default=50000, show_default=True)
@click.option("--burn-in", type=int, default=10000, show_default=True)
@click.option("--thin", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dump-samples", "dump", is_flag=True, default=False)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def cmd_oracle(units, edges, covariates, counts, overlaps, slices, sd_convention,
               model, n_iter, burn_in, thin, seed, dump, out):
    """Compare the Laplace posterior with a Metropolis-within-Gibbs chain."""
    try:
        data = _load_panel(units, edges, covariates, counts, overlaps, slices,
                           sd_convention or "sample")
        spec = ModelSpec(family=model)
        layout = build_layout(spec, data)
        ccfg = ChainConfig(n_iter=n_iter, burn_in=burn_in, thin=thin, seed=seed)
    except _USER_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    try:
        hyper = explore_hyper(layout, spec, data)
        summ = posterior_summaries(layout, spec, hyper, data)
        chain = run_chain(layout, spec, data, ccfg)
    except NumericError as exc:
        click.echo(f"numeric failure: {exc}", err=True)
        sys.exit(EXIT_NUMERIC)
    os.makedirs(out, exist_ok=True)
    fe_names = ["beta0"] + [f"beta[{k}]" for k in range(layout.n_covariates)]
    disp = ["beta0"] + list(data.covariate_names)
    with open(os.path.join(out, "comparison.csv"), "w", newline="\n", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "laplace_mean", "laplace_sd", "mcmc_mean", "mcmc_sd", "mcmc_ess"])
        for col, name in zip(fe_names, disp):
            lm, ls, _, _ = summ.fixed_effects[name]
            w.writerow([name, _fmt(lm), _fmt(ls), _fmt(chain.mean(col)),
                        _fmt(chain.sd(col)), _fmt(chain.ess(col))])
    if dump:
        dump_samples(os.path.join(out, "samples.csv"), chain)
    _write_manifest(out, "oracle", {"units": units, "edges": edges, "covariates": covariates,
                                    "counts": counts},
                    {"model": model, "n_iter": n_iter, "burn_in": burn_in,
                     "thin": thin, "seed": seed})
    click.echo(f"oracle comparison -> {out}")


if __name__ == "__main__":
    main()
