"""End-to-end runs behind the command line: bound, sweep, validate."""
import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from scipy.stats import binomtest
from threadpoolctl import threadpool_limits

from .bound import CSV_COLUMNS, DispersionEstimate, assemble_report, dispersion
from .config import RunConfig, parse_config
from .exceptions import (
    ConditioningError,
    ConfigError,
    InterpBoundError,
    InvariantFailure,
    QuadratureError,
)
from .interpolation import interpolate
from .laplace import (
    QuadratureGrid,
    ColdPosteriorSpec,
    fit_remainder_rate,
    gamma_schedule,
    kl_exact_gaussian,
    kl_quadrature,
    laplace_neg_log_Z,
    laplace_terms,
    log_Z_exact_gaussian,
    log_Z_quadrature,
    posterior_gaussian,
    prior_gaussian,
    zeta_n_exact_gaussian,
    zeta_n_quadrature,
)
from .models import Dataset, LinearGaussianTeacher, ModelSpec, generate_dataset, true_risk
from .plotting import emit_plot
from .regularizers import Regularizer
from .seeding import seed_sequence

VALIDATION_COLUMNS = ("quantity", "tau", "gamma", "exact", "approx", "abs_error")
SWEEP_COLUMNS = (
    ("grid_index", "value", "replicate", "seed", "status")
    + CSV_COLUMNS
    + ("R_star", "P_source", "test_error", "test_error_stderr", "bound_holds", "error")
)
SUMMARY_COLUMNS = (
    "grid_index", "value", "d", "n", "rows", "ok", "failed", "holds",
    "holds_freq", "wilson_low", "wilson_high", "violation_freq",
    "mean_test_error", "se_test_error", "mean_pac_rhs", "mean_iic", "mean_R_star", "P",
)
CONFIDENCE = 0.95

# Key prefixes for counter-based seeds under the root seed.
_KEY_ROW, _KEY_DISPERSION = 1, 2
_KEY_DATA, _KEY_SOLVER, _KEY_RISK = 0, 1, 2


def row_seeds(cfg, grid_index=0, replicate=0):
    """``(data, solver, risk)`` seed sequences for one (grid point, replicate).

    A single bound run uses grid point 0, replicate 0, so a one-point sweep
    reproduces it exactly.
    """
    row = seed_sequence(cfg.data.seed, _KEY_ROW, grid_index, replicate)
    solver = seed_sequence(cfg.solver.seed, _KEY_ROW, grid_index, replicate, _KEY_SOLVER)
    return seed_sequence(row, _KEY_DATA), solver, seed_sequence(row, _KEY_RISK)


def dispersion_seed(cfg, grid_index=0):
    return seed_sequence(cfg.data.seed, _KEY_DISPERSION, grid_index)


# ---------------------------------------------------------------- builders

def build_distribution(cfg):
    d = cfg.data
    if d.inputs is not None or d.csv is not None:
        return None
    return LinearGaussianTeacher(
        input_dim=d.input_dim, output_dim=d.m, noise=d.noise,
        teacher_seed=d.teacher_seed, signal=d.signal, cov_decay=d.cov_decay,
    )


def load_fixed_dataset(cfg, base_dir="."):
    """The inline or CSV dataset of a config, or ``None`` for generated data."""
    d = cfg.data
    if d.inputs is not None:
        X, Y = np.asarray(d.inputs, dtype=float), np.asarray(d.outputs, dtype=float)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ConfigError("fields 'data.inputs'/'data.outputs' must be row lists of equal length")
        return Dataset(X, Y, descriptor={"kind": "inline", "n": X.shape[0]})
    if d.csv is not None:
        path = d.csv if os.path.isabs(d.csv) else os.path.join(base_dir, d.csv)
        try:
            return Dataset.from_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"field 'data.csv': {exc}") from exc
    return None


def _mlp_width_for(d, p, m, bias):
    per = p + m + (1 if bias else 0)
    return max(1, (d - (m if bias else 0)) // per)


def build_model(cfg, input_dim, output_dim, d=None):
    """Model for the config, optionally resized to ``d`` parameters."""
    mc = cfg.model
    kw = dict(input_dim=input_dim, output_dim=output_dim, bias=mc.bias, seed=mc.seed)
    try:
        if d is None:
            return ModelSpec(mc.family, n_features=mc.n_features, width=mc.width, **kw)
        if mc.family == "mlp-tanh":
            return ModelSpec(mc.family, width=_mlp_width_for(d, input_dim, output_dim, mc.bias), **kw)
        if d % output_dim:
            raise ConfigError(f"sweep value d={d} is not a multiple of m={output_dim}")
        per = d // output_dim
        if mc.family == "linear-features":
            return ModelSpec(mc.family, n_features=per, **kw)
        return ModelSpec(mc.family, width=per, **kw)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"section 'model': {exc}") from exc


def build_regularizer(cfg, dim):
    rc = cfg.regularizer
    try:
        if rc.family == "smooth-power":
            return Regularizer.smooth_power(dim, exponent=rc.exponent, scale=rc.scale, ridge=rc.ridge)
        anchor = None if isinstance(rc.anchor, str) else np.asarray(rc.anchor, dtype=float)
        weight = None
        if isinstance(rc.weight, dict):
            if "diag" in rc.weight:
                weight = np.asarray(rc.weight["diag"], dtype=float)
            else:
                weight = float(rc.weight["scale"]) * np.eye(dim)
        return Regularizer.quadratic(dim, anchor=anchor, weight=weight)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"section 'regularizer': {exc}") from exc


def _solver_kwargs(cfg, seed):
    s = cfg.solver
    if s.method == "closed-form":
        return {"method": "closed-form"}
    return {
        "method": s.method, "tol": s.tol, "tol_R": s.tol_R,
        "max_iters": s.max_iters, "seed": seed, "init_scale": s.init_scale,
    }


def _interpolate(model, dataset, reg, cfg, seed):
    kw = _solver_kwargs(cfg, seed)
    method = kw.pop("method")
    if method == "auto" and not (model.is_linear and reg.family == "quadratic"):
        method = "two-phase"
    elif method == "auto":
        method, kw = "closed-form", {}
    return interpolate(model, dataset, reg, method=method, **kw)


def _posterior_test_error(model, dataset, reg, distribution, terms):
    """``2 E_rho L`` under the Laplace-Gaussian posterior at ``gamma = tau**2``."""
    if not (distribution is not None and distribution.supports_closed_form(model)
            and reg.family == "quadratic"):
        raise ConfigError("field 'bound.posterior_average' needs linear-features, quadratic R and generated data")
    spec = ColdPosteriorSpec(model, dataset, reg, terms.tau**2, terms.tau)
    mu, cov = posterior_gaussian(spec)
    w, c, const = distribution.risk_quadratic(model)
    return 2.0 * float(np.sum(w * ((mu - c) ** 2 + np.diag(cov))) + const)


# ---------------------------------------------------------------- writers

def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(columns)
    for row in rows:
        values = [row.get(c) for c in columns] if isinstance(row, dict) else row
        w.writerow([_fmt(v) for v in values])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_json_safe(obj), indent=2, allow_nan=False) + "\n")


def _formats(cfg, fmt):
    if fmt is None:
        return set(cfg.output.formats)
    return {"csv", "json"} if fmt == "both" else {fmt}


def _out_dir(cfg, out_dir):
    path = out_dir or cfg.output.directory
    os.makedirs(path, exist_ok=True)
    return path


def apply_overrides(cfg, seed=None):
    """Copy of ``cfg`` with the root seed replaced."""
    if seed is None:
        return cfg
    data = cfg.to_dict()
    data["data"]["seed"] = int(seed)
    data["solver"]["seed"] = int(seed)
    return parse_config(data)


# ---------------------------------------------------------------- bound

def run_bound(cfg, out_dir=None, fmt=None, base_dir="."):
    """Single bound evaluation; returns ``(terms, record)``."""
    distribution = build_distribution(cfg)
    data_seed, solver_seed, risk_seed = row_seeds(cfg)
    dataset = load_fixed_dataset(cfg, base_dir)
    if dataset is None:
        dataset = generate_dataset(distribution, cfg.data.n, data_seed)
    model = build_model(cfg, dataset.X.shape[1], dataset.m)
    reg = build_regularizer(cfg, model.param_dim)
    result = _interpolate(model, dataset, reg, cfg, solver_seed)
    b = cfg.bound
    terms = assemble_report(
        model, dataset, reg, result, distribution,
        delta=b.delta, T=b.T, seed=dispersion_seed(cfg),
        include_P=b.include_P, P_method=b.P_method,
    )
    record = terms.to_json_dict()
    if distribution is not None:
        L, se = true_risk(model, result.theta_star, distribution, n_mc=b.n_mc, seed=risk_seed)
        record.update(test_error=2.0 * L, test_error_stderr=2.0 * se,
                      bound_holds=bool(2.0 * L <= terms.pac_rhs))
        if b.posterior_average:
            record["test_error_posterior"] = _posterior_test_error(model, dataset, reg, distribution, terms)
    record.update(
        model_family=model.family if isinstance(model, ModelSpec) else "custom",
        regularizer_family=reg.family,
        solver_method=result.method,
        residual_norm=result.residual_norm,
        stationarity=result.stationarity,
    )
    if out_dir is not False:
        path = _out_dir(cfg, out_dir)
        formats = _formats(cfg, fmt)
        if "csv" in formats:
            write_csv(os.path.join(path, "bound.csv"), CSV_COLUMNS, [terms.csv_row()])
        if "json" in formats:
            write_json(os.path.join(path, "bound.json"), record)
            write_json(os.path.join(path, "diagnostics.json"),
                       {"config": cfg.to_dict(), "dataset": dataset.descriptor,
                        "diagnostics": terms.diagnostics})
    return terms, record


# ---------------------------------------------------------------- sweep

def _grid_problem(cfg, value):
    """``(model, n)`` for one sweep grid value."""
    dc = cfg.data
    if cfg.sweep.variable == "d":
        return build_model(cfg, dc.input_dim, dc.m, d=int(value)), dc.n
    return build_model(cfg, dc.input_dim, dc.m), int(value)


def _sweep_row(task):
    cfg_dict, gi, value, r, P_est = task
    cfg = parse_config(cfg_dict)
    data_seed, solver_seed, risk_seed = row_seeds(cfg, gi, r)
    row = {"grid_index": gi, "value": value, "replicate": r,
           "seed": int(data_seed.generate_state(1, dtype=np.uint64)[0])}
    with threadpool_limits(limits=1):
        try:
            distribution = build_distribution(cfg)
            model, n = _grid_problem(cfg, value)
            reg = build_regularizer(cfg, model.param_dim)
            dataset = generate_dataset(distribution, n, data_seed)
            result = _interpolate(model, dataset, reg, cfg, solver_seed)
            b = cfg.bound
            terms = assemble_report(model, dataset, reg, result, distribution, delta=b.delta,
                                    include_P=b.include_P, dispersion_estimate=P_est)
            L, se = true_risk(model, result.theta_star, distribution, n_mc=b.n_mc, seed=risk_seed)
        except (InterpBoundError, np.linalg.LinAlgError, FloatingPointError) as exc:
            row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
            return row
    row.update({c: getattr(terms, c) for c in CSV_COLUMNS})
    row.update(status="ok", R_star=terms.R_star, P_source=terms.P_source,
               test_error=2.0 * L, test_error_stderr=2.0 * se,
               bound_holds=bool(2.0 * L <= terms.pac_rhs), error="")
    return row


def wilson_interval(k, n, confidence=CONFIDENCE):
    if n == 0:
        return float("nan"), float("nan")
    ci = binomtest(k, n).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


def _summarize(rows, gi, value, model, n, P):
    ok = [r for r in rows if r["status"] == "ok"]
    holds = sum(r["bound_holds"] for r in ok)
    lo, hi = wilson_interval(holds, len(ok))
    te = np.array([r["test_error"] for r in ok])
    mean = lambda key: float(np.mean([r[key] for r in ok])) if ok else float("nan")  # noqa: E731
    return {
        "grid_index": gi, "value": value, "d": model.param_dim, "n": n,
        "rows": len(rows), "ok": len(ok), "failed": len(rows) - len(ok), "holds": holds,
        "holds_freq": holds / len(ok) if ok else float("nan"),
        "wilson_low": lo, "wilson_high": hi,
        "violation_freq": 1.0 - holds / len(ok) if ok else float("nan"),
        "mean_test_error": float(te.mean()) if ok else float("nan"),
        "se_test_error": float(te.std(ddof=1) / math.sqrt(len(te))) if len(te) > 1 else 0.0,
        "mean_pac_rhs": mean("pac_rhs"), "mean_iic": mean("iic"),
        "mean_R_star": mean("R_star"), "P": P,
    }


def run_sweep(cfg, out_dir=None, fmt=None, workers=None, base_dir="."):
    """Grid x replicate sweep; returns ``(rows, summary, overall)``."""
    if cfg.data.inputs is not None or cfg.data.csv is not None:
        raise ConfigError("sweeps need generated data; remove 'data.inputs'/'data.csv'")
    values = list(cfg.sweep.values) or [cfg.data.n if cfg.sweep.variable == "n" else None]
    distribution = build_distribution(cfg)
    problems, estimates = [], []
    for gi, value in enumerate(values):
        if value is None:
            model, n = build_model(cfg, cfg.data.input_dim, cfg.data.m), cfg.data.n
            values[gi] = model.param_dim
        else:
            model, n = _grid_problem(cfg, value)
        if model.param_dim <= cfg.data.m * n:
            raise ConfigError(
                f"sweep value {values[gi]} is not overparameterized: d={model.param_dim}, m*n={cfg.data.m * n}"
            )
        reg = build_regularizer(cfg, model.param_dim)
        with threadpool_limits(limits=1):
            est = dispersion(model, reg, distribution, n, T=cfg.bound.T,
                             seed=dispersion_seed(cfg, gi),
                             method=cfg.bound.P_method)
        problems.append((model, n))
        estimates.append(DispersionEstimate(*est))
    cfg_dict = cfg.to_dict()
    tasks = [(cfg_dict, gi, value, r, estimates[gi])
             for gi, value in enumerate(values) for r in range(cfg.sweep.replicates)]
    workers = workers or cfg.sweep.workers
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        rows = [_sweep_row(t) for t in tasks]

    summary = [
        _summarize([r for r in rows if r["grid_index"] == gi], gi, value, *problems[gi], estimates[gi].P)
        for gi, value in enumerate(values)
    ]
    ok = [r for r in rows if r["status"] == "ok"]
    k = sum(r["bound_holds"] for r in ok)
    lo, hi = wilson_interval(k, len(ok))
    overall = {"rows": len(rows), "ok": len(ok), "holds": k,
               "holds_freq": k / len(ok) if ok else float("nan"),
               "wilson_low": lo, "wilson_high": hi, "confidence": CONFIDENCE,
               "delta": cfg.bound.delta}

    if out_dir is not False:
        path = _out_dir(cfg, out_dir)
        formats = _formats(cfg, fmt)
        if "csv" in formats:
            write_csv(os.path.join(path, "sweep.csv"), SWEEP_COLUMNS, rows)
            write_csv(os.path.join(path, "sweep_summary.csv"), SUMMARY_COLUMNS, summary)
        if "json" in formats:
            write_json(os.path.join(path, "sweep.json"),
                       {"config": cfg_dict, "overall": overall, "summary": summary})
        if cfg.output.plots:
            _sweep_plots(path, cfg, summary)
    return rows, summary, overall


def _sweep_plots(path, cfg, summary):
    good = [s for s in summary if s["ok"] > 0]
    if not good:
        return
    x = [s["value"] for s in good]
    xlabel = "parameter count d" if cfg.sweep.variable == "d" else "sample size n"
    emit_plot([{"label": "2 L(theta*)", "x": x, "y": [s["mean_test_error"] for s in good],
                "yerr": [s["se_test_error"] for s in good]}],
              xlabel, "test error", os.path.join(path, "test_error.svg"))
    emit_plot([{"label": "bound", "x": x, "y": [s["mean_pac_rhs"] for s in good]},
               {"label": "2 L(theta*)", "x": x, "y": [s["mean_test_error"] for s in good]}],
              xlabel, "value", os.path.join(path, "pac_rhs.svg"))
    emit_plot([{"label": "IIC", "x": x, "y": [s["mean_iic"] for s in good]}],
              xlabel, "IIC", os.path.join(path, "iic.svg"))
    emit_plot([{"label": "violation frequency", "x": x, "y": [s["violation_freq"] for s in good]}],
              xlabel, "frequency", os.path.join(path, "violation.svg"),
              hlines={"delta": cfg.bound.delta})


# ---------------------------------------------------------------- validate

def _grids(spec, vc):
    post = QuadratureGrid.gaussian(*posterior_gaussian(spec), half_width=vc.half_width, nodes=vc.nodes)
    prior = QuadratureGrid.gaussian(*prior_gaussian(spec.reg, spec.tau), half_width=vc.half_width,
                                    nodes=vc.nodes)
    return post, prior


def _row(quantity, tau, gamma, exact, approx):
    return {"quantity": quantity, "tau": tau, "gamma": gamma, "exact": exact,
            "approx": approx, "abs_error": abs(exact - approx)}


def run_validate(cfg, out_dir=None, fmt=None, base_dir="."):
    """Laplace-asymptotics checks on a d <= 3 problem.

    Returns ``(rows, rates, checks, passed)`` and raises
    :class:`InvariantFailure` after writing outputs when a gated check fails.
    """
    vc = cfg.validate
    distribution = build_distribution(cfg)
    dataset = load_fixed_dataset(cfg, base_dir)
    data_seed, solver_seed, _ = row_seeds(cfg)
    if dataset is None:
        dataset = generate_dataset(distribution, cfg.data.n, data_seed)
    model = build_model(cfg, dataset.X.shape[1], dataset.m)
    if model.param_dim > 3:
        raise ConfigError(f"validate needs d <= 3 for tensor quadrature, got d={model.param_dim}")
    reg = build_regularizer(cfg, model.param_dim)
    result = _interpolate(model, dataset, reg, cfg, solver_seed)
    dR, S, K, mn = laplace_terms(model, dataset, reg, result)
    lq = model.is_linear and reg.family == "quadratic"
    has_zeta = distribution is not None and distribution.supports_closed_form(model)

    rows, checks = [], []

    def check(name, tau, gamma, value, limit, passed, gated=True):
        checks.append({"check": name, "tau": tau, "gamma": gamma, "value": value,
                       "limit": limit, "passed": bool(passed), "gated": gated})

    def kl_checks(spec, grids):
        tau, gamma = spec.tau, spec.gamma
        try:
            est = kl_quadrature(spec, *grids, tol=math.inf)
        except QuadratureError as exc:
            check("kl_quadrature", tau, gamma, float("nan"), 0.0, False)
            checks[-1]["note"] = str(exc)
            return None
        scale = max(1.0, abs(est.log_Z))
        rows.append(_row("kl", tau, gamma, -est.log_Z, est.kl))
        check("kl_nonnegative", tau, gamma, est.kl, -1e-9 * scale, est.kl >= -1e-9 * scale)
        check("kl_le_neg_log_Z", tau, gamma, est.kl + est.log_Z, 1e-9 * scale,
              est.kl <= -est.log_Z + 1e-9 * scale)
        check("kl_identity", tau, gamma, est.identity_error, 1e-6 * scale,
              est.identity_error <= 1e-6 * scale)
        if lq:
            rows.append(_row("kl_exact", tau, gamma, kl_exact_gaussian(model, dataset, reg, gamma, tau), est.kl))
        return est

    other = "coarea" if vc.laplace_constant == "pi" else "pi"
    for tau in vc.taus:
        gamma = gamma_schedule(tau, vc.gamma_coeff, vc.gamma_power)
        spec = ColdPosteriorSpec(model, dataset, reg, gamma, tau)
        grids = _grids(spec, vc)
        try:
            quad = log_Z_quadrature(spec, *grids)
        except QuadratureError as exc:
            check("log_Z_quadrature", tau, gamma, float("nan"), 0.0, False)
            checks[-1]["note"] = str(exc)
            continue
        if lq:
            exact = log_Z_exact_gaussian(model, dataset, reg, gamma, tau)
            rows.append(_row("neg_log_Z", tau, gamma, -exact, -quad.value))
            tol = 1e-8 * max(1.0, abs(exact))
            check("quadrature_vs_exact", tau, gamma, abs(exact - quad.value), tol,
                  abs(exact - quad.value) <= tol)
            target = -log_Z_exact_gaussian(model, dataset, reg, gamma, tau, normalize_likelihood=True)
        else:
            target = -(quad.value - 0.5 * mn * math.log(math.pi * gamma))
        for const in (vc.laplace_constant, other):
            rows.append(_row(f"laplace_{const}", tau, gamma, target,
                             laplace_neg_log_Z(dR, S, K, mn, tau, constant=const)))
        kl_checks(spec, grids)
        if has_zeta:
            try:
                z = zeta_n_quadrature(model, dataset, reg, tau, distribution)
            except (QuadratureError, ConditioningError) as exc:
                check("zeta_n_quadrature", tau, gamma, float("nan"), 0.0, False)
                checks[-1]["note"] = str(exc)
            else:
                rows.append(_row("zeta_n", tau, gamma, z.value, z.leading))
                if lq:
                    rows.append(_row("zeta_n_exact", tau, gamma,
                                     zeta_n_exact_gaussian(model, dataset, reg, tau, distribution), z.value))

    gaps = []
    for gamma in vc.kl_gammas:
        spec = ColdPosteriorSpec(model, dataset, reg, gamma, vc.kl_tau)
        est = kl_checks(spec, _grids(spec, vc))
        if est is not None:
            gaps.append(est.gap)
    if len(gaps) > 1:
        order = np.argsort(vc.kl_gammas)[::-1]
        seq = np.asarray(gaps)[order]
        check("gap_decreasing_in_gamma", vc.kl_tau, float("nan"),
              float(np.max(np.diff(seq))) if seq.size > 1 else 0.0, 0.0,
              bool(np.all(np.diff(seq) <= 0)), gated=False)

    rates = []
    for quantity, gated in ((f"laplace_{vc.laplace_constant}", True), (f"laplace_{other}", False),
                            ("zeta_n", True)):
        pts = [(r["tau"], r["abs_error"]) for r in rows if r["quantity"] == quantity]
        if not pts:
            continue
        entry = {"quantity": quantity, "slope": float("nan"), "intercept": float("nan"),
                 "r_squared": float("nan"), "slope_threshold": vc.slope_threshold,
                 "r2_threshold": vc.r2_threshold, "gated": gated, "passed": False}
        try:
            fit = fit_remainder_rate(pts)
            entry.update(slope=fit.slope, intercept=fit.intercept, r_squared=fit.r_squared,
                         passed=bool(fit.slope >= vc.slope_threshold and fit.r_squared >= vc.r2_threshold))
        except ValueError as exc:
            entry["note"] = str(exc)
        rates.append(entry)

    passed = all(c["passed"] for c in checks if c["gated"]) and all(r["passed"] for r in rates if r["gated"])

    if out_dir is not False:
        path = _out_dir(cfg, out_dir)
        formats = _formats(cfg, fmt)
        check_cols = ("check", "tau", "gamma", "value", "limit", "passed", "gated", "note")
        rate_cols = ("quantity", "slope", "intercept", "r_squared", "slope_threshold",
                     "r2_threshold", "gated", "passed", "note")
        if "csv" in formats:
            write_csv(os.path.join(path, "validation.csv"), VALIDATION_COLUMNS, rows)
            write_csv(os.path.join(path, "validation_rates.csv"), rate_cols, rates)
            write_csv(os.path.join(path, "validation_checks.csv"), check_cols, checks)
        if "json" in formats:
            write_json(os.path.join(path, "validation.json"), {
                "terms": {"delta_R": dR, "S": S, "K": K, "mn": mn},
                "passed": passed, "rates": rates, "checks": checks, "rows": rows,
            })
        if cfg.output.plots:
            series = []
            for r in rates:
                pts = [(x["tau"], x["abs_error"]) for x in rows if x["quantity"] == r["quantity"]]
                pts = [p for p in pts if p[1] > 0]
                if pts:
                    series.append({"label": r["quantity"], "x": [p[0] for p in pts], "y": [p[1] for p in pts]})
            if series:
                emit_plot(series, "tau", "|exact - approx|", os.path.join(path, "remainder.svg"),
                          logx=True, logy=True)
    if not passed:
        failed = [c["check"] for c in checks if c["gated"] and not c["passed"]]
        failed += [f"rate:{r['quantity']}" for r in rates if r["gated"] and not r["passed"]]
        slopes = "; ".join(f"{r['quantity']} slope={r['slope']:.4f} r2={r['r_squared']:.4f}" for r in rates)
        raise InvariantFailure("validation failed: " + ", ".join(sorted(set(failed))) + f" ({slopes})")
    return rows, rates, checks, passed


__all__ = [
    "RunConfig", "build_distribution", "build_model", "build_regularizer", "load_fixed_dataset",
    "run_bound", "run_sweep", "run_validate", "wilson_interval", "write_csv", "write_json",
]
