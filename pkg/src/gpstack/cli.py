"""Command-line pipeline: simulate | fit-stack | predict | outcome | waic | variogram.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. All randomness is derived from a single seed through named
substreams, so outputs are byte-identical across runs and thread counts.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import io
from .covariance import InstantPoint, ProcessParams, SpaceTimePoint
from .errors import (
    ConfigError,
    ConvergenceError,
    DataError,
    FactorizationError,
    FitError,
    GpStackError,
    InvalidGeometryError,
    PredictionError,
    RegressionError,
)
from .evaluation import empirical_semivariogram, nugget_sill_estimate, waic
from .geometry import BoundingBox
from .loo import LooMatrix, loo_column
from .model import (
    BasisSpec,
    BlockOutcomeDataset,
    PointDataset,
    Priors,
    fit_candidate,
    fit_outcome_regression,
    log_pointwise_outcome_density,
    predict_blocks,
    predict_instants,
    sample_candidate,
)
from .simulation import SimConfig, simulate_block_design, simulate_exposure, simulate_outcome
from .stacking import candidate_grid, stacking_weights

log = logging.getLogger("gpstack")

# substream tags for seed derivation (never reuse across stages)
_STREAM_SIM = 1
_STREAM_FIT = 2
_STREAM_PREDICT = 3
_STREAM_OUTCOME = 4

# exact leave-one-out is the default up to this many observations
EXACT_LOO_MAX_N = 2000
# joint prediction chunk size for large instant target sets
PREDICT_CHUNK = 2000


def rng_for(seed: int, *key) -> np.random.Generator:
    """Deterministic substream: same (seed, key) always yields the same stream."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, key)]))


def auto_loo_method(n: int) -> str:
    """Exact closed form up to N=2000 observations, PSIS beyond."""
    return "exact" if n <= EXACT_LOO_MAX_N else "psis"


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration shared by the pipeline commands."""

    priors: dict
    grids: dict
    basis: BasisSpec
    draws: int
    mc_samples: int
    seed: int
    loo_method: str
    threads: int
    simulation: dict = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)


def _cfg_get(cfg: dict, path: str, default=None, required=False):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required:
                raise ConfigError(f"{path}: missing required field")
            return default
        node = node[part]
    return node


def _positive_list(cfg, path):
    values = _cfg_get(cfg, path, required=True)
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{path}: must be a nonempty list")
    for v in values:
        if not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"{path}: entries must be positive numbers, got {v!r}")
    return [float(v) for v in values]


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON ({err})") from None


def parse_run_config(cfg: dict, seed_override=None, threads_override=None) -> RunConfig:
    basis_kind = _cfg_get(cfg, "basis.kind", default="monthly")
    if basis_kind not in ("monthly", "fourier"):
        raise ConfigError(f"basis.kind: must be 'monthly' or 'fourier', got {basis_kind!r}")
    periods = _cfg_get(cfg, "basis.periods", default=[])
    if basis_kind == "fourier" and (not isinstance(periods, list) or not periods):
        raise ConfigError("basis.periods: fourier basis needs a nonempty period list")
    try:
        basis = BasisSpec(basis_kind, tuple(periods) if basis_kind == "fourier" else ())
    except ValueError as err:
        raise ConfigError(f"basis: {err}") from None

    grids = {}
    if _cfg_get(cfg, "grids") is not None:
        grids = {
            "phi_s": _positive_list(cfg, "grids.phi_s"),
            "nu": _positive_list(cfg, "grids.nu"),
            "phi_t": _positive_list(cfg, "grids.phi_t"),
            "delta2": _positive_list(cfg, "grids.delta2"),
        }

    draws = _cfg_get(cfg, "draws", default=1000)
    if not isinstance(draws, int) or draws < 100:
        raise ConfigError(f"draws: must be an integer >= 100, got {draws!r}")
    mc_samples = _cfg_get(cfg, "mc_samples", default=500)
    if not isinstance(mc_samples, int) or mc_samples < 1:
        raise ConfigError(f"mc_samples: must be a positive integer, got {mc_samples!r}")
    seed = seed_override if seed_override is not None else _cfg_get(cfg, "seed", default=0)
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"seed: must be a nonnegative integer, got {seed!r}")
    loo_method = _cfg_get(cfg, "loo_method", default="auto")
    if loo_method not in ("auto", "exact", "psis"):
        raise ConfigError(f"loo_method: must be auto|exact|psis, got {loo_method!r}")
    threads = threads_override if threads_override is not None \
        else _cfg_get(cfg, "threads", default=1)
    if not isinstance(threads, int) or threads < 1:
        raise ConfigError(f"threads: must be a positive integer, got {threads!r}")

    priors = _cfg_get(cfg, "priors", default={}) or {}
    for name, default in (("a_sigma", 2.0), ("b_sigma", 0.1), ("a_tau", 2.0),
                          ("b_tau", 0.1), ("gamma_scale", 1e3), ("beta_scale", 1e3)):
        value = priors.get(name, default)
        if not isinstance(value, (int, float)) or value <= 0:
            raise ConfigError(f"priors.{name}: must be a positive number, got {value!r}")
        priors[name] = float(value)

    return RunConfig(priors=priors, grids=grids, basis=basis, draws=draws,
                     mc_samples=mc_samples, seed=seed, loo_method=loo_method,
                     threads=threads,
                     simulation=_cfg_get(cfg, "simulation", default={}) or {},
                     outcome=_cfg_get(cfg, "outcome", default={}) or {})


def _priors_for(run: RunConfig, r: int, p: int) -> Priors:
    return Priors.default(
        r, p, gamma_scale=run.priors["gamma_scale"], beta_scale=run.priors["beta_scale"],
        a_sigma=run.priors["a_sigma"], b_sigma=run.priors["b_sigma"],
        a_tau=run.priors["a_tau"], b_tau=run.priors["b_tau"])


def parse_sim_config(section: dict, seed: int) -> SimConfig:
    def need(name, default, kind, positive=False):
        value = section.get(name, default)
        if not isinstance(value, kind) or (positive and value <= 0):
            raise ConfigError(f"simulation.{name}: invalid value {value!r}")
        return value

    box_vals = section.get("box", [0.0, 0.0, 1.0, 1.0])
    if not (isinstance(box_vals, list) and len(box_vals) == 4):
        raise ConfigError("simulation.box: expected [x0, y0, x1, y1]")
    quarters = section.get("quarters")
    kwargs = {}
    if quarters is not None:
        try:
            kwargs["quarters"] = tuple((int(c), (float(lo), float(hi)))
                                       for c, lo, hi in quarters)
        except (TypeError, ValueError):
            raise ConfigError("simulation.quarters: expected [[count, t_start, t_end], ...]") \
                from None
    try:
        return SimConfig(
            n_sites=need("n_sites", 100, int, positive=True),
            n_times=need("n_times", 360, int, positive=True),
            box=BoundingBox(box_vals[:2], box_vals[2:]),
            time_span=tuple(section.get("time_span", (0.0, 12.0))),
            params=ProcessParams(need("phi_s", 4.0, (int, float), positive=True),
                                 need("nu", 0.5, (int, float), positive=True),
                                 need("phi_t", 0.6, (int, float), positive=True)),
            noise_var=need("noise_var", 1.0, (int, float)),
            mean_level=need("mean_level", 5.0, (int, float)),
            mean_var=need("mean_var", 4.0, (int, float)),
            mean_period=need("mean_period", 7.0, (int, float), positive=True),
            mean_decay=need("mean_decay", 0.1, (int, float)),
            missing_frac=need("missing_frac", 0.1, (int, float)),
            seed=seed,
            beta1=tuple(section.get("beta1", (5.0, 1.0))),
            beta2=need("beta2", -1.0, (int, float)),
            tau2=need("tau2", 5.0, (int, float)),
            **kwargs)
    except (ValueError, InvalidGeometryError) as err:
        raise ConfigError(f"simulation: {err}") from None


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    run = parse_run_config(cfg, args.seed, args.threads)
    sim_cfg = parse_sim_config(run.simulation, run.seed)
    os.makedirs(args.out, exist_ok=True)
    rng = rng_for(run.seed, _STREAM_SIM)

    dataset, truth = simulate_exposure(sim_cfg, rng, basis_spec=run.basis)
    blocks = simulate_block_design(sim_cfg.quarters, sim_cfg.box, rng)
    outcome = simulate_outcome(blocks, truth, sim_cfg.beta1, sim_cfg.beta2,
                               sim_cfg.tau2, rng, mc_samples=run.mc_samples)

    site_index = {tuple(s): i for i, s in enumerate(truth.sites)}
    all_ids = [f"s{site_index[tuple(p.site)]:04d}" for p in truth.monthly_points]
    observed_ids = [sid for sid, keep in zip(all_ids, truth.observed_mask) if keep]
    io.write_points_csv(os.path.join(args.out, "points.csv"), observed_ids,
                        dataset.sites, dataset.intervals, dataset.x)
    io.write_truth_csv(os.path.join(args.out, "truth.csv"), all_ids,
                       [p.site for p in truth.monthly_points],
                       [p.interval for p in truth.monthly_points], truth.monthly_latent)
    block_ids = [f"b{idx:04d}" for idx in range(len(blocks))]
    io.write_blocks_geojson(os.path.join(args.out, "blocks.geojson"), blocks, block_ids)
    io.write_block_truth_csv(os.path.join(args.out, "block_truth.csv"), block_ids,
                             [b.interval for b in blocks], truth.block_values)
    io.write_outcomes_csv(os.path.join(args.out, "outcomes.csv"), block_ids,
                          [b.interval for b in blocks], outcome.y,
                          outcome.w[:, 1:], [f"w{i}" for i in range(1, outcome.w.shape[1])])
    log.info("simulated %d observed point records, %d blocks", dataset.n, len(blocks))
    return 0


def _load_point_dataset(path: str, basis: BasisSpec) -> PointDataset:
    _, sites, intervals, values, n_dropped = io.read_points_csv(path)
    if n_dropped:
        log.info("dropped %d rows with missing values from %s", n_dropped, path)
    points = tuple(SpaceTimePoint(s, (iv[0], iv[1])) for s, iv in zip(sites, intervals))
    return PointDataset(points=points, x=values, basis_spec=basis)


def cmd_fit_stack(args) -> int:
    cfg = load_config(args.config)
    run = parse_run_config(cfg, args.seed, args.threads)
    if not run.grids:
        raise ConfigError("grids: fit-stack requires all four candidate grids")
    dataset = _load_point_dataset(args.points, run.basis)
    priors = _priors_for(run, run.basis.r, p=1)
    specs = candidate_grid(run.grids["phi_s"], run.grids["nu"],
                           run.grids["phi_t"], run.grids["delta2"])
    method = run.loo_method
    if method == "auto":
        method = auto_loo_method(dataset.n)
    log.info("fitting %d candidates on N=%d (loo method: %s, threads: %d)",
             len(specs), dataset.n, method, run.threads)

    def fit_one(idx: int):
        fit = fit_candidate(dataset, specs[idx], priors)
        draws = None
        if method == "psis":
            draws = sample_candidate(fit, run.draws, rng_for(run.seed, _STREAM_FIT, idx))
        dens, khat = loo_column(fit, draws, method)
        return fit, dens, khat

    if run.threads > 1:
        with ThreadPoolExecutor(max_workers=run.threads) as pool:
            results = list(pool.map(fit_one, range(len(specs))))
    else:
        results = [fit_one(idx) for idx in range(len(specs))]

    fits = [r[0] for r in results]
    loo = LooMatrix(np.column_stack([r[1] for r in results]),
                    (method,) * len(specs),
                    np.column_stack([r[2] for r in results]))
    high = loo.high_khat_count()
    if high:
        log.warning("%d leave-one-out estimates have khat > 0.7", high)
    weights = stacking_weights(loo)
    log.info("stacking objective %.6f after %d iterations", weights.objective,
             weights.iterations)

    os.makedirs(args.out, exist_ok=True)
    io.write_weights_json(os.path.join(args.out, "weights.json"), specs, weights)
    io.write_loo_csv(os.path.join(args.out, "loo.csv"), loo,
                     khat_path=os.path.join(args.out, "loo_khat.csv")
                     if method == "psis" else None)
    io.save_fits(os.path.join(args.out, "fits"), fits, run.basis, priors,
                 extra={"seed": run.seed, "draws": run.draws, "loo_method": method})
    return 0


def _stacked_target_draws(fits, alpha, n_draws, seed, predict_fn):
    """Mixture draws over candidates: labels ~ Categorical(alpha), then
    per-candidate posterior draws routed through `predict_fn(fit, draws, rng)`."""
    rng = rng_for(seed, _STREAM_PREDICT)
    labels = rng.choice(len(fits), size=n_draws, p=alpha)
    counts = np.bincount(labels, minlength=len(fits))
    blocks_of_rows = []
    for g, count in enumerate(counts):
        if count == 0:
            blocks_of_rows.append(None)
            continue
        rng_g = rng_for(seed, _STREAM_PREDICT, g)
        draws = sample_candidate(fits[g], int(count), rng_g)
        blocks_of_rows.append(predict_fn(fits[g], draws, rng_g))
    n_targets = next(rows.shape[1] for rows in blocks_of_rows if rows is not None)
    out = np.empty((n_draws, n_targets))
    cursor = np.zeros(len(fits), dtype=int)
    for b, g in enumerate(labels):
        out[b] = blocks_of_rows[g][cursor[g]]
        cursor[g] += 1
    return out


def cmd_predict(args) -> int:
    fits, basis_spec, _, manifest = io.load_fits(args.fits)
    weights_path = args.weights or os.path.join(args.fits, "..", "weights.json")
    if not os.path.exists(weights_path):
        raise DataError(f"weights file not found: {weights_path}")
    specs, alpha, _, _ = io.read_weights_json(weights_path)
    if len(specs) != len(fits):
        raise DataError("weights.json and fits directory disagree on candidate count")
    seed = args.seed if args.seed is not None else manifest.get("seed", 0)
    n_draws = args.draws or manifest.get("draws", 1000)
    os.makedirs(args.out, exist_ok=True)

    if bool(args.instants) == bool(args.blocks):
        raise ConfigError("predict: exactly one of --instants or --blocks is required")

    if args.instants:
        ids, sites, times = io.read_instants_csv(args.instants)
        targets = [InstantPoint(s, t) for s, t in zip(sites, times)]

        def predict_fn(fit, draws, rng):
            chunks = [predict_instants(fit, draws, targets[lo:lo + PREDICT_CHUNK], rng)
                      for lo in range(0, len(targets), PREDICT_CHUNK)]
            return np.hstack(chunks)
    else:
        ids, target_blocks = io.read_blocks_geojson(args.blocks)

        def predict_fn(fit, draws, rng):
            return predict_blocks(fit, draws, target_blocks, args.mc_samples, rng)

    matrix = _stacked_target_draws(fits, alpha, n_draws, seed, predict_fn)
    io.write_samples_csv(os.path.join(args.out, "samples.csv"), ids, matrix)
    io.write_summary_csv(os.path.join(args.out, "summary.csv"), ids, matrix)
    log.info("predicted %d targets with %d stacked draws", len(ids), n_draws)
    return 0


def _encode_predictors(columns: dict, categorical: list):
    """Numeric pass-through plus dummy encoding (first level is the reference)."""
    names, arrays = [], []
    for name, cells in columns.items():
        if name in categorical:
            levels = sorted(set(cells))
            for level in levels[1:]:
                names.append(f"{name}={level}")
                arrays.append(np.array([1.0 if c == level else 0.0 for c in cells]))
        else:
            try:
                arrays.append(np.array([float(c) for c in cells]))
            except ValueError:
                raise DataError(
                    f"predictor column {name!r} is not numeric; declare it in "
                    f"outcome.categorical") from None
            names.append(name)
    return names, arrays


def cmd_outcome(args) -> int:
    cfg = load_config(args.config)
    run = parse_run_config(cfg, args.seed, args.threads)
    block_ids, intervals, y, columns, n_dropped = io.read_outcomes_csv(args.outcomes)
    if n_dropped:
        log.info("dropped %d outcome rows with missing y", n_dropped)
    geo_ids, geo_blocks = io.read_blocks_geojson(args.blocks)
    by_id = dict(zip(geo_ids, geo_blocks))
    missing = [bid for bid in block_ids if bid not in by_id]
    if missing:
        raise DataError(f"outcomes reference unknown block ids: {missing[:5]}")
    blocks = [by_id[bid] for bid in block_ids]

    sample_ids, zl = io.read_samples_csv(args.samples)
    sample_col = {tid: i for i, tid in enumerate(sample_ids)}
    missing = [bid for bid in block_ids if bid not in sample_col]
    if missing:
        raise DataError(f"prediction samples missing for block ids: {missing[:5]}")
    zl = zl[:, [sample_col[bid] for bid in block_ids]]

    if run.outcome.get("log_transform", False):
        bad = [block_ids[i] for i in np.where(y <= 0)[0]]
        if bad:
            raise DataError(f"log transform requires positive outcomes; offending rows "
                            f"{bad[:10]}")
        y = np.log(y)

    categorical = run.outcome.get("categorical", [])
    names, arrays = _encode_predictors(columns, categorical)
    w = np.column_stack([np.ones(len(y))] + arrays) if arrays else np.ones((len(y), 1))
    outcome_ds = BlockOutcomeDataset(
        blocks=tuple(blocks), y=y, w=w,
        include_interval_in_noise=run.outcome.get("include_interval_in_noise", True))

    priors = _priors_for(run, run.basis.r, p=w.shape[1])
    rng = rng_for(run.seed, _STREAM_OUTCOME)
    tau2, beta = fit_outcome_regression(outcome_ds, zl, priors, rng)
    loglik = log_pointwise_outcome_density(outcome_ds, tau2, beta, zl)
    report = waic(loglik)

    os.makedirs(args.out, exist_ok=True)
    coef_names = ["intercept"] + names + ["z_block"]
    header = ["draw"] + coef_names + ["tau2"]
    rows = []
    for b in range(len(tau2)):
        rows.append([str(b)] + [io.fmt_float(v) for v in beta[b]] + [io.fmt_float(tau2[b])])
    io.write_csv(os.path.join(args.out, "beta_samples.csv"), header, rows)

    q = np.percentile(beta, [2.5, 50.0, 97.5], axis=0)
    summary = {
        name: {"median": float(q[1, i]), "ci95": [float(q[0, i]), float(q[2, i])]}
        for i, name in enumerate(coef_names)
    }
    tq = np.percentile(tau2, [2.5, 50.0, 97.5])
    summary["tau2"] = {"median": float(tq[1]), "ci95": [float(tq[0]), float(tq[2])]}
    with open(os.path.join(args.out, "summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(os.path.join(args.out, "waic.json"), "w") as fh:
        json.dump(report.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    log.info("outcome regression done: %d draws, WAIC %.3f", len(tau2), report.waic)
    return 0


def cmd_waic(args) -> int:
    path = args.loglik
    if path.endswith(".npy"):
        loglik = np.load(path)
    else:
        try:
            loglik = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError as err:
            raise DataError(f"{path}: {err}") from None
    report = waic(loglik)
    doc = json.dumps(report.as_dict(), sort_keys=True, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(doc + "\n")
    else:
        print(doc)
    return 0


def cmd_variogram(args) -> int:
    cfg = load_config(args.config) if args.config else {}
    run = parse_run_config(cfg, args.seed, args.threads)
    dataset = _load_point_dataset(args.points, run.basis)
    rows = empirical_semivariogram(dataset, n_bins=args.bins)
    os.makedirs(args.out, exist_ok=True)
    io.write_csv(os.path.join(args.out, "variogram.csv"),
                  ["distance", "gamma", "pairs"],
                  [[io.fmt_float(d), io.fmt_float(g) if np.isfinite(g) else "", str(c)]
                   for d, g, c in rows])
    estimate = nugget_sill_estimate(rows)
    with open(os.path.join(args.out, "variogram.json"), "w") as fh:
        json.dump(estimate, fh, sort_keys=True, indent=2)
        fh.write("\n")
    log.info("variogram: nugget %.4g, sill %.4g (noise ratio %.3g)",
             estimate["nugget"], estimate["sill"], estimate["noise_ratio"])
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpstack",
        description="Bayesian predictive stacking for misaligned spatial-temporal data")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=None, help="worker thread count")

    p = sub.add_parser("simulate", help="generate a synthetic misaligned dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit-stack", help="fit the candidate grid and optimize weights")
    p.add_argument("--points", required=True, help="points.csv file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_fit_stack)

    p = sub.add_parser("predict", help="stacked prediction at instants or blocks")
    p.add_argument("--fits", required=True, help="fits directory from fit-stack")
    p.add_argument("--weights", default=None, help="weights.json (default: next to fits)")
    p.add_argument("--instants", default=None, help="instants.csv targets")
    p.add_argument("--blocks", default=None, help="blocks.geojson targets")
    p.add_argument("--draws", type=int, default=None)
    p.add_argument("--mc-samples", type=int, default=500, dest="mc_samples")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("outcome", help="downstream outcome regression with WAIC")
    p.add_argument("--outcomes", required=True, help="outcomes.csv")
    p.add_argument("--blocks", required=True, help="blocks.geojson (for block volumes)")
    p.add_argument("--samples", required=True, help="block prediction samples.csv")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_outcome)

    p = sub.add_parser("waic", help="WAIC from a draws-by-points log-likelihood matrix")
    p.add_argument("--loglik", required=True, help=".npy or .csv matrix file")
    p.add_argument("--out", default=None, help="output JSON (default: stdout)")
    p.set_defaults(func=cmd_waic)

    p = sub.add_parser("variogram", help="empirical semivariogram of detrended values")
    p.add_argument("--points", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_variogram)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as err:
        log.error("configuration error: %s", err)
        return 2
    except (DataError, InvalidGeometryError, FileNotFoundError) as err:
        log.error("data error: %s", err)
        return 3
    except (FactorizationError, FitError, PredictionError, RegressionError,
            ConvergenceError, np.linalg.LinAlgError) as err:
        log.error("numerical failure: %s", err)
        return 4
    except GpStackError as err:
        log.error("%s", err)
        return 4


if __name__ == "__main__":
    sys.exit(main())
