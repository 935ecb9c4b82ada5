"""File formats: CSV schemas, GeoJSON blocks, weight JSON, and fit persistence.

All numeric output is formatted with %.17g so repeated runs with the same
seed produce byte-identical files regardless of thread count.
"""

import csv
import json
import os

import numpy as np

from .covariance import ProcessParams, SpaceTimeBlock, SpaceTimePoint
from .errors import DataError
from .geometry import read_geojson_polygons
from .linalg import CholFactor
from .model import BasisSpec, CandidateFit, CandidateSpec, PointDataset, Priors

POINTS_HEADER = ["site_id", "x", "y", "t_start", "t_end", "value"]
TRUTH_HEADER = ["site_id", "x", "y", "t_start", "t_end", "z_true"]
BLOCK_TRUTH_HEADER = ["block_id", "t_start", "t_end", "z_true"]
INSTANTS_HEADER = ["target_id", "x", "y", "t"]
MANIFEST_NAME = "manifest.json"
DATA_BLOB_NAME = "data.npz"


def fmt_float(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_points_csv(path, site_ids, sites, intervals, values):
    rows = [
        [sid, fmt_float(s[0]), fmt_float(s[1]), fmt_float(iv[0]), fmt_float(iv[1]), fmt_float(v)]
        for sid, s, iv, v in zip(site_ids, sites, intervals, values)
    ]
    write_csv(path, POINTS_HEADER, rows)


def read_points_csv(path):
    """Read the point-record schema; rows with a missing value are dropped.

    Returns (site_ids, sites, intervals, values, n_dropped).
    """
    site_ids, sites, intervals, values = [], [], [], []
    n_dropped = 0
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != POINTS_HEADER:
            raise DataError(f"{path}: expected header {','.join(POINTS_HEADER)}, "
                            f"got {','.join(header or [])}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(POINTS_HEADER):
                raise DataError(f"{path}:{lineno}: expected {len(POINTS_HEADER)} fields")
            raw = row[5].strip()
            if raw == "" or raw.lower() in ("nan", "na"):
                n_dropped += 1
                continue
            try:
                x, y, t0, t1, value = (float(row[i]) for i in (1, 2, 3, 4, 5))
            except ValueError as err:
                raise DataError(f"{path}:{lineno}: {err}") from None
            if not np.isfinite(value):
                n_dropped += 1
                continue
            site_ids.append(row[0])
            sites.append((x, y))
            intervals.append((t0, t1))
            values.append(value)
    if not values:
        raise DataError(f"{path}: no usable rows")
    return (site_ids, np.asarray(sites), np.asarray(intervals), np.asarray(values), n_dropped)


def write_truth_csv(path, site_ids, sites, intervals, values):
    rows = [
        [sid, fmt_float(s[0]), fmt_float(s[1]), fmt_float(iv[0]), fmt_float(iv[1]), fmt_float(v)]
        for sid, s, iv, v in zip(site_ids, sites, intervals, values)
    ]
    write_csv(path, TRUTH_HEADER, rows)


def write_block_truth_csv(path, block_ids, intervals, values):
    rows = [
        [bid, fmt_float(iv[0]), fmt_float(iv[1]), fmt_float(v)]
        for bid, iv, v in zip(block_ids, intervals, values)
    ]
    write_csv(path, BLOCK_TRUTH_HEADER, rows)


def write_blocks_geojson(path, blocks, block_ids=None):
    """GeoJSON FeatureCollection of block polygons with interval properties."""
    if block_ids is None:
        block_ids = [f"b{idx:04d}" for idx in range(len(blocks))]
    features = []
    for bid, block in zip(block_ids, blocks):
        ring = block.region.vertices.tolist()
        ring.append(ring[0])                  # GeoJSON rings are closed
        features.append({
            "type": "Feature",
            "properties": {"block_id": bid,
                           "t_start": block.interval[0], "t_end": block.interval[1]},
            "geometry": {"type": "Polygon", "coordinates": [ring]},
        })
    doc = {"type": "FeatureCollection", "features": features}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def read_blocks_geojson(path):
    """Read blocks back: returns (block_ids, list of SpaceTimeBlock)."""
    ids, blocks = [], []
    for idx, (poly, props) in enumerate(read_geojson_polygons(path)):
        try:
            interval = (float(props["t_start"]), float(props["t_end"]))
        except (KeyError, TypeError, ValueError):
            raise DataError(f"{path}: feature {idx} missing t_start/t_end properties") from None
        ids.append(str(props.get("block_id", f"b{idx:04d}")))
        blocks.append(SpaceTimeBlock(poly, interval))
    if not blocks:
        raise DataError(f"{path}: no Polygon features")
    return ids, blocks


def write_outcomes_csv(path, block_ids, intervals, y, predictors, predictor_names):
    header = ["block_id", "t_start", "t_end", "y"] + list(predictor_names)
    rows = []
    for i, bid in enumerate(block_ids):
        row = [bid, fmt_float(intervals[i][0]), fmt_float(intervals[i][1]), fmt_float(y[i])]
        row += [fmt_float(v) for v in predictors[i]]
        rows.append(row)
    write_csv(path, header, rows)


def read_outcomes_csv(path):
    """Read outcomes: returns (block_ids, intervals, y, predictor_columns dict, n_dropped).

    Rows with a missing y are dropped. Predictor cells are kept as strings so
    the caller can decide between numeric and categorical encoding.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:4] != ["block_id", "t_start", "t_end", "y"]:
            raise DataError(f"{path}: expected header starting block_id,t_start,t_end,y")
        names = header[4:]
        block_ids, intervals, ys = [], [], []
        columns = {name: [] for name in names}
        n_dropped = 0
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields")
            raw = row[3].strip()
            if raw == "" or raw.lower() in ("nan", "na"):
                n_dropped += 1
                continue
            try:
                t0, t1, y = float(row[1]), float(row[2]), float(row[3])
            except ValueError as err:
                raise DataError(f"{path}:{lineno}: {err}") from None
            if not np.isfinite(y):
                n_dropped += 1
                continue
            block_ids.append(row[0])
            intervals.append((t0, t1))
            ys.append(y)
            for name, cell in zip(names, row[4:]):
                columns[name].append(cell)
    if not ys:
        raise DataError(f"{path}: no usable rows")
    return block_ids, np.asarray(intervals), np.asarray(ys), columns, n_dropped


def read_instants_csv(path):
    """Read prediction targets: returns (target_ids, sites, times)."""
    ids, sites, times = [], [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != INSTANTS_HEADER:
            raise DataError(f"{path}: expected header {','.join(INSTANTS_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                ids.append(row[0])
                sites.append((float(row[1]), float(row[2])))
                times.append(float(row[3]))
            except (IndexError, ValueError) as err:
                raise DataError(f"{path}:{lineno}: {err}") from None
    if not ids:
        raise DataError(f"{path}: no target rows")
    return ids, np.asarray(sites), np.asarray(times)


def write_instants_csv(path, target_ids, sites, times):
    rows = [
        [tid, fmt_float(s[0]), fmt_float(s[1]), fmt_float(t)]
        for tid, s, t in zip(target_ids, sites, times)
    ]
    write_csv(path, INSTANTS_HEADER, rows)


def write_weights_json(path, specs, weights):
    doc = {
        "candidates": [
            {**spec.as_dict(), "weight": float(w)}
            for spec, w in zip(specs, weights.alpha)
        ],
        "objective": float(weights.objective),
        "iterations": int(weights.iterations),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_weights_json(path):
    """Returns (list of CandidateSpec, weight array, objective, iterations)."""
    with open(path) as fh:
        doc = json.load(fh)
    specs, alpha = [], []
    for cand in doc["candidates"]:
        specs.append(CandidateSpec(
            ProcessParams(cand["phi_s"], cand["nu"], cand["phi_t"]), cand["delta2"]))
        alpha.append(float(cand["weight"]))
    return specs, np.asarray(alpha), float(doc["objective"]), int(doc["iterations"])


def write_loo_csv(path, loo, khat_path=None):
    names = [f"cand_{g:03d}" for g in range(loo.n_candidates)]
    rows = [
        [str(j)] + [fmt_float(v) for v in loo.densities[j]]
        for j in range(loo.n_points)
    ]
    write_csv(path, ["point"] + names, rows)
    if khat_path is not None:
        rows = [
            [str(j)] + [fmt_float(v) if np.isfinite(v) else "" for v in loo.khat[j]]
            for j in range(loo.n_points)
        ]
        write_csv(khat_path, ["point"] + names, rows)


def write_samples_csv(path, target_ids, draws_matrix):
    """Per-draw samples, one row per (target, draw): target_id,draw,value."""
    rows = []
    n_draws = draws_matrix.shape[0]
    for idx, tid in enumerate(target_ids):
        for b in range(n_draws):
            rows.append([tid, str(b), fmt_float(draws_matrix[b, idx])])
    write_csv(path, ["target_id", "draw", "value"], rows)


def read_samples_csv(path):
    """Read per-draw samples back into (target_ids, (n_draws, n_targets) matrix)."""
    by_target = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["target_id", "draw", "value"]:
            raise DataError(f"{path}: expected header target_id,draw,value")
        for lineno, row in enumerate(reader, start=2):
            try:
                by_target.setdefault(row[0], []).append((int(row[1]), float(row[2])))
            except (IndexError, ValueError) as err:
                raise DataError(f"{path}:{lineno}: {err}") from None
    if not by_target:
        raise DataError(f"{path}: no sample rows")
    ids = list(by_target)
    n_draws = len(by_target[ids[0]])
    matrix = np.empty((n_draws, len(ids)))
    for col, tid in enumerate(ids):
        entries = by_target[tid]
        if len(entries) != n_draws:
            raise DataError(f"{path}: target {tid} has {len(entries)} draws, expected {n_draws}")
        for b, value in entries:
            matrix[b, col] = value
    return ids, matrix


def write_summary_csv(path, target_ids, draws_matrix):
    """Posterior median and central 95% band per target."""
    q = np.percentile(draws_matrix, [2.5, 50.0, 97.5], axis=0)
    rows = [
        [tid, fmt_float(q[0, i]), fmt_float(q[1, i]), fmt_float(q[2, i])]
        for i, tid in enumerate(target_ids)
    ]
    write_csv(path, ["target_id", "q2.5", "median", "q97.5"], rows)


# ---------------------------------------------------------------------------
# candidate fit persistence
# ---------------------------------------------------------------------------

def save_fits(out_dir, fits, basis_spec, priors, extra=None):
    """Persist fitted candidates: JSON manifest + one matrix blob per candidate.

    The observation data is stored once; predictions can resume from this
    directory without refitting. chol(V_X) is not persisted (it is only
    needed for leave-one-out at fit time).
    """
    os.makedirs(out_dir, exist_ok=True)
    data = fits[0].data
    np.savez(os.path.join(out_dir, DATA_BLOB_NAME),
             sites=data.sites, intervals=data.intervals, x=data.x, basis=data.basis)
    candidates = []
    for idx, fit in enumerate(fits):
        blob = f"candidate_{idx:03d}.npz"
        np.savez(os.path.join(out_dir, blob),
                 chol_mz=fit.chol_mz.lower, chol_ctilde=fit.chol_ctilde.lower,
                 chol_m_gamma=fit.chol_m_gamma.lower, m_gamma_mat=fit.m_gamma_mat,
                 m_gamma_vec=fit.m_gamma_vec, gamma_mean=fit.gamma_mean,
                 proj_x=fit.proj_x, proj_basis=fit.proj_basis,
                 scalars=np.array([fit.a_sigma_star, fit.b_sigma_star]))
        candidates.append({**fit.spec.as_dict(), "file": blob})
    manifest = {
        "version": 1,
        "n": data.n,
        "basis": {"kind": basis_spec.kind, "periods": list(basis_spec.periods)},
        "priors": {
            "mu_gamma": priors.mu_gamma.tolist(), "v_gamma": priors.v_gamma.tolist(),
            "a_sigma": priors.a_sigma, "b_sigma": priors.b_sigma,
            "mu_beta": priors.mu_beta.tolist(), "v_beta": priors.v_beta.tolist(),
            "a_tau": priors.a_tau, "b_tau": priors.b_tau,
        },
        "candidates": candidates,
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def load_fits(fits_dir):
    """Reload persisted candidate fits. Returns (fits, basis_spec, priors, manifest)."""
    manifest_path = os.path.join(fits_dir, MANIFEST_NAME)
    if not os.path.exists(manifest_path):
        raise DataError(f"{fits_dir}: no {MANIFEST_NAME}; not a fits directory?")
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    basis_spec = BasisSpec(manifest["basis"]["kind"],
                           tuple(manifest["basis"]["periods"]))
    pr = manifest["priors"]
    priors = Priors(
        mu_gamma=np.asarray(pr["mu_gamma"]), v_gamma=np.asarray(pr["v_gamma"]),
        a_sigma=pr["a_sigma"], b_sigma=pr["b_sigma"],
        mu_beta=np.asarray(pr["mu_beta"]), v_beta=np.asarray(pr["v_beta"]),
        a_tau=pr["a_tau"], b_tau=pr["b_tau"])
    blob = np.load(os.path.join(fits_dir, DATA_BLOB_NAME))
    points = tuple(SpaceTimePoint(s, (iv[0], iv[1]))
                   for s, iv in zip(blob["sites"], blob["intervals"]))
    data = PointDataset(points=points, x=blob["x"], basis_spec=basis_spec,
                        basis=blob["basis"])
    fits = []
    for cand in manifest["candidates"]:
        spec = CandidateSpec(ProcessParams(cand["phi_s"], cand["nu"], cand["phi_t"]),
                             cand["delta2"])
        arrays = np.load(os.path.join(fits_dir, cand["file"]))
        fits.append(CandidateFit(
            spec=spec, data=data, priors=priors,
            chol_vx=None,
            chol_mz=CholFactor(arrays["chol_mz"]),
            chol_ctilde=CholFactor(arrays["chol_ctilde"]),
            m_gamma_mat=arrays["m_gamma_mat"], m_gamma_vec=arrays["m_gamma_vec"],
            gamma_mean=arrays["gamma_mean"],
            chol_m_gamma=CholFactor(arrays["chol_m_gamma"]),
            a_sigma_star=float(arrays["scalars"][0]),
            b_sigma_star=float(arrays["scalars"][1]),
            proj_x=arrays["proj_x"], proj_basis=arrays["proj_basis"]))
    return fits, basis_spec, priors, manifest
