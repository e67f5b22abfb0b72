"""CSV / JSON ingestion and report emission shared by the CLI.

All CSVs carry a header row, UTF-8, "." decimal separator; floats are
written at full precision so fixed-seed reruns reproduce files byte for
byte. Share rows are renormalized when their sum is within 1e-6 of one
and rejected beyond that.
"""

from __future__ import annotations

import json
import os

import numpy as np
import pandas as pd

from .model import DesignMatrix, ShareMatrix

FLOAT_FORMAT = "%.17g"


def read_shares(path, tol=1e-6):
    """(ShareMatrix, class names) from a header CSV of share columns."""
    df = pd.read_csv(path, float_precision="round_trip")
    if df.shape[1] < 2:
        raise ValueError("%s: need at least 2 share columns" % path)
    try:
        shares = ShareMatrix.from_raw(df.to_numpy(dtype=float), tol=tol)
    except ValueError as exc:
        raise ValueError("%s: %s" % (path, exc)) from exc
    return shares, list(df.columns)


def read_covariates(path):
    """(values, column names) from a header CSV of covariates."""
    df = pd.read_csv(path, float_precision="round_trip")
    if df.shape[1] < 1:
        raise ValueError("%s: no covariate columns" % path)
    values = df.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        i, k = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(
            "%s: non-finite covariate at row %d, column %r"
            % (path, int(i), df.columns[int(k)])
        )
    return values, list(df.columns)


def build_design(values, names, intercept=False, zscore=False):
    design = (
        DesignMatrix.with_intercept(values, names=names)
        if intercept
        else DesignMatrix(values, names=names)
    )
    return design.zscored() if zscore else design


def write_frame(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def write_json(payload, path):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_simulated_dataset(out_dir, shares, design, coords, truth, meta):
    """simulate artifacts: shares.csv, covariates.csv, coords.csv and a
    truth.json manifest holding the generating parameters."""
    os.makedirs(out_dir, exist_ok=True)
    n_classes = shares.y.shape[1]
    write_frame(
        pd.DataFrame(shares.y, columns=["share_%d" % (j + 1) for j in range(n_classes)]),
        os.path.join(out_dir, "shares.csv"),
    )
    write_frame(
        pd.DataFrame(design.X, columns=design.names),
        os.path.join(out_dir, "covariates.csv"),
    )
    write_frame(
        pd.DataFrame(
            {"id": np.arange(coords.shape[0]), "x": coords[:, 0], "y": coords[:, 1]}
        ),
        os.path.join(out_dir, "coords.csv"),
    )
    payload = dict(meta)
    payload["beta"] = [[float(v) for v in row] for row in truth["beta"]]
    payload["rho"] = [float(v) for v in truth["rho"]]
    write_json(payload, os.path.join(out_dir, "truth.json"))


def chain_parameter_draws(chain):
    """Flat (name, draws) pairs across every stored parameter block."""
    pairs = []
    m = chain.beta.shape[1]
    for j in range(m):
        for k, name in enumerate(chain.coef_names):
            pairs.append(("beta_%d_%s" % (j + 1, name), chain.beta[:, j, k]))
        for k, name in enumerate(chain.lag_names):
            pairs.append(("theta_%d_%s" % (j + 1, name), chain.theta[:, j, k]))
    # rho rows are always reported; non-spatial chains show them pinned
    # at zero
    for j in range(m):
        pairs.append(("rho_%d" % (j + 1), chain.rho[:, j]))
    return pairs


def posterior_summary_frame(chain):
    """Mean, SD, and 90% equal-tailed interval per parameter."""
    rows = []
    for name, draws in chain_parameter_draws(chain):
        rows.append(
            {
                "parameter": name,
                "mean": draws.mean(),
                "sd": draws.std(ddof=1) if draws.size > 1 else 0.0,
                "q05": np.quantile(draws, 0.05),
                "q95": np.quantile(draws, 0.95),
            }
        )
    return pd.DataFrame(rows)


def geweke_frame(chain):
    """Geweke z-score per parameter; NaN where the diagnostic is
    undefined (constant chains)."""
    from .diagnostics import geweke_z

    rows = []
    for name, draws in chain_parameter_draws(chain):
        try:
            z = geweke_z(draws)
        except ValueError:
            z = np.nan
        rows.append({"parameter": name, "geweke_z": z})
    return pd.DataFrame(rows)


def impact_table_frame(impacts, rho_mean=None, rho_significant=None, mcfadden=None):
    """Wide impact table: one row per covariate, direct/indirect
    columns (and significance flags) per class, plus a rho row and a
    McFadden pseudo R-squared row."""
    labels = impacts.class_labels
    rows = []
    for ki, name in enumerate(impacts.covariate_names):
        row = {"row": name}
        for j, lab in enumerate(labels):
            row["direct_%s" % lab] = impacts.direct_mean[ki, j]
            row["direct_%s_sig" % lab] = bool(impacts.direct_significant[ki, j])
            row["indirect_%s" % lab] = impacts.indirect_mean[ki, j]
            row["indirect_%s_sig" % lab] = bool(impacts.indirect_significant[ki, j])
        rows.append(row)
    if rho_mean is not None:
        row = {"row": "rho"}
        for j, lab in enumerate(labels):
            row["direct_%s" % lab] = rho_mean[j]
            row["direct_%s_sig" % lab] = (
                bool(rho_significant[j]) if rho_significant is not None else False
            )
        rows.append(row)
    if mcfadden is not None:
        row = {"row": "mcfadden_r2"}
        row["direct_%s" % labels[0]] = mcfadden
        row["direct_%s_sig" % labels[0]] = False
        rows.append(row)
    frame = pd.DataFrame(rows)
    lead = ["row"]
    cols = lead + [c for c in frame.columns if c not in lead]
    return frame[cols]
