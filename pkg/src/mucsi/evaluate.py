"""NMSE metric, sweep harness and results/plot-data emission.

Results are CSV (UTF-8, header row) with one row per evaluated cell. A zero
NMSE cannot be expressed in dB, so the ``nmse_db`` field is left empty and
the ``nmse_zero`` flag is set instead of writing a sentinel number.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, replace

import numpy as np

from . import sscc as sscc_mod
from . import training
from .autodiff import Tensor, no_grad
from .codec import csi_to_tokens, decoder_forward, encoder_forward, load_checkpoint

CSV_COLUMNS = (
    "scheme", "variant", "n_users", "cr", "snr_db", "nmse_linear", "nmse_db",
    "nmse_zero", "n_samples", "seed", "d_model", "heads", "checkpoint",
)


def nmse(truth, est) -> float:
    """Average over users of squared-error energy over signal energy."""
    if len(truth) != len(est):
        raise ValueError("truth and estimate lists differ in length")
    if not truth:
        raise ValueError("empty user list")
    ratios = []
    for t, e in zip(truth, est):
        t = np.asarray(t)
        e = np.asarray(e)
        if t.shape != e.shape:
            raise ValueError(f"shape mismatch {t.shape} vs {e.shape}")
        ref = float(np.sum(np.abs(t) ** 2))
        if ref == 0.0:
            raise ValueError("zero-norm truth matrix")
        ratios.append(float(np.sum(np.abs(t - e) ** 2)) / ref)
    return float(np.mean(ratios))


def to_db(x: float) -> float:
    if x <= 0:
        raise ValueError("dB undefined for non-positive values")
    return 10.0 * np.log10(x)


@dataclass
class SweepCell:
    """One grid cell: where its checkpoint and test data live."""

    variant: str
    n_users: int
    cr: float
    snr_db: float
    checkpoint: str
    data_path: str
    scheme: str = "djscc"


def result_row(cell: SweepCell, nmse_linear: float, n_samples: int, seed: int,
                d_model: int, heads: int) -> dict:
    zero = nmse_linear == 0.0
    return {
        "scheme": cell.scheme,
        "variant": cell.variant,
        "n_users": cell.n_users,
        "cr": f"{cell.cr:.6g}",
        "snr_db": f"{cell.snr_db:g}",
        "nmse_linear": f"{nmse_linear:.9e}",
        "nmse_db": "" if zero else f"{to_db(nmse_linear):.4f}",
        "nmse_zero": int(zero),
        "n_samples": n_samples,
        "seed": seed,
        "d_model": d_model,
        "heads": heads,
        "checkpoint": cell.checkpoint,
    }


def run_sweep(cells, eval_seed: int, n_samples: int | None = None,
              out_csv: str | None = None):
    """Evaluate every cell on its test split; never trains.

    Missing checkpoints (or data) fail that cell and the sweep continues.
    Returns (rows, failures) where failures is a list of (cell, message).
    """
    from .dataset import load_split

    rows = []
    failures = []
    data_cache = {}
    for cell in cells:
        try:
            params, _, meta = load_checkpoint(cell.checkpoint)
            if cell.data_path not in data_cache:
                header, data = load_split(cell.data_path)
                data_cache[cell.data_path] = (header, csi_to_tokens(data))
            header, tokens = data_cache[cell.data_path]
            if header["n_users"] != cell.n_users:
                raise ValueError(
                    f"data holds {header['n_users']} users, cell wants {cell.n_users}"
                )
            take = tokens if n_samples is None else tokens[:n_samples]
            value = training.evaluate_nmse(
                params, params.cfg, take, cell.snr_db, eval_seed,
                link_mode=meta["link"],
            )
            rows.append(result_row(
                cell, value, take.shape[0], eval_seed,
                params.cfg.d_model, params.cfg.heads,
            ))
        except (OSError, ValueError) as exc:
            failures.append((cell, str(exc)))
    if out_csv is not None:
        write_results_csv(rows, out_csv)
    return rows, failures


def write_results_csv(rows, path: str):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_results_csv(path: str):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def calibrate_quantizer(params, cfg, train_tokens, bits, coverage,
                        max_samples=1000):
    """Quantizer clip range from encoder-output percentiles on training data."""
    take = train_tokens[:max_samples]
    outputs = []
    with no_grad():
        for m in range(take.shape[1]):
            outputs.append(encoder_forward(Tensor(take[:, m]), params, cfg).data)
    lo, hi = sscc_mod.calibrate_clip_range(np.concatenate(outputs), coverage)
    return sscc_mod.QuantizerConfig(bits=bits, clip_lo=lo, clip_hi=hi)


def sscc_nmse(params, cfg, tokens, qc, link_cfg, ber, eval_seed,
              batch_size=200):
    """NMSE of the digital pipeline: encode, quantize, flip bits, decode.

    Bit-flip draws are fixed per (eval_seed, sample, user), so grid points
    and schemes see paired channel realizations.
    """
    link = replace(link_cfg, ber=ber)
    n_samples, n_users = tokens.shape[:2]
    ratios = []
    for start in range(0, n_samples, batch_size):
        batch = tokens[start:start + batch_size]
        with no_grad():
            vbars = []
            for m in range(n_users):
                v = encoder_forward(Tensor(batch[:, m]), params, cfg).data
                out = np.empty_like(v)
                for i in range(v.shape[0]):
                    ss = np.random.SeedSequence(int(eval_seed),
                                                spawn_key=(start + i, m))
                    rng = np.random.Generator(np.random.PCG64(ss))
                    out[i] = sscc_mod.sscc_transmit(v[i], qc, link, rng)
                vbars.append(Tensor(out))
            est = decoder_forward(vbars, params, cfg)
        for m in range(n_users):
            diff = est[m].data - batch[:, m]
            err = np.sum(diff ** 2, axis=(-2, -1))
            ref = np.sum(batch[:, m] ** 2, axis=(-2, -1))
            ratios.append(err / ref)
    return float(np.mean(np.concatenate(ratios)))


_AXIS_ALIASES = {"snr": "snr_db", "snr_db": "snr_db", "cr": "cr",
                 "m": "n_users", "n_users": "n_users"}


def emit_plot_data(rows, axis: str, out_dir: str):
    """One series file per (scheme, variant, fixed coords), sorted by axis."""
    if not rows:
        raise ValueError("empty report")
    axis_col = _AXIS_ALIASES.get(axis.lower())
    if axis_col is None:
        raise ValueError(f"unknown axis {axis!r}, expected snr, cr or m")
    fixed_cols = [c for c in ("scheme", "variant", "n_users", "cr", "snr_db")
                  if c != axis_col]
    series = {}
    for row in rows:
        key = tuple(row[c] for c in fixed_cols)
        series.setdefault(key, []).append(row)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for key, members in sorted(series.items()):
        members.sort(key=lambda r: float(r[axis_col]))
        tag = "_".join(f"{c}{v}" for c, v in zip(fixed_cols, key))
        tag = tag.replace("/", "-").replace(" ", "")
        path = os.path.join(out_dir, f"series_{axis_col}_{tag}.csv")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=[axis_col, "nmse_linear", "nmse_db", "nmse_zero",
                                "scheme", "variant", "n_users", "cr", "snr_db"]
            )
            writer.writeheader()
            for row in members:
                writer.writerow({c: row[c] for c in writer.fieldnames})
        paths.append(path)
    return paths
