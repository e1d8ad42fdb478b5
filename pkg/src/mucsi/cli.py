"""Command line entry points.

Subcommands: generate-data, train, evaluate, sweep, sscc-compare, report.
Run ``mucsi <subcommand> --help`` for the flags of each.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import evaluate as ev
from . import sscc as sscc_mod
from . import training
from .codec import (ModelParams, checkpoint_name, csi_to_tokens,
                    k_for_compression_ratio, load_checkpoint,
                    save_checkpoint)
from .config import load_config, parse_ratio
from .dataset import generate_dataset, load_split, split_path
from .evaluate import SweepCell, run_sweep, write_results_csv
from .training import TrainConfig, TrainState, train_stage1, train_stage2


def _parse_list(text, conv):
    return [conv(part) for part in text.split(",") if part]


def _parse_grid(text):
    """start:stop:step (inclusive stop) or a comma list."""
    if ":" in text:
        start, stop, step = (float(p) for p in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return [start + i * step for i in range(n)]
    return _parse_list(text, float)


def _load_tokens(path):
    header, data = load_split(path)
    return header, csi_to_tokens(data)


def cmd_generate_data(args):
    app = load_config(args.config)
    seed = app.data_seed if args.seed is None else args.seed
    paths = generate_dataset(app.channel, app.data_counts, seed, args.out)
    for path in paths:
        print(f"wrote {path}")
    return 0


def _train_log_callback(log_fh, params, cfg, val_tokens, snr_db, eval_seed, tcfg):
    log_fh.write("step,lr,loss,val_nmse_db\n")

    def callback(state, epoch_loss):
        lr = training.noam_lr(state.step, cfg.d_model, tcfg.warmup_steps,
                              tcfg.lr_factor)
        val = training.evaluate_nmse(params, cfg, val_tokens, snr_db, eval_seed,
                                     link_mode=tcfg.link_mode)
        log_fh.write(f"{state.step},{lr:.6e},{epoch_loss:.6e},{ev.to_db(val):.4f}\n")
        log_fh.flush()

    return callback


def cmd_train(args):
    app = load_config(args.config)
    tcfg = app.train
    _, train_tokens = _load_tokens(split_path(args.data, "train"))
    _, val_tokens = _load_tokens(split_path(args.data, "val"))

    if args.resume:
        params, _, meta = load_checkpoint(args.resume)
        cfg = params.cfg
        state = TrainState(params=params, step=meta["step"])
    else:
        cfg = app.codec
        params = ModelParams(cfg, seed=tcfg.seed)
        state = TrainState(params=params)

    callback = None
    log_fh = None
    if args.log:
        log_fh = open(args.log, "w", encoding="utf-8")
        val_snr = tcfg.snr_fixed_db
        callback = _train_log_callback(log_fh, params, cfg, val_tokens, val_snr,
                                       app.eval_seed, tcfg)
    try:
        if args.stage == 1:
            state = train_stage1(state, train_tokens, cfg, tcfg, callback)
        else:
            state = train_stage2(state, train_tokens, cfg, tcfg, callback)
    finally:
        if log_fh is not None:
            log_fh.close()
    save_checkpoint(args.out, params, app.channel, stage=args.stage,
                    step=state.step, seed=tcfg.seed, link_mode=tcfg.link_mode)
    print(f"wrote {args.out} after step {state.step}")
    return 0


def cmd_evaluate(args):
    params, channel_cfg, meta = load_checkpoint(args.checkpoint)
    header, tokens = _load_tokens(args.data)
    if args.n_samples:
        tokens = tokens[:args.n_samples]
    value = training.evaluate_nmse(params, params.cfg, tokens, args.snr_db,
                                   args.seed, link_mode=meta["link"])
    cell = SweepCell(
        variant=params.cfg.variant, n_users=header["n_users"],
        cr=params.cfg.compression_ratio, snr_db=args.snr_db,
        checkpoint=args.checkpoint, data_path=args.data,
    )
    row = ev.result_row(cell, value, tokens.shape[0], args.seed,
                         params.cfg.d_model, params.cfg.heads)
    if args.out:
        write_results_csv([row], args.out)
        print(f"wrote {args.out}")
    label = row["nmse_db"] if row["nmse_db"] else "-inf (zero error)"
    print(f"nmse {row['nmse_linear']} linear, {label} dB")
    return 0


def cmd_sweep(args):
    app = load_config(args.config) if args.config else None
    variants = _parse_list(args.variants, str)
    user_counts = _parse_list(args.m, int)
    crs = _parse_list(args.cr, parse_ratio)
    snrs = _parse_grid(args.snr)
    header, _ = _load_tokens(_data_for_m(args, user_counts[0]))

    cells = []
    for variant in variants:
        for m in user_counts:
            for cr in crs:
                k = k_for_compression_ratio(cr, header["n_delay"], header["n_tx"])
                for snr in snrs:
                    named = checkpoint_name(variant, m, k, snr)
                    fallback = checkpoint_name(variant, m, k)
                    path = os.path.join(args.checkpoint_dir, named)
                    if not os.path.exists(path):
                        path = os.path.join(args.checkpoint_dir, fallback)
                    cells.append(SweepCell(
                        variant=variant, n_users=m, cr=cr, snr_db=snr,
                        checkpoint=path, data_path=_data_for_m(args, m),
                    ))
    rows, failures = run_sweep(cells, args.seed, args.n_samples, args.out)
    print(f"wrote {args.out}: {len(rows)} rows")
    for cell, message in failures:
        print(f"FAILED cell variant={cell.variant} m={cell.n_users} "
              f"cr={cell.cr:g} snr={cell.snr_db:g}: {message}", file=sys.stderr)
    return 0 if not failures else 1


def _data_for_m(args, m):
    """Test split for a user count: data root with m{M}/ subdirs, or flat."""
    sub = os.path.join(args.data_root, f"m{m}")
    if os.path.isdir(sub):
        return split_path(sub, "test")
    return split_path(args.data_root, "test")


def cmd_sscc_compare(args):
    app = load_config(args.config)
    if app.sscc_link is None:
        raise SystemExit("config needs an [sscc_link] section")
    if not app.ber_table:
        raise SystemExit("config needs an [sscc_ber_table] section")
    params, channel_cfg, meta = load_checkpoint(args.checkpoint)
    cfg = params.cfg
    q = app.quantizer_bits
    link = app.sscc_link
    b_needed = sscc_mod.values_for_overhead(
        args.overhead, q, link.code_rate, link.constellation_points
    )
    if cfg.k_feedback != b_needed:
        print(f"note: checkpoint encoder emits {cfg.k_feedback} values; "
              f"overhead {args.overhead} at q={q}, r={link.code_rate:g}, "
              f"a={link.constellation_points} carries {b_needed}", file=sys.stderr)

    header, test_tokens = _load_tokens(split_path(args.data, "test"))
    _, train_tokens = _load_tokens(split_path(args.data, "train"))
    if args.n_samples:
        test_tokens = test_tokens[:args.n_samples]

    qc = ev.calibrate_quantizer(params, cfg, train_tokens, q,
                                app.quantizer_coverage)
    snrs = _parse_grid(args.snr_grid)
    rows = []
    for snr in snrs:
        ber = sscc_mod.ber_for_snr(app.ber_table, snr)
        value = ev.sscc_nmse(params, cfg, test_tokens, qc, link, ber,
                             args.seed)
        cell = SweepCell(
            variant=cfg.variant, n_users=header["n_users"],
            cr=cfg.compression_ratio, snr_db=snr,
            checkpoint=args.checkpoint, data_path=split_path(args.data, "test"),
            scheme="sscc",
        )
        rows.append(ev.result_row(cell, value, test_tokens.shape[0], args.seed,
                                   cfg.d_model, cfg.heads))
    if args.djscc_checkpoint:
        dj_params, _, dj_meta = load_checkpoint(args.djscc_checkpoint)
        for snr in snrs:
            value = training.evaluate_nmse(dj_params, dj_params.cfg, test_tokens,
                                           snr, args.seed, link_mode=dj_meta["link"])
            cell = SweepCell(
                variant=dj_params.cfg.variant, n_users=header["n_users"],
                cr=dj_params.cfg.compression_ratio, snr_db=snr,
                checkpoint=args.djscc_checkpoint,
                data_path=split_path(args.data, "test"),
            )
            rows.append(ev.result_row(cell, value, test_tokens.shape[0], args.seed,
                                       dj_params.cfg.d_model, dj_params.cfg.heads))
    write_results_csv(rows, args.out)
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


def cmd_report(args):
    rows = ev.read_results_csv(args.results)
    paths = ev.emit_plot_data(rows, args.axis, args.out)
    for path in paths:
        print(f"wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="mucsi",
                                     description="multi-user CSI feedback pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate-data", help="write train/val/test dataset files")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_generate_data)

    p = sub.add_parser("train", help="run one training stage")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--stage", type=int, choices=(1, 2), required=True)
    p.add_argument("--out", required=True, help="checkpoint path to write")
    p.add_argument("--resume", default=None, help="checkpoint to start from")
    p.add_argument("--log", default=None, help="training log CSV")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="NMSE of one checkpoint at one SNR")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="dataset split file")
    p.add_argument("--snr-db", type=float, required=True)
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=99)
    p.add_argument("--out", default=None, help="results CSV")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="evaluate a grid of cells to one CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--data-root", required=True,
                   help="dataset dir, or root with m2/ m3/ ... subdirs")
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--variants", required=True, help="comma list")
    p.add_argument("--m", required=True, help="comma list of user counts")
    p.add_argument("--cr", required=True, help="comma list, e.g. 1/16,1/32")
    p.add_argument("--snr", required=True, help="comma list or start:stop:step")
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=99)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("sscc-compare",
                       help="digital-feedback NMSE across an SNR grid")
    p.add_argument("--config", required=True)
    p.add_argument("--checkpoint", required=True,
                   help="codec trained with link_mode=ideal")
    p.add_argument("--djscc-checkpoint", default=None,
                   help="optional analog codec for an overlay")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--overhead", type=int, required=True, choices=(64, 128),
                   help="feedback budget in channel symbols")
    p.add_argument("--snr-grid", default="0:20:2")
    p.add_argument("--n-samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=99)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sscc_compare)

    p = sub.add_parser("report", help="split a results CSV into plot series")
    p.add_argument("--results", required=True)
    p.add_argument("--axis", required=True, choices=("snr", "cr", "m"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
