"""Experiment config files: INI sections mapping onto the config dataclasses.

Example::

    [channel]
    n_tx = 16
    n_sub = 64
    n_delay = 16
    bandwidth_hz = 20e6
    n_paths = 6
    n_users = 2
    aod_jitter_rad = 0.02

    [codec]
    d_model = 64
    heads = 4
    l1 = 2
    l2 = 1
    l3 = 1
    cr = 1/16          ; or an explicit k_feedback = 32
    variant = rca

    [data]
    train = 5000
    val = 500
    test = 500
    seed = 123

    [train]
    epochs_stage1 = 8
    epochs_stage2 = 2
    batch_size = 50
    warmup_steps = 200
    snr_lo_db = 0
    snr_hi_db = 20
    snr_fixed_db = 10
    seed = 1

    [eval]
    seed = 99
    n_samples = 500

    [quantizer]
    bits = 4
    coverage_pct = 99.9

    [sscc_link]
    code_rate = 0.5
    constellation_points = 16

    [sscc_ber_table]
    0 = 0.05
    10 = 0.0
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .channel import ChannelConfig
from .codec import CodecConfig, k_for_compression_ratio
from .sscc import SsccLinkConfig
from .training import TrainConfig


@dataclass
class AppConfig:
    channel: ChannelConfig
    codec: CodecConfig
    train: TrainConfig
    data_counts: dict
    data_seed: int
    eval_seed: int = 99
    eval_samples: int | None = None
    quantizer_bits: int = 4
    quantizer_coverage: float = 99.9
    sscc_link: SsccLinkConfig | None = None
    ber_table: list = field(default_factory=list)


def parse_ratio(text: str) -> float:
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _get(section, key, conv, default):
    if section is None or key not in section:
        return default
    return conv(section[key])


def load_config(path: str) -> AppConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise OSError(f"cannot read config file {path}")

    ch = parser["channel"] if parser.has_section("channel") else None
    channel = ChannelConfig(
        n_tx=_get(ch, "n_tx", int, 16),
        n_sub=_get(ch, "n_sub", int, 64),
        n_delay=_get(ch, "n_delay", int, 16),
        bandwidth_hz=_get(ch, "bandwidth_hz", float, 20e6),
        n_paths=_get(ch, "n_paths", int, 6),
        n_users=_get(ch, "n_users", int, 2),
        aod_jitter_rad=_get(ch, "aod_jitter_rad", float, 0.02),
    )

    co = parser["codec"] if parser.has_section("codec") else None
    if co is not None and "k_feedback" in co:
        k = int(co["k_feedback"])
    else:
        cr = _get(co, "cr", parse_ratio, 1.0 / 16.0)
        k = k_for_compression_ratio(cr, channel.n_delay, channel.n_tx)
    codec = CodecConfig(
        n_tx=channel.n_tx,
        n_delay=channel.n_delay,
        k_feedback=k,
        d_model=_get(co, "d_model", int, 64),
        heads=_get(co, "heads", int, 4),
        l1=_get(co, "l1", int, 2),
        l2=_get(co, "l2", int, 1),
        l3=_get(co, "l3", int, 1),
        variant=_get(co, "variant", str, "rca"),
    )

    tr = parser["train"] if parser.has_section("train") else None
    train = TrainConfig(
        epochs_stage1=_get(tr, "epochs_stage1", int, 8),
        epochs_stage2=_get(tr, "epochs_stage2", int, 2),
        batch_size=_get(tr, "batch_size", int, 50),
        warmup_steps=_get(tr, "warmup_steps", int, 200),
        snr_range_db=(
            _get(tr, "snr_lo_db", float, 0.0),
            _get(tr, "snr_hi_db", float, 20.0),
        ),
        snr_fixed_db=_get(tr, "snr_fixed_db", float, 10.0),
        seed=_get(tr, "seed", int, 0),
        lr_factor=_get(tr, "lr_factor", float, 1.0),
        beta1=_get(tr, "beta1", float, 0.9),
        beta2=_get(tr, "beta2", float, 0.98),
        adam_eps=_get(tr, "adam_eps", float, 1e-9),
        per_ue_snr=_get(tr, "per_ue_snr", lambda s: s.lower() in ("1", "true", "yes"), False),
        link_mode=_get(tr, "link_mode", str, "awgn"),
    )

    da = parser["data"] if parser.has_section("data") else None
    data_counts = {
        "train": _get(da, "train", int, 5000),
        "val": _get(da, "val", int, 500),
        "test": _get(da, "test", int, 500),
    }
    data_seed = _get(da, "seed", int, 123)

    ev = parser["eval"] if parser.has_section("eval") else None
    eval_seed = _get(ev, "seed", int, 99)
    eval_samples = _get(ev, "n_samples", int, None)

    qa = parser["quantizer"] if parser.has_section("quantizer") else None
    q_bits = _get(qa, "bits", int, 4)
    q_cov = _get(qa, "coverage_pct", float, 99.9)

    sl = parser["sscc_link"] if parser.has_section("sscc_link") else None
    sscc_link = None
    if sl is not None:
        sscc_link = SsccLinkConfig(
            code_rate=parse_ratio(sl.get("code_rate", "0.5")),
            constellation_points=int(sl.get("constellation_points", "16")),
            ber=float(sl.get("ber", "0.0")),
        )

    ber_table = []
    if parser.has_section("sscc_ber_table"):
        for key, value in parser["sscc_ber_table"].items():
            ber_table.append((float(key), float(value)))
        ber_table.sort()

    return AppConfig(
        channel=channel,
        codec=codec,
        train=train,
        data_counts=data_counts,
        data_seed=data_seed,
        eval_seed=eval_seed,
        eval_samples=eval_samples,
        quantizer_bits=q_bits,
        quantizer_coverage=q_cov,
        sscc_link=sscc_link,
        ber_table=ber_table,
    )
