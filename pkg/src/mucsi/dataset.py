"""Dataset serialization: text header + contiguous complex64 records.

File layout::

    MUCSI-DATASET v1
    key: value          (one per line, see _HEADER_KEYS)
    ---
    <binary payload>

The payload is ``count`` records, each record the ``n_users`` matrices of one
group as little-endian complex64, ``(n_users, n_delay, n_tx)`` row-major.

Every sample owns a seed derived from ``(master_seed, split_index,
sample_index)``, so any single sample can be regenerated in isolation and
the train/val/test streams live in disjoint seed subspaces. Generation is
serial here, but the per-sample seeding makes it trivially parallelizable.
"""

from __future__ import annotations

import os

import numpy as np

from .channel import ChannelConfig, generate_group

MAGIC = "MUCSI-DATASET v1"
SPLITS = ("train", "val", "test")
RECORD_DTYPE = np.dtype("<c8")

_HEADER_KEYS = (
    "n_tx", "n_sub", "n_delay", "bandwidth_hz", "n_paths", "n_users",
    "aod_jitter_rad", "split", "count", "counts", "master_seed",
)


def sample_rng(master_seed: int, split_index: int, sample_index: int):
    ss = np.random.SeedSequence(master_seed, spawn_key=(split_index, sample_index))
    return np.random.Generator(np.random.PCG64(ss))


def split_path(out_dir: str, split: str) -> str:
    return os.path.join(out_dir, f"{split}.dat")


def _header_text(cfg: ChannelConfig, split: str, count: int, counts: dict, seed: int) -> str:
    counts_str = " ".join(f"{name}={counts[name]}" for name in SPLITS)
    lines = [
        MAGIC,
        f"n_tx: {cfg.n_tx}",
        f"n_sub: {cfg.n_sub}",
        f"n_delay: {cfg.n_delay}",
        f"bandwidth_hz: {cfg.bandwidth_hz!r}",
        f"n_paths: {cfg.n_paths}",
        f"n_users: {cfg.n_users}",
        f"aod_jitter_rad: {cfg.aod_jitter_rad!r}",
        f"split: {split}",
        f"count: {count}",
        f"counts: {counts_str}",
        f"master_seed: {seed}",
        "---",
    ]
    return "\n".join(lines) + "\n"


def generate_dataset(cfg: ChannelConfig, counts: dict, seed: int, out_dir: str):
    """Write one file per split; returns the written paths in split order."""
    for name in SPLITS:
        if counts.get(name, 0) <= 0:
            raise ValueError(f"count for split {name!r} must be positive")
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for split_index, split in enumerate(SPLITS):
        path = split_path(out_dir, split)
        try:
            with open(path, "wb") as fh:
                fh.write(_header_text(cfg, split, counts[split], counts, seed).encode())
                for i in range(counts[split]):
                    group = generate_group(cfg, sample_rng(seed, split_index, i))
                    fh.write(np.ascontiguousarray(group.astype(RECORD_DTYPE)).tobytes())
        except OSError as exc:
            raise OSError(f"failed writing dataset file {path}: {exc}") from exc
        paths.append(path)
    return paths


def _parse_header(raw: bytes, path: str):
    text, sep, _ = raw.partition(b"\n---\n")
    if not sep:
        raise ValueError(f"{path}: missing header terminator")
    lines = text.decode().splitlines()
    if not lines or lines[0] != MAGIC:
        raise ValueError(f"{path}: not a {MAGIC} file")
    header = {}
    for line in lines[1:]:
        key, _, value = line.partition(":")
        header[key.strip()] = value.strip()
    for key in _HEADER_KEYS:
        if key not in header:
            raise ValueError(f"{path}: header is missing {key!r}")
    offset = len(text) + len(b"\n---\n")
    return header, offset


def load_split(path: str):
    """Read one split; returns (header dict with typed fields, complex64 array).

    The array has shape ``(count, n_users, n_delay, n_tx)``.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"failed reading dataset file {path}: {exc}") from exc
    header, offset = _parse_header(raw, path)
    for key in ("n_tx", "n_sub", "n_delay", "n_paths", "n_users", "count", "master_seed"):
        header[key] = int(header[key])
    for key in ("bandwidth_hz", "aod_jitter_rad"):
        header[key] = float(header[key])
    shape = (header["count"], header["n_users"], header["n_delay"], header["n_tx"])
    expected = int(np.prod(shape))
    data = np.frombuffer(raw, dtype=RECORD_DTYPE, offset=offset)
    if data.size != expected:
        raise ValueError(
            f"{path}: payload holds {data.size} values, expected {expected}"
        )
    return header, data.reshape(shape)


def channel_config_from_header(header: dict) -> ChannelConfig:
    return ChannelConfig(
        n_tx=header["n_tx"],
        n_sub=header["n_sub"],
        n_delay=header["n_delay"],
        bandwidth_hz=header["bandwidth_hz"],
        n_paths=header["n_paths"],
        n_users=header["n_users"],
        aod_jitter_rad=header["aod_jitter_rad"],
    )
