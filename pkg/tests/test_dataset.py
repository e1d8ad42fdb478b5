import hashlib
import os

import numpy as np
import pytest

from mucsi.channel import ChannelConfig, generate_group
from mucsi.dataset import (channel_config_from_header, generate_dataset,
                           load_split, sample_rng, split_path)

CFG = ChannelConfig(n_tx=4, n_sub=16, n_delay=4, n_paths=3, n_users=2)
COUNTS = {"train": 2, "val": 1, "test": 1}


def test_generation_is_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    generate_dataset(CFG, COUNTS, seed=7, out_dir=str(a))
    generate_dataset(CFG, COUNTS, seed=7, out_dir=str(b))
    for split in ("train", "val", "test"):
        one = (a / f"{split}.dat").read_bytes()
        two = (b / f"{split}.dat").read_bytes()
        assert one == two


def test_records_hold_all_users(tmp_path):
    generate_dataset(CFG, COUNTS, seed=3, out_dir=str(tmp_path))
    header, data = load_split(split_path(str(tmp_path), "train"))
    assert data.shape == (2, 2, 4, 4)
    assert data.dtype == np.dtype("<c8")
    assert header["n_users"] == 2
    assert header["count"] == 2


def test_loaded_data_matches_regenerated_sample(tmp_path):
    generate_dataset(CFG, COUNTS, seed=11, out_dir=str(tmp_path))
    _, data = load_split(split_path(str(tmp_path), "val"))
    regen = generate_group(CFG, sample_rng(11, 1, 0))
    assert np.allclose(data[0], regen.astype(np.complex64))


def test_splits_use_disjoint_seed_subspaces(tmp_path):
    counts = {"train": 20, "val": 20, "test": 20}
    generate_dataset(CFG, counts, seed=5, out_dir=str(tmp_path))
    digests = set()
    total = 0
    for split in ("train", "val", "test"):
        _, data = load_split(split_path(str(tmp_path), split))
        for record in data:
            digests.add(hashlib.md5(record.tobytes()).hexdigest())
            total += 1
    assert len(digests) == total


def test_header_round_trip(tmp_path):
    generate_dataset(CFG, COUNTS, seed=9, out_dir=str(tmp_path))
    header, _ = load_split(split_path(str(tmp_path), "test"))
    assert channel_config_from_header(header) == CFG
    assert header["master_seed"] == 9
    assert header["split"] == "test"


def test_write_failure_reports_path(tmp_path):
    target = tmp_path / "not_a_dir"
    target.write_text("occupied")
    with pytest.raises(OSError) as err:
        generate_dataset(CFG, COUNTS, seed=1, out_dir=str(target / "sub"))
    assert "sub" in str(err.value)


def test_read_failure_reports_path(tmp_path):
    missing = os.path.join(str(tmp_path), "nope.dat")
    with pytest.raises(OSError) as err:
        load_split(missing)
    assert "nope.dat" in str(err.value)


def test_counts_must_be_positive(tmp_path):
    with pytest.raises(ValueError):
        generate_dataset(CFG, {"train": 0, "val": 1, "test": 1}, 1, str(tmp_path))


def test_truncated_payload_detected(tmp_path):
    generate_dataset(CFG, COUNTS, seed=2, out_dir=str(tmp_path))
    path = split_path(str(tmp_path), "train")
    raw = open(path, "rb").read()
    with open(path, "wb") as fh:
        fh.write(raw[:-8])
    with pytest.raises(ValueError):
        load_split(path)
