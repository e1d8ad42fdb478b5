import csv
import os

import numpy as np
import pytest

from mucsi import evaluate as ev
from mucsi.channel import ChannelConfig
from mucsi.codec import CodecConfig, ModelParams, save_checkpoint
from mucsi.dataset import generate_dataset, split_path
from mucsi.evaluate import SweepCell, emit_plot_data, nmse, run_sweep, to_db

TOY = CodecConfig(n_tx=4, n_delay=4, k_feedback=8, d_model=8, heads=2,
                  l1=1, l2=1, l3=1, variant="rca")
TOY_CHANNEL = ChannelConfig(n_tx=4, n_sub=8, n_delay=4, n_paths=2, n_users=2)


def brute_force_nmse(truth, est):
    ratios = []
    for t, e in zip(truth, est):
        num = 0.0
        den = 0.0
        for r in range(t.shape[0]):
            for c in range(t.shape[1]):
                diff = t[r, c] - e[r, c]
                num += diff.real ** 2 + diff.imag ** 2
                den += t[r, c].real ** 2 + t[r, c].imag ** 2
        ratios.append(num / den)
    return sum(ratios) / len(ratios)


def test_nmse_exact_reconstruction_is_zero():
    rng = np.random.default_rng(0)
    h = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))]
    assert nmse(h, [h[0].copy()]) == 0.0


def test_nmse_zero_estimate_of_unit_truth_is_one():
    h = np.ones((2, 2)) / 2.0 + 0j
    assert nmse([h], [np.zeros_like(h)]) == pytest.approx(1.0)


def test_nmse_averages_user_ratios():
    t = [np.eye(2) + 0j, np.eye(2) + 0j]
    e = [t[0] * (1 - np.sqrt(0.01)), t[1] * (1 - np.sqrt(0.03))]
    assert nmse(t, e) == pytest.approx(0.02, rel=1e-9)


def test_nmse_matches_double_loop_oracle():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        t = [rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
             for _ in range(2)]
        e = [x + 0.1 * rng.standard_normal((3, 4)) for x in t]
        assert abs(nmse(t, e) - brute_force_nmse(t, e)) < 1e-12


def test_nmse_rejects_zero_truth():
    with pytest.raises(ValueError):
        nmse([np.zeros((2, 2), dtype=complex)], [np.ones((2, 2), dtype=complex)])


def test_to_db():
    assert to_db(1.0) == 0.0
    assert to_db(0.01) == pytest.approx(-20.0)
    with pytest.raises(ValueError):
        to_db(0.0)


@pytest.fixture(scope="module")
def sweep_setup(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep")
    data_dir = str(root / "data")
    generate_dataset(TOY_CHANNEL, {"train": 4, "val": 2, "test": 6}, 13, data_dir)
    params = ModelParams(TOY, seed=3)
    ckpt = str(root / "rca_m2_k8.ckpt")
    save_checkpoint(ckpt, params, TOY_CHANNEL, stage=1, step=10, seed=3)
    return data_dir, ckpt, str(root)


def make_cell(data_dir, ckpt, snr=10.0):
    return SweepCell(variant="rca", n_users=2, cr=TOY.compression_ratio,
                     snr_db=snr, checkpoint=ckpt,
                     data_path=split_path(data_dir, "test"))


def test_single_cell_sweep_yields_one_row(sweep_setup):
    data_dir, ckpt, _ = sweep_setup
    rows, failures = run_sweep([make_cell(data_dir, ckpt)], eval_seed=99)
    assert not failures
    assert len(rows) == 1
    row = rows[0]
    assert row["scheme"] == "djscc"
    assert row["n_samples"] == 6
    assert float(row["nmse_linear"]) > 0
    assert row["nmse_zero"] == 0


def test_sweep_rerun_is_identical(sweep_setup, tmp_path):
    data_dir, ckpt, _ = sweep_setup
    cells = [make_cell(data_dir, ckpt, snr) for snr in (0.0, 10.0)]
    out1 = str(tmp_path / "a.csv")
    out2 = str(tmp_path / "b.csv")
    run_sweep(cells, eval_seed=99, out_csv=out1)
    run_sweep(cells, eval_seed=99, out_csv=out2)
    assert open(out1, "rb").read() == open(out2, "rb").read()


def test_missing_checkpoint_fails_cell_but_continues(sweep_setup):
    data_dir, ckpt, root = sweep_setup
    bad = make_cell(data_dir, os.path.join(root, "missing.ckpt"))
    good = make_cell(data_dir, ckpt)
    rows, failures = run_sweep([bad, good], eval_seed=99)
    assert len(rows) == 1
    assert len(failures) == 1
    assert "missing.ckpt" in failures[0][1]


def test_results_csv_schema(sweep_setup, tmp_path):
    data_dir, ckpt, _ = sweep_setup
    out = str(tmp_path / "res.csv")
    run_sweep([make_cell(data_dir, ckpt)], eval_seed=99, out_csv=out)
    with open(out, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
    assert header == list(ev.CSV_COLUMNS)


def _fake_rows():
    rows = []
    for scheme in ("djscc", "sscc"):
        for snr in (20.0, 0.0, 10.0):
            rows.append({
                "scheme": scheme, "variant": "rca", "n_users": 2,
                "cr": "0.0625", "snr_db": f"{snr:g}",
                "nmse_linear": "1.0e-01", "nmse_db": "-10.0",
                "nmse_zero": 0, "n_samples": 10, "seed": 1,
                "d_model": 8, "heads": 2, "checkpoint": "x.ckpt",
            })
    return rows


def test_emit_plot_data_sorts_and_splits_series(tmp_path):
    paths = emit_plot_data(_fake_rows(), "snr", str(tmp_path))
    assert len(paths) == 2   # one per scheme
    for path in paths:
        with open(path, newline="", encoding="utf-8") as fh:
            got = [float(r["snr_db"]) for r in csv.DictReader(fh)]
        assert got == sorted(got)


def test_emit_plot_data_single_row(tmp_path):
    paths = emit_plot_data(_fake_rows()[:1], "cr", str(tmp_path))
    assert len(paths) == 1
    with open(paths[0], newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 1
    assert "scheme" in rows[0]


def test_emit_plot_data_rejects_empty_and_bad_axis(tmp_path):
    with pytest.raises(ValueError):
        emit_plot_data([], "snr", str(tmp_path))
    with pytest.raises(ValueError):
        emit_plot_data(_fake_rows(), "bogus", str(tmp_path))
