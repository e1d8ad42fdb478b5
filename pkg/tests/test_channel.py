import numpy as np
import pytest

from helpers import brute_force_angle_delay
from mucsi import channel
from mucsi.channel import (AOD_RANGE, ChannelConfig, DegenerateSampleError,
                           PathSet, expected_sparse_bin, generate_group,
                           generate_group_paths, normalize_sample,
                           steering_vector, synthesize_channel, to_angle_delay)


def test_steering_broadside_is_all_ones():
    assert np.allclose(steering_vector(0.0, 4), np.ones(4))


def test_steering_endfire_value():
    # exp(-j*pi*sin(pi/2)) = exp(-j*pi) = -1, evaluated directly
    got = steering_vector(np.pi / 2, 2)
    assert np.allclose(got, [1.0, -1.0], atol=1e-12)


def test_steering_norm_is_sqrt_ntx():
    rng = np.random.default_rng(0)
    for phi in rng.uniform(-np.pi / 2, np.pi / 2, size=10):
        assert np.linalg.norm(steering_vector(phi, 8)) == pytest.approx(np.sqrt(8))


def test_steering_rejects_bad_count():
    with pytest.raises(ValueError):
        steering_vector(0.0, 0)


def test_synthesize_single_path_broadside():
    # sqrt(4/1) * 1 * exp(0) * ones(4) on every subcarrier row
    cfg = ChannelConfig(n_tx=4, n_sub=8, n_delay=8, n_paths=1, n_users=1)
    paths = PathSet(gains=[1.0], delays=[0.0], aods=[0.0])
    h = synthesize_channel(paths, cfg)
    assert h.shape == (8, 4)
    assert np.allclose(h, 2.0 * np.ones((8, 4)))


def test_synthesize_zero_gains_zero_output():
    cfg = ChannelConfig(n_tx=4, n_sub=8, n_delay=8, n_paths=2, n_users=1)
    paths = PathSet(gains=[0.0, 0.0], delays=[1.0, 3.0], aods=[0.1, -0.2])
    assert np.allclose(synthesize_channel(paths, cfg), 0.0)


def test_synthesize_linear_in_gains():
    cfg = ChannelConfig(n_tx=4, n_sub=8, n_delay=8, n_paths=3, n_users=1)
    rng = np.random.default_rng(1)
    gains = rng.standard_normal(3) + 1j * rng.standard_normal(3)
    delays = rng.uniform(0, 8, size=3)
    aods = rng.uniform(-1, 1, size=3)
    h1 = synthesize_channel(PathSet(gains, delays, aods), cfg)
    h2 = synthesize_channel(PathSet(3.5 * gains, delays, aods), cfg)
    assert np.allclose(h2, 3.5 * h1)


def test_synthesize_rejects_empty_path_set():
    cfg = ChannelConfig(n_tx=4, n_sub=8, n_delay=8, n_paths=1, n_users=1)
    empty = PathSet(gains=[], delays=[], aods=[])
    with pytest.raises(ValueError):
        synthesize_channel(empty, cfg)


def test_path_set_length_mismatch_rejected():
    with pytest.raises(ValueError):
        PathSet(gains=[1.0, 2.0], delays=[0.0], aods=[0.0])


def test_angle_delay_zero_input():
    assert np.allclose(to_angle_delay(np.zeros((8, 4), dtype=complex), 4), 0.0)


def test_angle_delay_unitary_when_untruncated():
    rng = np.random.default_rng(2)
    h = rng.standard_normal((64, 16)) + 1j * rng.standard_normal((64, 16))
    out = to_angle_delay(h, 64)
    assert abs(np.linalg.norm(out) - np.linalg.norm(h)) <= 1e-9 * np.linalg.norm(h)


def test_angle_delay_matches_brute_force_oracle():
    rng = np.random.default_rng(3)
    h = rng.standard_normal((16, 8)) + 1j * rng.standard_normal((16, 8))
    got = to_angle_delay(h, 5)
    want = brute_force_angle_delay(h, 5)
    assert np.allclose(got, want, atol=1e-12)


def test_angle_delay_rejects_overlong_truncation():
    with pytest.raises(ValueError):
        to_angle_delay(np.zeros((8, 4), dtype=complex), 9)


def test_single_on_grid_path_concentrates():
    # brute-force transform of a one-path channel: all energy in one bin
    cfg = ChannelConfig(n_tx=8, n_sub=8, n_delay=8, n_paths=1, n_users=1)
    phi = np.arcsin(2 * 3 / 8)
    paths = PathSet(gains=[1.0 + 0.5j], delays=[2.0], aods=[phi])
    sparse = brute_force_angle_delay(synthesize_channel(paths, cfg), 8)
    peak = np.max(np.abs(sparse)) ** 2
    assert peak / np.sum(np.abs(sparse) ** 2) >= 0.99


def test_on_grid_argmax_exhaustive_8x8():
    cfg = ChannelConfig(n_tx=8, n_sub=8, n_delay=8, n_paths=1, n_users=1)
    for delay in range(8):
        for bin_idx in range(8):
            sin_phi = 2 * (bin_idx if bin_idx < 4 else bin_idx - 8) / 8
            phi = np.arcsin(sin_phi)
            paths = PathSet(gains=[1.0], delays=[float(delay)], aods=[phi])
            sparse = to_angle_delay(synthesize_channel(paths, cfg), 8)
            got = np.unravel_index(np.argmax(np.abs(sparse)), sparse.shape)
            assert got == expected_sparse_bin(delay, phi, 8, 8)
            peak = np.abs(sparse[got]) ** 2
            assert peak / np.sum(np.abs(sparse) ** 2) >= 0.99


def test_group_paths_share_structure():
    cfg = ChannelConfig(n_users=2, aod_jitter_rad=0.0)
    users = generate_group_paths(cfg, np.random.default_rng(4))
    assert len(users) == 2
    assert np.array_equal(users[0].delays, users[1].delays)
    assert np.array_equal(users[0].aods, users[1].aods)
    assert not np.array_equal(users[0].gains, users[1].gains)


def test_group_paths_single_user():
    cfg = ChannelConfig(n_users=1)
    users = generate_group_paths(cfg, np.random.default_rng(5))
    assert len(users) == 1
    assert users[0].n_paths == cfg.n_paths


def test_group_paths_jitter_bounded_and_delays_in_window():
    cfg = ChannelConfig(n_users=3, aod_jitter_rad=0.05)
    rng = np.random.default_rng(6)
    for _ in range(20):
        users = generate_group_paths(cfg, rng)
        base = users[0]
        for u in users:
            assert np.all(u.delays >= 0) and np.all(u.delays < cfg.n_delay)
            assert np.all(np.abs(u.aods - base.aods) <= 2 * cfg.aod_jitter_rad)


def test_support_overlap_with_default_jitter():
    cfg = ChannelConfig(n_users=2)
    rng = np.random.default_rng(7)
    overlaps = []
    for _ in range(100):
        group = generate_group(cfg, rng)
        overlaps.append(channel.support_overlap(group[0], group[1], cfg.n_paths))
    assert np.mean(overlaps) > 0.8


def test_normalize_sample():
    rng = np.random.default_rng(8)
    h = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    h *= 5.0 / np.linalg.norm(h)
    out = normalize_sample(h)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
    again = normalize_sample(out)
    assert np.allclose(again, out, atol=1e-12)


def test_normalize_zero_is_degenerate():
    with pytest.raises(DegenerateSampleError):
        normalize_sample(np.zeros((4, 4), dtype=complex))


def test_truncation_retains_energy():
    # delays come from the truncation window, so the kept rows hold the lot
    cfg = ChannelConfig(n_tx=8, n_sub=64, n_delay=16, n_paths=4, n_users=1)
    rng = np.random.default_rng(9)
    kept = []
    for _ in range(1000):
        spatial = channel.synthesize_group(generate_group_paths(cfg, rng), cfg)
        full = to_angle_delay(spatial, cfg.n_sub)
        total = np.sum(np.abs(full) ** 2)
        kept.append(np.sum(np.abs(full[:, :cfg.n_delay, :]) ** 2) / total)
    assert np.mean(kept) >= 0.999


def test_generate_group_deterministic():
    cfg = ChannelConfig(n_users=2)
    a = generate_group(cfg, np.random.default_rng(10))
    b = generate_group(cfg, np.random.default_rng(10))
    assert np.array_equal(a, b)


def test_generated_aods_within_range():
    cfg = ChannelConfig(n_users=2, aod_jitter_rad=0.02)
    rng = np.random.default_rng(11)
    for _ in range(50):
        for u in generate_group_paths(cfg, rng):
            assert np.all(np.abs(u.aods) < AOD_RANGE + cfg.aod_jitter_rad)


def test_config_validation():
    with pytest.raises(ValueError):
        ChannelConfig(n_delay=65, n_sub=64)
    with pytest.raises(ValueError):
        ChannelConfig(n_paths=0)
    with pytest.raises(ValueError):
        ChannelConfig(n_users=0)
