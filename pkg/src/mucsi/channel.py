"""Correlated multi-user multipath channel generation.

Shape conventions (plain complex ndarrays throughout):

* spatial-frequency CSI: ``(n_sub, n_tx)``, row k = subcarrier k (0-based)
* sparse-domain CSI:     ``(n_delay, n_tx)``, unit Frobenius norm once
  normalized; obtained by a unitary inverse-DFT along subcarriers (so small
  delays land in the leading rows) and a unitary conjugate-DFT across the
  array, then keeping the first ``n_delay`` rows
* user group:            ``(n_users, n_delay, n_tx)`` from one shared
  scatterer draw

Correlation model: every user in a group shares one draw of path delays and
departure angles; per-user angles get a small independent jitter and gains
are independent CN(0, 1), which reproduces the similar-support /
different-amplitude structure of co-located users. Delays are drawn on the
integer tap grid so the delay-domain truncation is near-lossless; fractional
delays would leak several percent of energy into the cut rows through the
periodic sinc sidelobes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend

# generated departure angles stay in (-pi/3, pi/3); keeps steering vectors
# well separated on the array's angle grid
AOD_RANGE = np.pi / 3


class DegenerateSampleError(ValueError):
    """Raised when a zero-energy sample cannot be normalized."""


@dataclass
class ChannelConfig:
    n_tx: int = 16
    n_sub: int = 64
    n_delay: int = 16
    bandwidth_hz: float = 20e6
    n_paths: int = 6
    n_users: int = 2
    aod_jitter_rad: float = 0.02

    def __post_init__(self):
        if min(self.n_tx, self.n_sub, self.n_delay) < 1:
            raise ValueError("antenna/subcarrier/delay counts must be positive")
        if self.n_delay > self.n_sub:
            raise ValueError("delay truncation cannot exceed the subcarrier count")
        if self.n_paths < 1:
            raise ValueError("at least one multipath component required")
        if self.n_users < 1:
            raise ValueError("at least one user required")
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if self.aod_jitter_rad < 0:
            raise ValueError("angle jitter must be non-negative")


@dataclass
class PathSet:
    """Gains, delays (in samples, i.e. tau * f_s) and AoDs of one user's paths."""

    gains: np.ndarray
    delays: np.ndarray
    aods: np.ndarray

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=np.complex128)
        self.delays = np.asarray(self.delays, dtype=np.float64)
        self.aods = np.asarray(self.aods, dtype=np.float64)
        if not (len(self.gains) == len(self.delays) == len(self.aods)):
            raise ValueError("gains, delays and aods must share one length")

    @property
    def n_paths(self) -> int:
        return len(self.gains)


def steering_vector(phi: float, n_tx: int) -> np.ndarray:
    """Half-wavelength ULA response: element i = exp(-j*pi*i*sin(phi))."""
    if n_tx < 1:
        raise ValueError("antenna count must be positive")
    idx = np.arange(n_tx)
    return np.exp(-1j * np.pi * idx * np.sin(phi))


def synthesize_channel(paths: PathSet, cfg: ChannelConfig) -> np.ndarray:
    """Sum-of-paths spatial-frequency CSI, shape (n_sub, n_tx).

    Row k = sqrt(n_tx/L) * sum_l gain_l * exp(-2j*pi*k*delay_l/n_sub)
    * steering(aod_l).
    """
    if paths.n_paths == 0:
        raise ValueError("path set is empty")
    h = backend.multipath_csi(
        paths.gains[None, :], paths.delays[None, :], paths.aods[None, :],
        cfg.n_tx, cfg.n_sub,
    )
    return h[0]


def synthesize_group(path_sets, cfg: ChannelConfig) -> np.ndarray:
    """Stacked synthesis for a list of path sets, shape (len, n_sub, n_tx)."""
    if any(p.n_paths == 0 for p in path_sets):
        raise ValueError("path set is empty")
    gains = np.stack([p.gains for p in path_sets])
    delays = np.stack([p.delays for p in path_sets])
    aods = np.stack([p.aods for p in path_sets])
    return backend.multipath_csi(gains, delays, aods, cfg.n_tx, cfg.n_sub)


def to_angle_delay(h: np.ndarray, n_delay: int) -> np.ndarray:
    """Unitary transform to the sparse domain, truncated to n_delay rows.

    Works on (..., n_sub, n_tx) stacks. With ``n_delay == n_sub`` the
    transform is energy preserving.
    """
    n_sub, n_tx = h.shape[-2:]
    if n_delay > n_sub:
        raise ValueError("n_delay exceeds the subcarrier count")
    g = np.fft.ifft(h, axis=-2) * np.sqrt(n_sub)
    g = np.fft.ifft(g, axis=-1) * np.sqrt(n_tx)
    return g[..., :n_delay, :]


def expected_sparse_bin(delay: float, aod: float, n_tx: int, n_sub: int):
    """(row, col) where a single on-grid path concentrates after the transform."""
    row = int(round(delay)) % n_sub
    col = int(round(np.sin(aod) * n_tx / 2.0)) % n_tx
    return row, col


def generate_group_paths(cfg: ChannelConfig, rng: np.random.Generator):
    """One shared scatterer draw, jittered per user.

    Delays are a single draw of integer taps in [0, n_delay), AoDs a single
    uniform draw over (-pi/3, pi/3); each user gets the shared delays, the
    shared AoDs plus independent uniform jitter, and independent CN(0, 1)
    gains.
    """
    delays = rng.integers(0, cfg.n_delay, size=cfg.n_paths).astype(np.float64)
    aods = rng.uniform(-AOD_RANGE, AOD_RANGE, size=cfg.n_paths)
    users = []
    for _ in range(cfg.n_users):
        jitter = rng.uniform(
            -cfg.aod_jitter_rad, cfg.aod_jitter_rad, size=cfg.n_paths
        )
        gains = (
            rng.standard_normal(cfg.n_paths)
            + 1j * rng.standard_normal(cfg.n_paths)
        ) / np.sqrt(2.0)
        users.append(PathSet(gains=gains, delays=delays.copy(), aods=aods + jitter))
    return users


def normalize_sample(h: np.ndarray) -> np.ndarray:
    """Scale to unit Frobenius norm; zero input is a degenerate sample."""
    norm = np.linalg.norm(h)
    if norm == 0.0:
        raise DegenerateSampleError("zero-energy CSI sample")
    return h / norm


def generate_group(cfg: ChannelConfig, rng: np.random.Generator) -> np.ndarray:
    """One normalized multi-user sample, shape (n_users, n_delay, n_tx)."""
    while True:
        path_sets = generate_group_paths(cfg, rng)
        spatial = synthesize_group(path_sets, cfg)
        sparse = to_angle_delay(spatial, cfg.n_delay)
        norms = np.linalg.norm(sparse, axis=(-2, -1))
        if np.all(norms > 0):
            return sparse / norms[:, None, None]
        # degenerate draw (all gains zero): regenerate from the same stream


def support_overlap(a: np.ndarray, b: np.ndarray, n_top: int, widen: int = 2) -> float:
    """Fraction of each matrix's top bins found in the other's support.

    A bin is a flattened (delay row, angle column) index. Each matrix's
    ``n_top`` strongest bins are checked against the other's ``widen *
    n_top`` strongest, symmetrized. The widening makes the metric respond
    to support shifts (angle jitter) rather than to the users' independent
    gain magnitudes reordering their own peaks.
    """

    def top(x, count):
        return set(np.argpartition(np.abs(x).ravel(), -count)[-count:].tolist())

    ta, tb = top(a, n_top), top(b, n_top)
    wa, wb = top(a, widen * n_top), top(b, widen * n_top)
    return 0.5 * (len(ta & wb) + len(tb & wa)) / float(n_top)
