"""Analog feedback link: symbol mapping, power normalization, AWGN.

SNR is average symbol power over the noise power N0 = 10**(-snr_db/10),
with unit average symbol power after normalization. Noise is drawn as an
interleaved real stream (two reals per complex symbol, each with variance
N0/2), which keeps the complex-facing functions here and the differentiable
real-domain path in :func:`transmit_tensor` drawing identical realizations
from the same generator state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class LinkConfig:
    snr_db: float
    seed: int = 0

    def __post_init__(self):
        if np.isnan(self.snr_db):
            raise ValueError("snr_db must not be NaN")


def noise_power(snr_db) -> float:
    """N0 under unit signal power; snr_db=inf gives an exact no-noise link."""
    return 10.0 ** (-np.asarray(snr_db, dtype=np.float64) / 10.0)


def real_to_complex(v: np.ndarray) -> np.ndarray:
    """Pair consecutive reals into symbols: s_j = v[2j] + 1j*v[2j+1]."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] % 2 != 0:
        raise ValueError("real vector length must be even")
    return v[..., 0::2] + 1j * v[..., 1::2]


def complex_to_real(s: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`real_to_complex`."""
    s = np.asarray(s, dtype=np.complex128)
    out = np.empty(s.shape[:-1] + (2 * s.shape[-1],), dtype=np.float64)
    out[..., 0::2] = s.real
    out[..., 1::2] = s.imag
    return out


def normalize_power(s: np.ndarray):
    """Scale to unit mean squared magnitude; returns (normalized, scale).

    The scale is returned for analysis only, it is never transmitted.
    """
    s = np.asarray(s, dtype=np.complex128)
    mean_power = np.mean(np.abs(s) ** 2, axis=-1, keepdims=True)
    if np.any(mean_power == 0.0):
        raise ValueError("cannot power-normalize a zero symbol vector")
    scale = np.sqrt(mean_power)
    out = s / scale
    if s.ndim == 1:
        return out, float(scale[0])
    return out, scale[..., 0]


def unit_noise_real(rng: np.random.Generator, shape) -> np.ndarray:
    """Standard-normal real stream; consumed two entries per complex symbol."""
    return rng.standard_normal(shape)


def awgn(s: np.ndarray, link: LinkConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Add complex Gaussian noise with per-component variance N0/2."""
    s = np.asarray(s, dtype=np.complex128)
    n0 = noise_power(link.snr_db)
    if n0 == 0.0:
        return s.copy()
    if rng is None:
        rng = np.random.default_rng(link.seed)
    z = unit_noise_real(rng, s.shape[:-1] + (2 * s.shape[-1],))
    noise = (z[..., 0::2] + 1j * z[..., 1::2]) * np.sqrt(n0 / 2.0)
    return s + noise


def transmit_tensor(v: Tensor, snr_db, unit_noise: np.ndarray | None) -> Tensor:
    """Differentiable uplink on the real vector: normalize, add scaled noise.

    ``v`` is (..., k) real; its complex image has mean symbol power
    2*mean(v**2), so dividing by sqrt of that equals the complex-domain power
    normalization exactly. ``unit_noise`` is a standard-normal array of v's
    shape (treated as a constant for gradients); pass None for a noiseless
    link. ``snr_db`` may be a scalar or an array broadcastable over the
    leading axes.
    """
    mean_sq = ad.reduce_mean(ad.mul(v, v), axis=-1, keepdims=True)
    norm = ad.div(v, ad.sqrt(ad.scale(mean_sq, 2.0)))
    if unit_noise is None:
        return norm
    sigma = np.sqrt(noise_power(snr_db) / 2.0)
    sigma = np.broadcast_to(np.asarray(sigma)[..., None], v.shape[:-1] + (1,))
    return ad.add(norm, Tensor(unit_noise * sigma))
