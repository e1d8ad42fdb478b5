"""Separate source-channel coding comparator.

Uniform mid-rise quantization of encoder outputs, a Bernoulli bit-flip
channel standing in for a coded modem, and symbol-overhead accounting.
Channel quality enters through a user-supplied snr_db -> bit-error-rate
table, which is what produces the cliff behaviour of digital feedback.

Bits are uint8 arrays of 0/1 values, most significant bit first within each
value's q-bit group.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class QuantizerConfig:
    bits: int
    clip_lo: float
    clip_hi: float

    def __post_init__(self):
        if not 1 <= self.bits <= 16:
            raise ValueError("quantizer bits must be in 1..16")
        if not self.clip_lo < self.clip_hi:
            raise ValueError("clip_lo must be below clip_hi")

    @property
    def n_levels(self) -> int:
        return 1 << self.bits

    @property
    def step(self) -> float:
        return (self.clip_hi - self.clip_lo) / self.n_levels


@dataclass
class SsccLinkConfig:
    code_rate: float
    constellation_points: int
    ber: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.code_rate <= 1.0:
            raise ValueError("code rate must be in (0, 1]")
        if self.constellation_points < 2:
            raise ValueError("need at least two constellation points")
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError("bit error rate must be in [0, 1]")

    @property
    def bits_per_symbol(self) -> float:
        return self.code_rate * math.log2(self.constellation_points)


def quantize_codes(v: np.ndarray, qc: QuantizerConfig) -> np.ndarray:
    """Clip to the quantizer range and map to level indices 0..2**q-1."""
    v = np.clip(np.asarray(v, dtype=np.float64), qc.clip_lo, qc.clip_hi)
    codes = np.floor((v - qc.clip_lo) / qc.step).astype(np.int64)
    return np.clip(codes, 0, qc.n_levels - 1)


def codes_to_values(codes: np.ndarray, qc: QuantizerConfig) -> np.ndarray:
    """Level centers of a mid-rise quantizer."""
    return qc.clip_lo + (np.asarray(codes, dtype=np.float64) + 0.5) * qc.step


def codes_to_bits(codes: np.ndarray, q: int) -> np.ndarray:
    shifts = np.arange(q - 1, -1, -1)
    bits = (np.asarray(codes, dtype=np.int64)[:, None] >> shifts) & 1
    return bits.astype(np.uint8).ravel()


def bits_to_codes(bits: np.ndarray, q: int) -> np.ndarray:
    bits = np.asarray(bits)
    if bits.size % q != 0:
        raise ValueError(f"bit stream length {bits.size} not divisible by {q}")
    weights = 1 << np.arange(q - 1, -1, -1)
    return (bits.reshape(-1, q).astype(np.int64) * weights).sum(axis=1)


def quantize(v: np.ndarray, qc: QuantizerConfig) -> np.ndarray:
    """Uniform quantization to a bit stream of len(v) * q bits."""
    return codes_to_bits(quantize_codes(v, qc), qc.bits)


def dequantize(bits: np.ndarray, qc: QuantizerConfig) -> np.ndarray:
    """Bit stream back to level-center values; exact inverse on codewords."""
    return codes_to_values(bits_to_codes(bits, qc.bits), qc)


def overhead_symbols(b: int, q: int, r: float, a: int) -> int:
    """Channel symbols needed to feed back b values at q bits each.

    (b*q) / (r*log2(a)), rounded up; a tiny slack absorbs float
    representation error so exact ratios stay exact.
    """
    if b <= 0 or q <= 0 or r <= 0 or a < 2:
        raise ValueError("all overhead parameters must be positive (a >= 2)")
    raw = (b * q) / (r * math.log2(a))
    if not math.isfinite(raw):
        raise ValueError("overhead is not finite")
    return int(math.ceil(raw - 1e-9))


def values_for_overhead(d_k: int, q: int, r: float, a: int) -> int:
    """Largest encoder output length whose overhead fits in d_k symbols."""
    b = int(math.floor(d_k * r * math.log2(a) / q + 1e-9))
    if b < 1:
        raise ValueError(f"overhead {d_k} cannot carry even one {q}-bit value")
    return b


def bit_channel(bits: np.ndarray, cfg: SsccLinkConfig, rng: np.random.Generator) -> np.ndarray:
    """Flip each bit independently with probability cfg.ber."""
    bits = np.asarray(bits, dtype=np.uint8)
    if cfg.ber == 0.0:
        return bits.copy()
    flips = rng.random(bits.shape) < cfg.ber
    return bits ^ flips.astype(np.uint8)


def calibrate_clip_range(values: np.ndarray, coverage: float = 99.9) -> tuple:
    """Symmetric clip range covering the given percentile of |values|."""
    c = float(np.percentile(np.abs(values), coverage))
    if c == 0.0:
        raise ValueError("cannot calibrate a clip range from all-zero values")
    return -c, c


def sscc_transmit(v: np.ndarray, qc: QuantizerConfig, link: SsccLinkConfig,
                  rng: np.random.Generator) -> np.ndarray:
    """quantize -> bit channel -> dequantize, the digital feedback path."""
    return dequantize(bit_channel(quantize(v, qc), link, rng), qc)


def ber_for_snr(table, snr_db: float) -> float:
    """Piecewise-constant lookup in an ascending (snr_db, ber) table.

    Returns the ber of the highest breakpoint at or below snr_db; queries
    below the first breakpoint use the first entry.
    """
    if not table:
        raise ValueError("empty snr->ber table")
    pairs = sorted((float(s), float(b)) for s, b in table)
    ber = pairs[0][1]
    for snr_break, value in pairs:
        if snr_db >= snr_break:
            ber = value
        else:
            break
    return ber
