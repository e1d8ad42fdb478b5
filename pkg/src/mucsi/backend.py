"""Kernel dispatch: numba-accelerated hot loops with a pure-numpy fallback.

The backend is selected by the ``MUCSI_BACKEND`` environment variable:

* ``auto`` (default) -- use numba when it is importable, numpy otherwise
* ``numpy``          -- force the vectorized numpy implementations
* ``numba``          -- force the jitted kernels, fail if numba is missing

The choice is resolved lazily on first kernel call and can be overridden
programmatically with :func:`set_backend` (used by the benchmark script and
the equivalence tests). Both implementations compute the same quantities;
results may differ by a few ulps because summation order differs, so the
active backend is part of the reproducibility envelope.
"""

from __future__ import annotations

import os

import numpy as np

ENV_VAR = "MUCSI_BACKEND"
BACKENDS = ("numpy", "numba")

_active = None
_impl = None


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend(mode: str) -> str:
    """Map an env-flag value to a concrete backend name."""
    mode = mode.lower()
    if mode == "auto":
        return "numba" if numba_available() else "numpy"
    if mode == "numpy":
        return "numpy"
    if mode == "numba":
        if not numba_available():
            raise RuntimeError(f"{ENV_VAR}=numba but numba is not importable")
        return "numba"
    raise ValueError(f"unknown {ENV_VAR} value {mode!r}, expected auto|numpy|numba")


def active_backend() -> str:
    global _active
    if _active is None:
        _active = resolve_backend(os.environ.get(ENV_VAR, "auto"))
    return _active


def set_backend(name: str | None) -> None:
    """Force a backend (``numpy``/``numba``) or reset to env resolution with None."""
    global _active, _impl
    if name is not None and name not in BACKENDS:
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not numba_available():
        raise RuntimeError("numba backend requested but numba is not importable")
    _active = name
    _impl = None


def _kernels():
    global _impl
    if _impl is None:
        if active_backend() == "numba":
            from . import _kernels_numba as mod
        else:
            mod = _NUMPY_KERNELS
        _impl = mod
    return _impl


# ---------------------------------------------------------------------------
# numpy fallbacks
# ---------------------------------------------------------------------------


def _softmax_rows_np(x):
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _softmax_rows_vjp_np(y, gy):
    dot = (y * gy).sum(axis=1, keepdims=True)
    return y * (gy - dot)


def _layernorm_rows_np(x, gain, bias, eps):
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv_std[:, None]
    return gain * xhat + bias, xhat, inv_std


def _layernorm_rows_vjp_np(gy, xhat, inv_std, gain):
    gh = gy * gain
    m1 = gh.mean(axis=1, keepdims=True)
    m2 = (gh * xhat).mean(axis=1, keepdims=True)
    gx = inv_std[:, None] * (gh - m1 - xhat * m2)
    return gx, (gy * xhat).sum(axis=0), gy.sum(axis=0)


def _multipath_csi_np(gains, delays, aods, n_tx, n_sub):
    n_paths = gains.shape[1]
    k = np.arange(n_sub)
    ant = np.arange(n_tx)
    # (S, n_sub, L) subcarrier phase ramps, (S, L, n_tx) steering rows
    phase = np.exp(-2j * np.pi / n_sub * k[None, :, None] * delays[:, None, :])
    steer = np.exp(-1j * np.pi * np.sin(aods)[:, :, None] * ant[None, None, :])
    h = (phase * gains[:, None, :]) @ steer
    return np.sqrt(n_tx / n_paths) * h


class _NumpyKernels:
    softmax_rows = staticmethod(_softmax_rows_np)
    softmax_rows_vjp = staticmethod(_softmax_rows_vjp_np)
    layernorm_rows = staticmethod(_layernorm_rows_np)
    layernorm_rows_vjp = staticmethod(_layernorm_rows_vjp_np)
    multipath_csi = staticmethod(_multipath_csi_np)


_NUMPY_KERNELS = _NumpyKernels()


# ---------------------------------------------------------------------------
# public kernel API
# ---------------------------------------------------------------------------


def _rows(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def softmax_rows(x):
    """Row-wise softmax of a (rows, cols) float64 array."""
    return _kernels().softmax_rows(_rows(x))


def softmax_rows_vjp(y, gy):
    """Backward of :func:`softmax_rows` given its output ``y``."""
    return _kernels().softmax_rows_vjp(_rows(y), _rows(gy))


def layernorm_rows(x, gain, bias, eps):
    """Row standardization with affine output; returns (y, xhat, inv_std)."""
    return _kernels().layernorm_rows(_rows(x), _rows(gain), _rows(bias), float(eps))


def layernorm_rows_vjp(gy, xhat, inv_std, gain):
    """Backward of :func:`layernorm_rows`; returns (gx, ggain, gbias)."""
    return _kernels().layernorm_rows_vjp(
        _rows(gy), _rows(xhat), _rows(inv_std), _rows(gain)
    )


def multipath_csi(gains, delays, aods, n_tx, n_sub):
    """Sum-of-paths spatial-frequency CSI for a stack of path sets.

    Args:
        gains: complex (n_samples, n_paths) path gains.
        delays: (n_samples, n_paths) delays in samples (tau * f_s).
        aods: (n_samples, n_paths) departure angles in radians.
        n_tx: antenna count.
        n_sub: subcarrier count.

    Returns:
        complex128 (n_samples, n_sub, n_tx) channel matrices, scaled by
        sqrt(n_tx / n_paths).
    """
    gains = np.ascontiguousarray(gains, dtype=np.complex128)
    delays = np.ascontiguousarray(delays, dtype=np.float64)
    aods = np.ascontiguousarray(aods, dtype=np.float64)
    return _kernels().multipath_csi(gains, delays, aods, int(n_tx), int(n_sub))
