"""Shared test utilities: finite-difference oracle and brute-force transforms."""

import numpy as np

from mucsi import autodiff as ad


def central_diff(build_loss, tensor, index, step=1e-5):
    """Two-sided finite difference of a scalar loss wrt one parameter entry."""
    flat = tensor.data.ravel()
    orig = flat[index]
    flat[index] = orig + step
    plus = build_loss().item()
    flat[index] = orig - step
    minus = build_loss().item()
    flat[index] = orig
    return (plus - minus) / (2.0 * step)


def max_grad_rel_error(build_loss, named_tensors, rng, entries_per_tensor=None,
                       step=1e-5):
    """Worst relative error between autodiff and central differences.

    ``build_loss`` must rebuild the forward pass from the tensors' current
    data. Checks every entry unless ``entries_per_tensor`` caps the sample.
    """
    loss = build_loss()
    for _, t in named_tensors:
        t.zero_grad()
    ad.backward(loss)
    worst = 0.0
    for _, t in named_tensors:
        size = t.data.size
        if entries_per_tensor is None or entries_per_tensor >= size:
            indices = range(size)
        else:
            indices = rng.choice(size, size=entries_per_tensor, replace=False)
        grad = t.grad.ravel() if t.grad is not None else np.zeros(size)
        for i in indices:
            fd = central_diff(build_loss, t, i, step)
            rel = abs(fd - grad[i]) / max(abs(fd), abs(grad[i]), 1e-8)
            worst = max(worst, rel)
    return worst


def random_weighted_sum(rng, shape):
    """A fixed random linear functional; keeps block outputs non-degenerate."""
    weights = ad.Tensor(rng.standard_normal(shape))

    def apply(out):
        return ad.reduce_sum(ad.mul(out, weights))

    return apply


def unitary_dft(n):
    """Explicit DFT matrix with 1/sqrt(n) scaling (oracle, no np.fft)."""
    j, k = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    return np.exp(-2j * np.pi * j * k / n) / np.sqrt(n)


def brute_force_angle_delay(h, n_delay):
    """Matrix-product version of the sparse-domain transform (oracle)."""
    n_sub, n_tx = h.shape
    f_delay = unitary_dft(n_sub).conj()   # +j exponent: small delays lead
    f_angle = unitary_dft(n_tx)
    return (f_delay @ h @ f_angle.conj().T)[:n_delay, :]
