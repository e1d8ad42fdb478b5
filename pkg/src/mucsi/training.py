"""End-to-end optimization: sum-MSE loss, warmup schedule, two SNR stages.

Stage 1 draws one uplink SNR per sample group per step from a configured
range (optionally per user); stage 2 trains at a fixed SNR. All randomness
derives from ``(seed, stage)``, so a rerun with the same config and seed
reproduces the parameter trajectory bit for bit on one machine and backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import link as link_mod
from .autodiff import Tensor
from .codec import CodecConfig, ModelParams, decoder_forward, encoder_forward

LINK_MODES = ("awgn", "ideal")


class TrainingDiverged(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step


@dataclass
class TrainConfig:
    epochs_stage1: int = 8
    epochs_stage2: int = 2
    batch_size: int = 50
    warmup_steps: int = 200
    snr_range_db: tuple = (0.0, 20.0)
    snr_fixed_db: float = 10.0
    seed: int = 0
    lr_factor: float = 1.0
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-9
    per_ue_snr: bool = False
    link_mode: str = "awgn"

    def __post_init__(self):
        if self.snr_range_db[0] > self.snr_range_db[1]:
            raise ValueError("snr range low bound exceeds high bound")
        if self.epochs_stage1 < 0 or self.epochs_stage2 < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.batch_size < 1 or self.warmup_steps < 1:
            raise ValueError("batch size and warmup must be positive")
        if self.link_mode not in LINK_MODES:
            raise ValueError(f"unknown link mode {self.link_mode!r}")


@dataclass
class TrainState:
    params: ModelParams
    step: int = 0
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)


def sum_mse_loss(truth, est) -> float:
    """Sum over users of the squared Frobenius reconstruction error."""
    if len(truth) != len(est):
        raise ValueError("truth and estimate lists differ in length")
    total = 0.0
    for t, e in zip(truth, est):
        t = np.asarray(t)
        e = np.asarray(e)
        if t.shape != e.shape:
            raise ValueError(f"shape mismatch {t.shape} vs {e.shape}")
        total += float(np.sum(np.abs(t - e) ** 2))
    return total


def noam_lr(step: int, d_model: int, warmup: int, factor: float = 1.0) -> float:
    """Inverse-sqrt schedule with linear warmup; branches cross at warmup."""
    if step < 1:
        raise ValueError("schedule is defined for steps >= 1")
    return factor * d_model ** -0.5 * min(step ** -0.5, step * warmup ** -1.5)


def adam_step(state: TrainState, cfg: TrainConfig, lr: float):
    t = state.step
    for name, p in state.params.named_parameters():
        g = p.grad
        if g is None:
            continue
        m = state.adam_m.get(name)
        if m is None:
            m = state.adam_m[name] = np.zeros_like(p.data)
        v = state.adam_v.get(name)
        if v is None:
            v = state.adam_v[name] = np.zeros_like(p.data)
        m *= cfg.beta1
        m += (1 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1 - cfg.beta2) * g * g
        m_hat = m / (1 - cfg.beta1 ** t)
        v_hat = v / (1 - cfg.beta2 ** t)
        p.data -= lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)


def group_loss(params: ModelParams, cfg: CodecConfig, tokens: np.ndarray,
               snr_db, unit_noise, link_mode: str = "awgn"):
    """Forward one batch of groups; returns (scalar loss Tensor, est tokens).

    ``tokens`` is (batch, n_users, n_tx, token_width); ``snr_db`` a scalar,
    (batch,) or (batch, n_users) array; ``unit_noise`` standard normal of
    shape (batch, n_users, k) or None for a noiseless analog link.
    """
    batch, n_users = tokens.shape[:2]
    vbars = []
    for m in range(n_users):
        v = encoder_forward(Tensor(tokens[:, m]), params, cfg)
        if link_mode == "ideal":
            vbars.append(v)
            continue
        snr = np.asarray(snr_db, dtype=np.float64)
        snr_m = snr[..., m] if snr.ndim == 2 else snr
        noise_m = None if unit_noise is None else unit_noise[:, m]
        vbars.append(link_mod.transmit_tensor(v, snr_m, noise_m))
    est = decoder_forward(vbars, params, cfg)
    loss = None
    for m in range(n_users):
        diff = ad.sub(est[m], Tensor(tokens[:, m]))
        term = ad.scale(ad.reduce_sum(ad.mul(diff, diff)), 1.0 / batch)
        loss = term if loss is None else ad.add(loss, term)
    return loss, est


def _stage_rngs(seed: int, stage: int):
    root = np.random.SeedSequence((int(seed), int(stage)))
    order_ss, snr_ss, noise_ss = root.spawn(3)
    gen = lambda ss: np.random.Generator(np.random.PCG64(ss))
    return gen(order_ss), gen(snr_ss), gen(noise_ss)


def run_stage(state: TrainState, tokens: np.ndarray, cfg: CodecConfig,
              tcfg: TrainConfig, stage: int, epochs: int,
              epoch_callback=None) -> TrainState:
    """Shared loop for both stages; stage picks the SNR policy."""
    n_samples, n_users = tokens.shape[:2]
    rng_order, rng_snr, rng_noise = _stage_rngs(tcfg.seed, stage)
    lo, hi = tcfg.snr_range_db
    for _ in range(epochs):
        order = rng_order.permutation(n_samples)
        epoch_losses = []
        for start in range(0, n_samples, tcfg.batch_size):
            idx = order[start:start + tcfg.batch_size]
            batch = tokens[idx]
            if stage == 1:
                shape = (len(idx), n_users) if tcfg.per_ue_snr else (len(idx),)
                snr = rng_snr.uniform(lo, hi, size=shape)
            else:
                snr = np.full(len(idx), tcfg.snr_fixed_db)
            if tcfg.link_mode == "ideal":
                noise = None
            else:
                noise = rng_noise.standard_normal((len(idx), n_users, cfg.k_feedback))
            state.params.zero_grad()
            loss, _ = group_loss(
                state.params, cfg, batch, snr, noise, tcfg.link_mode
            )
            if not math.isfinite(loss.item()):
                raise TrainingDiverged(state.step + 1)
            ad.backward(loss)
            state.step += 1
            lr = noam_lr(state.step, cfg.d_model, tcfg.warmup_steps, tcfg.lr_factor)
            adam_step(state, tcfg, lr)
            epoch_losses.append(loss.item())
        if epoch_callback is not None:
            epoch_callback(state, float(np.mean(epoch_losses)))
    return state


def train_stage1(state: TrainState, tokens: np.ndarray, cfg: CodecConfig,
                 tcfg: TrainConfig, epoch_callback=None) -> TrainState:
    """Pretrain with the uplink SNR drawn per group from the configured range."""
    return run_stage(state, tokens, cfg, tcfg, stage=1,
                     epochs=tcfg.epochs_stage1, epoch_callback=epoch_callback)


def train_stage2(state: TrainState, tokens: np.ndarray, cfg: CodecConfig,
                 tcfg: TrainConfig, epoch_callback=None) -> TrainState:
    """Fine-tune at the fixed deployment SNR."""
    return run_stage(state, tokens, cfg, tcfg, stage=2,
                     epochs=tcfg.epochs_stage2, epoch_callback=epoch_callback)


def eval_unit_noise(eval_seed: int, n_samples: int, n_users: int, k: int) -> np.ndarray:
    """Frozen per-sample noise draws shared by every sweep cell.

    Depends only on (eval_seed, sample index), never on the model under
    test, so variant comparisons see identical noise realizations.
    """
    out = np.empty((n_samples, n_users, k))
    for s in range(n_samples):
        ss = np.random.SeedSequence(int(eval_seed), spawn_key=(int(s),))
        out[s] = np.random.Generator(np.random.PCG64(ss)).standard_normal((n_users, k))
    return out


def evaluate_nmse(params: ModelParams, cfg: CodecConfig, tokens: np.ndarray,
                  snr_db: float, eval_seed: int, link_mode: str = "awgn",
                  batch_size: int = 200, unit_noise: np.ndarray | None = None) -> float:
    """Mean over samples and users of |H - Hhat|^2_F / |H|^2_F (linear)."""
    n_samples, n_users = tokens.shape[:2]
    if unit_noise is None and link_mode == "awgn":
        unit_noise = eval_unit_noise(eval_seed, n_samples, n_users, cfg.k_feedback)
    ratios = []
    for start in range(0, n_samples, batch_size):
        batch = tokens[start:start + batch_size]
        noise = None if unit_noise is None else unit_noise[start:start + batch_size]
        with ad.no_grad():
            _, est = group_loss(params, cfg, batch, snr_db, noise, link_mode)
        for m in range(n_users):
            diff = est[m].data - batch[:, m]
            err = np.sum(diff ** 2, axis=(-2, -1))
            ref = np.sum(batch[:, m] ** 2, axis=(-2, -1))
            ratios.append(err / ref)
    return float(np.mean(np.concatenate(ratios)))
