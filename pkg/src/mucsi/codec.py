"""Per-user encoder, joint multi-user decoder, and parameter handling.

One parameter set serves every user (model size is independent of the group
size). The encoder maps a sparse-domain CSI matrix to k real feedback
values; the decoder expands each user's received vector, refines it with
per-user layers, then runs joint blocks whose flavour is picked by
``CodecConfig.variant``:

* ``rca``               residual cross-attention against the other users' mean
* ``typical_ca``        plain cross-attention against the same aggregate
* ``self_query``        the residual block querying with the user's own tokens
* ``plain_transformer`` self-attention only, no inter-user path (same depth)

Checkpoints are a text header followed by a flat little-endian float64
payload in the canonical parameter order (the registry insertion order, see
``ModelParams``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor
from .channel import ChannelConfig

VARIANTS = ("rca", "plain_transformer", "typical_ca", "self_query")
CROSS_UE_VARIANTS = ("rca", "typical_ca")

CHECKPOINT_MAGIC = "MUCSI-CHECKPOINT v1"
PAYLOAD_DTYPE = np.dtype("<f8")


@dataclass
class CodecConfig:
    n_tx: int
    n_delay: int
    k_feedback: int
    d_model: int = 64
    heads: int = 4
    l1: int = 2
    l2: int = 1
    l3: int = 1
    variant: str = "rca"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.k_feedback < 2 or self.k_feedback % 2 != 0:
            raise ValueError("k_feedback must be even and at least 2")
        if self.l1 < 1 or self.l2 < 1 or self.l3 < 1:
            raise ValueError("layer counts must be positive")
        if self.d_model % self.heads != 0:
            raise ValueError("head count must divide d_model")
        if self.n_tx < 1 or self.n_delay < 1:
            raise ValueError("n_tx and n_delay must be positive")

    @property
    def token_width(self) -> int:
        return 2 * self.n_delay

    @property
    def flat_width(self) -> int:
        return 2 * self.n_delay * self.n_tx

    @property
    def compression_ratio(self) -> float:
        return self.k_feedback / self.flat_width

    @property
    def n_symbols(self) -> int:
        return self.k_feedback // 2

    @property
    def input_scale(self) -> float:
        # unit-norm CSI spreads over flat_width real entries; this brings
        # token entries to unit rms inside the network (undone at the
        # decoder output, so the external contracts stay in CSI units)
        return float(np.sqrt(self.flat_width))


def k_for_compression_ratio(cr: float, n_delay: int, n_tx: int) -> int:
    """Even feedback length closest to cr * (2 * n_delay * n_tx)."""
    return max(2, 2 * int(round(cr * n_delay * n_tx)))


def csi_to_tokens(h: np.ndarray) -> np.ndarray:
    """(..., n_delay, n_tx) complex -> (..., n_tx, 2*n_delay) real tokens.

    Token row t is [Re(column t); Im(column t)].
    """
    h = np.asarray(h)
    re = np.swapaxes(h.real, -1, -2)
    im = np.swapaxes(h.imag, -1, -2)
    return np.concatenate([re, im], axis=-1).astype(np.float64)


def tokens_to_csi(x: np.ndarray) -> np.ndarray:
    """Exact inverse of :func:`csi_to_tokens`."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] % 2 != 0:
        raise ValueError("token width must be even (Re/Im halves)")
    n_delay = x.shape[-1] // 2
    re = np.swapaxes(x[..., :n_delay], -1, -2)
    im = np.swapaxes(x[..., n_delay:], -1, -2)
    return re + 1j * im


class ModelParams:
    """All learnable tensors, built in one canonical order from a seed.

    The registry order defines the checkpoint payload layout:
    encoder embed, encoder layers (attention wq/wk/wv/wo, ln1 gain/bias,
    ffn w1/b1/w2/b2, ln2 gain/bias), encoder output projection, compress FC,
    decoder expand FC, decoder embed, decoder per-user layers, decoder joint
    layers, decoder output projection.
    """

    def __init__(self, cfg: CodecConfig, seed: int):
        self.cfg = cfg
        self.seed = int(seed)
        self._names: list[str] = []
        self._registry: dict[str, Tensor] = {}
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

        d, w, flat, k = cfg.d_model, cfg.token_width, cfg.flat_width, cfg.k_feedback
        self.enc_embed_w = self._add("enc.embed.w", nn.uniform_fan_in(rng, w, (w, d)))
        self.enc_embed_b = self._add("enc.embed.b", nn.uniform_fan_in(rng, w, (d,)))
        self.enc_layers = [
            self._add_layer(f"enc.layer{i}", rng) for i in range(cfg.l1)
        ]
        self.enc_proj_w = self._add("enc.proj.w", nn.uniform_fan_in(rng, d, (d, w)))
        self.enc_proj_b = self._add("enc.proj.b", nn.uniform_fan_in(rng, d, (w,)))
        self.compress_w = self._add(
            "enc.compress.w", nn.uniform_fan_in(rng, flat, (flat, k))
        )
        self.compress_b = self._add("enc.compress.b", nn.uniform_fan_in(rng, flat, (k,)))

        self.expand_w = self._add("dec.expand.w", nn.uniform_fan_in(rng, k, (k, flat)))
        self.expand_b = self._add("dec.expand.b", nn.uniform_fan_in(rng, k, (flat,)))
        self.dec_embed_w = self._add("dec.embed.w", nn.uniform_fan_in(rng, w, (w, d)))
        self.dec_embed_b = self._add("dec.embed.b", nn.uniform_fan_in(rng, w, (d,)))
        self.dec_layers = [
            self._add_layer(f"dec.layer{i}", rng) for i in range(cfg.l2)
        ]
        self.joint_layers = [
            self._add_layer(f"dec.joint{i}", rng) for i in range(cfg.l3)
        ]
        self.dec_proj_w = self._add("dec.proj.w", nn.uniform_fan_in(rng, d, (d, w)))
        self.dec_proj_b = self._add("dec.proj.b", nn.uniform_fan_in(rng, d, (w,)))

        self.pe = Tensor(nn.positional_encoding(cfg.n_tx, d))

    def _add(self, name: str, data: np.ndarray) -> Tensor:
        t = ad.parameter(data)
        self._names.append(name)
        self._registry[name] = t
        return t

    def _add_layer(self, prefix: str, rng) -> nn.LayerParams:
        cfg = self.cfg
        d, d_ff = cfg.d_model, 4 * cfg.d_model
        attn = nn.AttentionParams(
            wq=self._add(f"{prefix}.attn.wq", nn.uniform_fan_in(rng, d, (d, d))),
            wk=self._add(f"{prefix}.attn.wk", nn.uniform_fan_in(rng, d, (d, d))),
            wv=self._add(f"{prefix}.attn.wv", nn.uniform_fan_in(rng, d, (d, d))),
            wo=self._add(f"{prefix}.attn.wo", nn.uniform_fan_in(rng, d, (d, d))),
            heads=cfg.heads,
        )
        return nn.LayerParams(
            attn=attn,
            ln1_gain=self._add(f"{prefix}.ln1.gain", np.ones(d)),
            ln1_bias=self._add(f"{prefix}.ln1.bias", np.zeros(d)),
            ffn_w1=self._add(f"{prefix}.ffn.w1", nn.uniform_fan_in(rng, d, (d, d_ff))),
            ffn_b1=self._add(f"{prefix}.ffn.b1", nn.uniform_fan_in(rng, d, (d_ff,))),
            ffn_w2=self._add(f"{prefix}.ffn.w2", nn.uniform_fan_in(rng, d_ff, (d_ff, d))),
            ffn_b2=self._add(f"{prefix}.ffn.b2", nn.uniform_fan_in(rng, d_ff, (d,))),
            ln2_gain=self._add(f"{prefix}.ln2.gain", np.ones(d)),
            ln2_bias=self._add(f"{prefix}.ln2.bias", np.zeros(d)),
        )

    def named_parameters(self):
        return [(name, self._registry[name]) for name in self._names]

    def n_parameters(self) -> int:
        return sum(t.data.size for _, t in self.named_parameters())

    def zero_grad(self):
        for _, t in self.named_parameters():
            t.zero_grad()

    def payload_bytes(self) -> bytes:
        flat = np.concatenate([t.data.ravel() for _, t in self.named_parameters()])
        return flat.astype(PAYLOAD_DTYPE).tobytes()

    def load_payload_bytes(self, raw: bytes):
        flat = np.frombuffer(raw, dtype=PAYLOAD_DTYPE)
        if flat.size != self.n_parameters():
            raise ValueError(
                f"payload holds {flat.size} values, model has {self.n_parameters()}"
            )
        pos = 0
        for _, t in self.named_parameters():
            n = t.data.size
            t.data = flat[pos:pos + n].reshape(t.data.shape).astype(np.float64)
            pos += n


def count_parameters(params: ModelParams) -> int:
    """Total scalar parameter count; independent of the user count."""
    return params.n_parameters()


# ---------------------------------------------------------------------------
# forward passes (batched over leading axes; params shared across users)
# ---------------------------------------------------------------------------


def encoder_forward(tokens: Tensor, p: ModelParams, cfg: CodecConfig) -> Tensor:
    """(..., n_tx, 2*n_delay) tokens -> (..., k) feedback values."""
    # unit-rms input keeps the CSI comparable to the O(1) positional
    # encoding without saturating the first attention's softmax
    x = ad.matmul(ad.scale(tokens, cfg.input_scale), p.enc_embed_w)
    x = ad.add(ad.add(x, p.enc_embed_b), p.pe)
    for layer in p.enc_layers:
        x = nn.transformer_layer(x, layer)
    x = ad.add(ad.matmul(x, p.enc_proj_w), p.enc_proj_b)
    flat = ad.reshape(x, (*x.shape[:-2], cfg.flat_width))
    return ad.add(ad.matmul(flat, p.compress_w), p.compress_b)


def decoder_forward(vbars, p: ModelParams, cfg: CodecConfig):
    """Per-user received vectors -> per-user reconstructed token matrices."""
    m = len(vbars)
    if m < 1:
        raise ValueError("need at least one received vector")
    if cfg.variant in CROSS_UE_VARIANTS and m < 2:
        raise ValueError(f"variant {cfg.variant!r} needs at least two users")
    xs = []
    for v in vbars:
        f = ad.add(ad.matmul(v, p.expand_w), p.expand_b)
        t = ad.reshape(f, (*f.shape[:-1], cfg.n_tx, cfg.token_width))
        x = ad.add(ad.add(ad.matmul(t, p.dec_embed_w), p.dec_embed_b), p.pe)
        for layer in p.dec_layers:
            x = nn.transformer_layer(x, layer)
        xs.append(x)
    for layer in p.joint_layers:
        if cfg.variant == "plain_transformer":
            xs = [nn.transformer_layer(x, layer) for x in xs]
        elif cfg.variant == "self_query":
            xs = [nn.rca_block(x, x, layer) for x in xs]
        elif cfg.variant == "typical_ca":
            xs = [
                nn.ca_block(x, nn.aggregate_others(xs, i), layer)
                for i, x in enumerate(xs)
            ]
        else:
            xs = [
                nn.rca_block(x, nn.aggregate_others(xs, i), layer)
                for i, x in enumerate(xs)
            ]
    return [
        ad.scale(ad.add(ad.matmul(x, p.dec_proj_w), p.dec_proj_b),
                 1.0 / cfg.input_scale)
        for x in xs
    ]


def encode(h: np.ndarray, p: ModelParams, cfg: CodecConfig) -> np.ndarray:
    """One user's sparse-domain CSI -> length-k feedback vector."""
    h = np.asarray(h)
    if h.shape != (cfg.n_delay, cfg.n_tx):
        raise ValueError(f"expected ({cfg.n_delay}, {cfg.n_tx}) CSI, got {h.shape}")
    tokens = Tensor(csi_to_tokens(h)[None])
    return encoder_forward(tokens, p, cfg).data[0]


def decode_multiuser(vs, p: ModelParams, cfg: CodecConfig):
    """Received vectors of one group -> list of reconstructed CSI matrices."""
    vbars = []
    for v in vs:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (cfg.k_feedback,):
            raise ValueError(f"expected length-{cfg.k_feedback} vector, got {v.shape}")
        vbars.append(Tensor(v[None]))
    tokens = decoder_forward(vbars, p, cfg)
    return [tokens_to_csi(t.data[0]) for t in tokens]


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(path: str, params: ModelParams, channel_cfg: ChannelConfig,
                    stage: int, step: int, seed: int, link_mode: str = "awgn"):
    cfg = params.cfg
    lines = [
        CHECKPOINT_MAGIC,
        f"variant: {cfg.variant}",
        f"stage: {stage}",
        f"step: {step}",
        f"seed: {seed}",
        f"link: {link_mode}",
        f"d_model: {cfg.d_model}",
        f"heads: {cfg.heads}",
        f"l1: {cfg.l1}",
        f"l2: {cfg.l2}",
        f"l3: {cfg.l3}",
        f"k_feedback: {cfg.k_feedback}",
        f"n_tx: {cfg.n_tx}",
        f"n_delay: {cfg.n_delay}",
        f"n_sub: {channel_cfg.n_sub}",
        f"bandwidth_hz: {channel_cfg.bandwidth_hz!r}",
        f"n_paths: {channel_cfg.n_paths}",
        f"n_users: {channel_cfg.n_users}",
        f"aod_jitter_rad: {channel_cfg.aod_jitter_rad!r}",
        f"n_parameters: {params.n_parameters()}",
        "---",
    ]
    payload = params.payload_bytes()
    try:
        with open(path, "wb") as fh:
            fh.write(("\n".join(lines) + "\n").encode())
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"failed writing checkpoint {path}: {exc}") from exc


def load_checkpoint(path: str):
    """Returns (params, channel_cfg, meta dict with stage/step/seed/link)."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise OSError(f"failed reading checkpoint {path}: {exc}") from exc
    text, sep, payload = raw.partition(b"\n---\n")
    if not sep:
        raise ValueError(f"{path}: missing checkpoint header terminator")
    lines = text.decode().splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a {CHECKPOINT_MAGIC} file")
    fields = {}
    for line in lines[1:]:
        key, _, value = line.partition(":")
        fields[key.strip()] = value.strip()
    codec_cfg = CodecConfig(
        n_tx=int(fields["n_tx"]),
        n_delay=int(fields["n_delay"]),
        k_feedback=int(fields["k_feedback"]),
        d_model=int(fields["d_model"]),
        heads=int(fields["heads"]),
        l1=int(fields["l1"]),
        l2=int(fields["l2"]),
        l3=int(fields["l3"]),
        variant=fields["variant"],
    )
    channel_cfg = ChannelConfig(
        n_tx=int(fields["n_tx"]),
        n_sub=int(fields["n_sub"]),
        n_delay=int(fields["n_delay"]),
        bandwidth_hz=float(fields["bandwidth_hz"]),
        n_paths=int(fields["n_paths"]),
        n_users=int(fields["n_users"]),
        aod_jitter_rad=float(fields["aod_jitter_rad"]),
    )
    params = ModelParams(codec_cfg, seed=int(fields["seed"]))
    params.load_payload_bytes(payload)
    meta = {
        "stage": int(fields["stage"]),
        "step": int(fields["step"]),
        "seed": int(fields["seed"]),
        "link": fields.get("link", "awgn"),
        "n_parameters": int(fields["n_parameters"]),
    }
    return params, channel_cfg, meta


def checkpoint_name(variant: str, n_users: int, k_feedback: int,
                    snr_db: float | None = None) -> str:
    """Conventional checkpoint filename used by the sweep harness."""
    base = f"{variant}_m{n_users}_k{k_feedback}"
    if snr_db is not None:
        base += f"_snr{snr_db:g}"
    return base + ".ckpt"
