"""Forecasting architectures mapping an input window [B, L, C] to a forecast [B, H, C].

All models work in standardized units; :class:`Forecaster` holds the frozen
per-channel scaler and exposes ``predict`` on raw levels.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Parameter, Tensor

KINDS = ("MLP", "GRU", "GRU_AR", "TCN", "TCN_FAE", "Transformer", "Transformer_CE")


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    input_len: int = 250
    horizon: int = 50
    channels: int = 3
    mlp_hidden: tuple[int, ...] = (256, 256)
    gru_hidden: int = 64
    gru_layers: int = 2
    tcn_channels: int = 64
    tcn_kernel: int = 3
    tcn_blocks: int = 5
    tcn_convs_per_block: int = 2
    fae_latent: int = 8
    fae_lambda: float = 0.5
    fae_hidden: int = 64
    d_model: int = 64
    n_heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    ff_dim: int = 128
    ce_kernel: int = 3
    ce_layers: int = 1
    dropout: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        for name in ("input_len", "horizon", "channels"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        k = self.kind
        need = {
            "MLP": ("mlp_hidden",),
            "GRU": ("gru_hidden", "gru_layers"),
            "GRU_AR": ("gru_hidden", "gru_layers"),
            "TCN": ("tcn_channels", "tcn_kernel", "tcn_blocks", "tcn_convs_per_block"),
            "TCN_FAE": ("tcn_channels", "tcn_kernel", "tcn_blocks", "tcn_convs_per_block",
                        "fae_latent", "fae_hidden"),
            "Transformer": ("d_model", "n_heads", "enc_layers", "dec_layers", "ff_dim"),
            "Transformer_CE": ("d_model", "n_heads", "enc_layers", "dec_layers", "ff_dim",
                               "ce_kernel", "ce_layers"),
        }[k]
        for name in need:
            v = getattr(self, name)
            if (len(v) == 0 or min(v) < 1) if isinstance(v, tuple) else v < 1:
                raise ValueError(f"{k}: {name} must be positive, got {v}")
        if k == "MLP" and len(self.mlp_hidden) > 3:
            raise ValueError("MLP supports at most three hidden layers")
        if k.startswith("Transformer") and self.d_model % self.n_heads:
            raise ValueError("d_model must be divisible by n_heads")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["mlp_hidden"] = list(self.mlp_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "mlp_hidden" in d:
            d["mlp_hidden"] = tuple(d["mlp_hidden"])
        return cls(**d)

    def config_hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]


# -- initialization -----------------------------------------------------------

def _uniform(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


# -- building blocks ----------------------------------------------------------

class Module:
    """Owns named parameters; submodules register through ``_param``."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.params: dict[str, Parameter] = {}

    def _param(self, name: str, value: np.ndarray) -> Parameter:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name}")
        p = Parameter(value, name=name)
        self.params[name] = p
        return p

    def _linear(self, name, n_in, n_out, bias=True):
        w = self._param(f"{name}.weight", _uniform(self.rng, (n_in, n_out), n_in))
        b = self._param(f"{name}.bias", _uniform(self.rng, (n_out,), n_in)) if bias else None
        return w, b

    def _conv(self, name, k, c_in, c_out):
        w = self._param(f"{name}.weight", _uniform(self.rng, (k, c_in, c_out), k * c_in))
        b = self._param(f"{name}.bias", _uniform(self.rng, (c_out,), k * c_in))
        return w, b

    def _layer_norm(self, name, d):
        return (self._param(f"{name}.gamma", np.ones(d)), self._param(f"{name}.beta", np.zeros(d)))


def _stacked_gru(mod: Module, prefix: str, n_in: int, hidden: int, layers: int):
    out = []
    for i in range(layers):
        d_in = n_in if i == 0 else hidden
        wi, bi = mod._linear(f"{prefix}{i}.input", d_in, 3 * hidden)
        wh = mod._param(f"{prefix}{i}.recurrent.weight",
                        np.concatenate([_orthogonal(mod.rng, hidden) for _ in range(3)], axis=1))
        bh = mod._param(f"{prefix}{i}.recurrent.bias", _uniform(mod.rng, (3 * hidden,), hidden))
        out.append((wi, bi, wh, bh))
    return out


def _run_gru(layers, x: Tensor, h0s=None):
    """Apply stacked GRU layers to [B, L, d]; returns (top states [B, L, H], last state per layer)."""
    finals = []
    h = x
    for i, (wi, bi, wh, bh) in enumerate(layers):
        B = x.shape[0]
        h0 = h0s[i] if h0s is not None else Tensor(np.zeros((B, wh.shape[0])))
        h = T.gru_scan(T.linear(h, wi, bi), h0, wh, bh)
        finals.append(h[:, -1])
    return h, finals


def positional_encoding(length: int, d: int, offset: int = 0) -> np.ndarray:
    pos = np.arange(offset, offset + length)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


def attention(q: Tensor, k: Tensor, v: Tensor, causal: bool = False):
    """Scaled dot-product attention over [..., Lq, dh] x [..., Lk, dh].

    Returns (context, weights). With ``causal`` query i only sees keys <= i.
    """
    dh = q.shape[-1]
    scores = T.matmul(T.mul(q, 1.0 / math.sqrt(dh)), T.swapaxes(k, -1, -2))
    mask = None
    if causal:
        mask = np.tril(np.ones((q.shape[-2], k.shape[-2]), dtype=bool))
    w = T.softmax(scores, axis=-1, mask=mask)
    return T.matmul(w, v), w


class MultiHeadAttention:
    def __init__(self, mod: Module, name: str, d: int, heads: int):
        self.heads = heads
        self.wq, self.bq = mod._linear(f"{name}.q", d, d)
        self.wk, self.bk = mod._linear(f"{name}.k", d, d)
        self.wv, self.bv = mod._linear(f"{name}.v", d, d)
        self.wo, self.bo = mod._linear(f"{name}.out", d, d)
        self.last_weights: np.ndarray | None = None

    def _split(self, x: Tensor) -> Tensor:
        B, L, d = x.shape
        return T.transpose(T.reshape(x, (B, L, self.heads, d // self.heads)), (0, 2, 1, 3))

    def project_kv(self, xkv: Tensor) -> tuple[Tensor, Tensor]:
        return (self._split(T.linear(xkv, self.wk, self.bk)),
                self._split(T.linear(xkv, self.wv, self.bv)))

    def __call__(self, xq: Tensor, xkv: Tensor | None = None, causal: bool = False,
                 kv: tuple[Tensor, Tensor] | None = None) -> Tensor:
        B, Lq, d = xq.shape
        q = self._split(T.linear(xq, self.wq, self.bq))
        k, v = kv if kv is not None else self.project_kv(xkv)
        ctx, w = attention(q, k, v, causal=causal)
        self.last_weights = w.data
        ctx = T.reshape(T.transpose(ctx, (0, 2, 1, 3)), (B, Lq, d))
        return T.linear(ctx, self.wo, self.bo)


# -- forecasters --------------------------------------------------------------

class Forecaster(Module):
    """Common interface: ``forward(x, y=None, training=False) -> (forecast, aux_loss)``.

    ``x`` is [B, input_len, C] and the forecast [B, horizon, C], both in
    standardized units. ``y`` (standardized target) enables teacher forcing
    for the autoregressive models when ``training`` is set.
    """

    teacher_forced = False

    def __init__(self, config: ModelConfig, seed: int = 0):
        super().__init__(np.random.default_rng(seed))
        self.config = config
        self.seed = seed
        self.mean = np.zeros(config.channels)
        self.std = np.ones(config.channels)
        self.build()

    def build(self):
        raise NotImplementedError

    def forward(self, x: Tensor, y: np.ndarray | None = None, training: bool = False):
        raise NotImplementedError

    def _check_input(self, x: Tensor):
        c = self.config
        if x.ndim != 3 or x.shape[1:] != (c.input_len, c.channels):
            raise T.ShapeError(f"{c.kind}: expected input [B, {c.input_len}, {c.channels}], got {x.shape}")

    def loss(self, x: np.ndarray, y: np.ndarray) -> tuple[Tensor, Tensor]:
        """Training objective on standardized arrays; returns (total, forecast mse)."""
        pred, aux = self.forward(Tensor(x), y, training=True)
        mse = T.mse_loss(pred, y)
        return (mse if aux is None else T.add(mse, aux)), mse

    # scaler
    def fit_scaler(self, inputs: np.ndarray) -> None:
        flat = inputs.reshape(-1, inputs.shape[-1])
        self.mean = flat.mean(axis=0)
        std = flat.std(axis=0)
        self.std = np.where(std > 1e-12, std, 1.0)

    def standardize(self, a: np.ndarray) -> np.ndarray:
        return (a - self.mean) / self.std

    def destandardize(self, a: np.ndarray) -> np.ndarray:
        return a * self.std + self.mean

    def predict(self, x_raw: np.ndarray, batch_size: int = 256) -> np.ndarray:
        """Evaluation-mode forecast in raw level units for [B, L, C] inputs."""
        out = []
        with T.no_grad():
            for i in range(0, len(x_raw), batch_size):
                xb = self.standardize(np.asarray(x_raw[i:i + batch_size], dtype=np.float64))
                pred, _ = self.forward(Tensor(xb), None, training=False)
                out.append(self.destandardize(pred.data))
        return np.concatenate(out, axis=0) if out else np.empty((0, self.config.horizon, self.config.channels))

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            if state[k].shape != p.data.shape:
                raise T.ShapeError(f"parameter {k}: checkpoint shape {state[k].shape} != {p.data.shape}")
            p.data = np.array(state[k], dtype=np.float64)


class MLPForecaster(Forecaster):
    def build(self):
        c = self.config
        sizes = [c.input_len * c.channels, *c.mlp_hidden, c.horizon * c.channels]
        self.layers = [self._linear(f"fc{i}", a, b) for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:]))]

    def forward(self, x, y=None, training=False):
        self._check_input(x)
        c = self.config
        h = T.reshape(x, (x.shape[0], -1))
        for i, (w, b) in enumerate(self.layers):
            h = T.linear(h, w, b)
            if i < len(self.layers) - 1:
                h = T.dropout(T.relu(h), c.dropout, self.rng, training)
        return T.reshape(h, (x.shape[0], c.horizon, c.channels)), None


class GRUForecaster(Forecaster):
    """Stacked GRU; a linear head on the final hidden state emits the whole horizon."""

    def build(self):
        c = self.config
        self.gru = _stacked_gru(self, "gru", c.channels, c.gru_hidden, c.gru_layers)
        self.head = self._linear("head", c.gru_hidden, c.horizon * c.channels)

    def forward(self, x, y=None, training=False):
        self._check_input(x)
        c = self.config
        _, finals = _run_gru(self.gru, x)
        h = T.dropout(finals[-1], c.dropout, self.rng, training)
        return T.reshape(T.linear(h, *self.head), (x.shape[0], c.horizon, c.channels)), None


class GRUARForecaster(Forecaster):
    """Autoregressive GRU.

    The recurrence reads the input window, then continues over the forecast
    horizon fed with the previous step (true target when teacher forcing,
    its own prediction otherwise); a per-step head emits one [B, C] row.
    """

    teacher_forced = True

    def build(self):
        c = self.config
        self.gru = _stacked_gru(self, "gru", c.channels, c.gru_hidden, c.gru_layers)
        self.head = self._linear("head", c.gru_hidden, c.channels)

    def decode_teacher_forced(self, x: Tensor, dec_in: Tensor) -> Tensor:
        """Forecast given the full decoder input sequence [B, horizon, C].

        ``dec_in[:, 0]`` must be the last input step; row j of the output is
        the prediction made after reading ``dec_in[:, j]``.
        """
        seq = T.concat([x[:, :-1], dec_in], axis=1)
        hs, _ = _run_gru(self.gru, seq)
        top = hs[:, x.shape[1] - 1:]
        return T.linear(top, *self.head)

    def forward(self, x, y=None, training=False):
        self._check_input(x)
        c = self.config
        if training and y is not None:
            dec_in = T.concat([x[:, -1:], Tensor(np.asarray(y)[:, :-1])], axis=1)
            return self.decode_teacher_forced(x, dec_in), None
        hs, finals = _run_gru(self.gru, x)
        outs = [T.linear(finals[-1], *self.head)]
        for _ in range(c.horizon - 1):
            step_in = T.reshape(outs[-1], (x.shape[0], 1, c.channels))
            _, finals = _run_gru(self.gru, step_in, finals)
            outs.append(T.linear(finals[-1], *self.head))
        B = x.shape[0]
        return T.concat([T.reshape(o, (B, 1, c.channels)) for o in outs], axis=1), None


class _TCNEncoder:
    """Residual blocks of dilated causal convolutions with dilations 1, 2, 4, ..."""

    def __init__(self, mod: Module, c: ModelConfig):
        self.blocks = []
        c_in = c.channels
        for i in range(c.tcn_blocks):
            convs = [mod._conv(f"tcn{i}.conv{j}", c.tcn_kernel, c_in if j == 0 else c.tcn_channels,
                               c.tcn_channels) for j in range(c.tcn_convs_per_block)]
            res = mod._conv(f"tcn{i}.residual", 1, c_in, c.tcn_channels) if c_in != c.tcn_channels else None
            self.blocks.append((convs, res, 2 ** i))
            c_in = c.tcn_channels
        self.dropout = c.dropout
        self.rng = mod.rng

    def receptive_field(self, k: int) -> int:
        return 1 + sum(len(convs) * (k - 1) * d for convs, _, d in self.blocks)

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        h = x
        for convs, res, d in self.blocks:
            z = h
            for w, b in convs:
                z = T.dropout(T.relu(T.causal_conv1d(z, w, b, d)), self.dropout, self.rng, training)
            skip = h if res is None else T.causal_conv1d(h, *res)
            h = T.relu(T.add(z, skip))
        return h


class TCNForecaster(Forecaster):
    def build(self):
        c = self.config
        self.encoder = _TCNEncoder(self, c)
        self.head = self._linear("head", c.tcn_channels, c.horizon * c.channels)

    def features(self, x: Tensor, training: bool = False) -> Tensor:
        return self.encoder(x, training)

    def forward(self, x, y=None, training=False):
        self._check_input(x)
        c = self.config
        # only the last step is read, so steps outside its receptive field can be skipped
        rf = self.encoder.receptive_field(c.tcn_kernel)
        feats = self.features(x[:, -rf:] if rf < x.shape[1] else x, training)
        out = T.linear(feats[:, -1], *self.head)
        return T.reshape(out, (x.shape[0], c.horizon, c.channels)), None


class TCNFAEForecaster(Forecaster):
    """TCN encoder squeezed into a small latent, with reconstruction and forecast decoders.

    The latent reads the last-step and time-averaged encoder features. The
    auxiliary loss is ``fae_lambda * mse(reconstruction, input)``.
    """

    def build(self):
        c = self.config
        self.encoder = _TCNEncoder(self, c)
        self.to_latent = self._linear("latent", 2 * c.tcn_channels, c.fae_latent)
        self.recon = [self._linear("recon.fc0", c.fae_latent, c.fae_hidden),
                      self._linear("recon.fc1", c.fae_hidden, c.input_len * c.channels)]
        self.fcst = [self._linear("forecast.fc0", c.fae_latent, c.fae_hidden),
                     self._linear("forecast.fc1", c.fae_hidden, c.horizon * c.channels)]
        self.last_recon: Tensor | None = None

    def encode(self, x: Tensor, training: bool = False) -> Tensor:
        feats = self.encoder(x, training)
        summary = T.concat([feats[:, -1], T.mean(feats, axis=1)], axis=-1)
        return T.linear(summary, *self.to_latent)

    @staticmethod
    def _decode(layers, z):
        h = T.relu(T.linear(z, *layers[0]))
        return T.linear(h, *layers[1])

    def forward(self, x, y=None, training=False):
        self._check_input(x)
        c = self.config
        B = x.shape[0]
        z = self.encode(x, training)
        pred = T.reshape(self._decode(self.fcst, z), (B, c.horizon, c.channels))
        aux = None
        if training:
            recon = T.reshape(self._decode(self.recon, z), (B, c.input_len, c.channels))
            self.last_recon = recon
            aux = T.mul(T.mse_loss(recon, x.data), c.fae_lambda)
        return pred, aux


class TransformerForecaster(Forecaster):
    """Encoder-decoder Transformer (post-norm) with sinusoidal positions.

    Training feeds the shifted target to the decoder; evaluation decodes
    autoregressively from the last input step.
    """

    teacher_forced = True

    def build(self):
        c = self.config
        d = c.d_model
        self._build_embeddings()
        self.enc = []
        for i in range(c.enc_layers):
            self.enc.append(dict(
                attn=MultiHeadAttention(self, f"enc{i}.self_attn", d, c.n_heads),
                ln1=self._layer_norm(f"enc{i}.ln1", d),
                ff1=self._linear(f"enc{i}.ff1", d, c.ff_dim),
                ff2=self._linear(f"enc{i}.ff2", c.ff_dim, d),
                ln2=self._layer_norm(f"enc{i}.ln2", d)))
        self.dec = []
        for i in range(c.dec_layers):
            self.dec.append(dict(
                self_attn=MultiHeadAttention(self, f"dec{i}.self_attn", d, c.n_heads),
                ln1=self._layer_norm(f"dec{i}.ln1", d),
                cross_attn=MultiHeadAttention(self, f"dec{i}.cross_attn", d, c.n_heads),
                ln2=self._layer_norm(f"dec{i}.ln2", d),
                ff1=self._linear(f"dec{i}.ff1", d, c.ff_dim),
                ff2=self._linear(f"dec{i}.ff2", c.ff_dim, d),
                ln3=self._layer_norm(f"dec{i}.ln3", d)))
        self.head = self._linear("head", d, c.channels)

    def _build_embeddings(self):
        c = self.config
        self.enc_embed = self._linear("enc_embed", c.channels, c.d_model)
        self.dec_embed = self._linear("dec_embed", c.channels, c.d_model)

    def embed(self, x: Tensor, which: str) -> Tensor:
        w, b = self.enc_embed if which == "enc" else self.dec_embed
        return T.linear(x, w, b)

    def _ff(self, layer, h, training):
        z = T.relu(T.linear(h, *layer["ff1"]))
        return T.dropout(T.linear(z, *layer["ff2"]), self.config.dropout, self.rng, training)

    def encode(self, x: Tensor, training: bool = False) -> Tensor:
        c = self.config
        h = T.add(self.embed(x, "enc"), positional_encoding(x.shape[1], c.d_model))
        for layer in self.enc:
            a = T.dropout(layer["attn"](h, h), c.dropout, self.rng, training)
            h = T.layer_norm(T.add(h, a), *layer["ln1"])
            h = T.layer_norm(T.add(h, self._ff(layer, h, training)), *layer["ln2"])
        return h

    def memory_kv(self, memory: Tensor) -> list[tuple[Tensor, Tensor]]:
        return [layer["cross_attn"].project_kv(memory) for layer in self.dec]

    def decode(self, memory: Tensor, dec_in: Tensor, training: bool = False,
               kv: list | None = None) -> Tensor:
        """Decoder outputs [B, Ld, C] for decoder inputs [B, Ld, C] (causally masked)."""
        c = self.config
        kv = kv or self.memory_kv(memory)
        h = T.add(self.embed(dec_in, "dec"), positional_encoding(dec_in.shape[1], c.d_model))
        for layer, layer_kv in zip(self.dec, kv):
            a = T.dropout(layer["self_attn"](h, h, causal=True), c.dropout, self.rng, training)
            h = T.layer_norm(T.add(h, a), *layer["ln1"])
            a = T.dropout(layer["cross_attn"](h, kv=layer_kv), c.dropout, self.rng, training)
            h = T.layer_norm(T.add(h, a), *layer["ln2"])
            h = T.layer_norm(T.add(h, self._ff(layer, h, training)), *layer["ln3"])
        return T.linear(h, *self.head)

    def forward(self, x, y=None, training=False):
        self._check_input(x)
        c = self.config
        memory = self.encode(x, training)
        if training and y is not None:
            dec_in = T.concat([x[:, -1:], Tensor(np.asarray(y)[:, :-1])], axis=1)
            return self.decode(memory, dec_in, training), None
        kv = self.memory_kv(memory)
        seq = x[:, -1:]
        caches: list = [None] * len(self.dec)
        outs = []
        for _ in range(c.horizon):
            last = self.decode_step(seq, kv, caches)
            outs.append(last)
            seq = T.concat([seq, last], axis=1)
        return T.concat(outs, axis=1), None

    def decode_step(self, seq: Tensor, kv: list, caches: list) -> Tensor:
        """Output [B, 1, C] for the last position of ``seq`` (evaluation mode).

        ``caches[i]`` keeps the inputs of decoder layer ``i`` at earlier
        positions; with the causal mask those never change, so this matches
        the last row of :meth:`decode`.
        """
        c = self.config
        t = seq.shape[1] - 1
        emb = self.embed(seq[:, max(0, t - self._embed_context()):], "dec")[:, -1:]
        h = T.add(emb, positional_encoding(1, c.d_model, offset=t))
        for i, (layer, layer_kv) in enumerate(zip(self.dec, kv)):
            ctx = h if caches[i] is None else T.concat([caches[i], h], axis=1)
            caches[i] = ctx
            a = layer["self_attn"](h, ctx)
            h = T.layer_norm(T.add(h, a), *layer["ln1"])
            a = layer["cross_attn"](h, kv=layer_kv)
            h = T.layer_norm(T.add(h, a), *layer["ln2"])
            h = T.layer_norm(T.add(h, self._ff(layer, h, False)), *layer["ln3"])
        return T.linear(h, *self.head)

    def _embed_context(self) -> int:
        return 0


class TransformerCEForecaster(TransformerForecaster):
    """Transformer whose input embeddings are causal 1-D convolution stacks."""

    def _build_embeddings(self):
        c = self.config
        self.enc_embed = [self._conv(f"enc_embed.conv{i}", c.ce_kernel,
                                     c.channels if i == 0 else c.d_model, c.d_model)
                          for i in range(c.ce_layers)]
        self.dec_embed = [self._conv(f"dec_embed.conv{i}", c.ce_kernel,
                                     c.channels if i == 0 else c.d_model, c.d_model)
                          for i in range(c.ce_layers)]

    def _embed_context(self) -> int:
        c = self.config
        return c.ce_layers * (c.ce_kernel - 1)

    def embed(self, x: Tensor, which: str) -> Tensor:
        convs = self.enc_embed if which == "enc" else self.dec_embed
        h = x
        for i, (w, b) in enumerate(convs):
            if i:
                h = T.relu(h)
            h = T.causal_conv1d(h, w, b)
        return h


_CLASSES = {
    "MLP": MLPForecaster,
    "GRU": GRUForecaster,
    "GRU_AR": GRUARForecaster,
    "TCN": TCNForecaster,
    "TCN_FAE": TCNFAEForecaster,
    "Transformer": TransformerForecaster,
    "Transformer_CE": TransformerCEForecaster,
}


def build_model(config: ModelConfig, seed: int = 0) -> Forecaster:
    return _CLASSES[config.kind](config, seed)


def parameter_count(model: Forecaster) -> int:
    return model.parameter_count()
