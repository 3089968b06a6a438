"""From-scratch transformer encoder with linear and MLP token heads.

Everything runs in float64 numpy with hand-written backprop; desk-scale data
makes gradient-check fidelity worth more than speed. The encoder is pre-norm
(attention and feed-forward both wrapped in residuals) with learned
positional embeddings and a final layer norm. The MLP head is
Linear -> ReLU -> Dropout -> Linear -> ReLU -> Linear.
"""

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .data import AddressSample, TagSchema
from .encoding import Batch, Vocabulary, encode_batch
from .errors import ConfigError, EmptyLoss, ShapeError

TRAIN = "train"
EVAL = "eval"

LINEAR = "linear"
MLP = "mlp"

MAX_LEN = 256
LN_EPS = 1e-5
_NEG_INF = 1e9  # additive mask; large enough that exp underflows to exactly 0


@dataclass(frozen=True)
class EncoderConfig:
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 128
    max_len: int = MAX_LEN
    variant_name: str = "custom"

    def __post_init__(self):
        if min(self.d_model, self.n_layers, self.n_heads, self.d_ff) < 1:
            raise ConfigError("encoder dimensions must be positive")
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.max_len != MAX_LEN:
            raise ConfigError(f"max_len is fixed at {MAX_LEN}")


@dataclass(frozen=True)
class HeadConfig:
    kind: str = LINEAR
    hidden_dim: Optional[int] = None  # MLP only; defaults to d_model
    dropout_p: float = 0.4  # MLP only

    def __post_init__(self):
        if self.kind not in (LINEAR, MLP):
            raise ConfigError(f"unknown head kind {self.kind!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be positive")


# Size variants standing in for the pretrained checkpoints being compared:
# they differ in depth while sharing width, so head effects are isolated.
VARIANTS: Dict[str, EncoderConfig] = {
    "small": EncoderConfig(d_model=64, n_layers=1, n_heads=4, d_ff=128, variant_name="small"),
    "distil": EncoderConfig(d_model=64, n_layers=2, n_heads=4, d_ff=128, variant_name="distil"),
    "base": EncoderConfig(d_model=64, n_layers=4, n_heads=4, d_ff=128, variant_name="base"),
}


@dataclass
class ModelBundle:
    encoder: EncoderConfig
    head: HeadConfig
    n_tags: int
    vocab_size: int
    vocab_hash: str
    params: Dict[str, np.ndarray] = field(repr=False)

    @property
    def hidden_dim(self) -> int:
        return self.head.hidden_dim or self.encoder.d_model

    @property
    def parameter_count(self) -> int:
        return sum(p.size for p in self.params.values())


def head_parameter_count(hc: HeadConfig, d_model: int, n_tags: int) -> int:
    if hc.kind == LINEAR:
        return d_model * n_tags + n_tags
    h = hc.hidden_dim or d_model
    return (d_model * h + h) + (h * h + h) + (h * n_tags + n_tags)


def parameter_count(ec: EncoderConfig, hc: HeadConfig, vocab_size: int, n_tags: int) -> int:
    """Closed-form parameter count; must equal the allocated sizes."""
    d, ff = ec.d_model, ec.d_ff
    per_layer = 2 * d + 4 * (d * d + d) + 2 * d + (d * ff + ff) + (ff * d + d)
    encoder = vocab_size * d + ec.max_len * d + ec.n_layers * per_layer + 2 * d
    return encoder + head_parameter_count(hc, d, n_tags)


def _uniform(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_model(ec: EncoderConfig, hc: HeadConfig, schema: TagSchema,
               vocab: Vocabulary, seed: int) -> ModelBundle:
    """Deterministic initialization: fan-scaled uniform weights, zero biases,
    unit layer-norm gains."""
    rng = np.random.default_rng(seed)
    d, ff = ec.d_model, ec.d_ff
    n_tags = len(schema.tags)
    vocab_size = len(vocab)
    p: Dict[str, np.ndarray] = {}
    p["tok_emb"] = _uniform(rng, d, (vocab_size, d))
    p["pos_emb"] = _uniform(rng, d, (ec.max_len, d))
    for i in range(ec.n_layers):
        pre = f"layers.{i}."
        p[pre + "ln1.g"] = np.ones(d)
        p[pre + "ln1.b"] = np.zeros(d)
        for name in ("wq", "wk", "wv", "wo"):
            p[pre + "attn." + name] = _uniform(rng, d, (d, d))
        for name in ("bq", "bk", "bv", "bo"):
            p[pre + "attn." + name] = np.zeros(d)
        p[pre + "ln2.g"] = np.ones(d)
        p[pre + "ln2.b"] = np.zeros(d)
        p[pre + "ffn.w1"] = _uniform(rng, d, (d, ff))
        p[pre + "ffn.b1"] = np.zeros(ff)
        p[pre + "ffn.w2"] = _uniform(rng, ff, (ff, d))
        p[pre + "ffn.b2"] = np.zeros(d)
    p["ln_f.g"] = np.ones(d)
    p["ln_f.b"] = np.zeros(d)
    if hc.kind == LINEAR:
        p["head.w"] = _uniform(rng, d, (d, n_tags))
        p["head.b"] = np.zeros(n_tags)
    else:
        h = hc.hidden_dim or d
        p["head.w1"] = _uniform(rng, d, (d, h))
        p["head.b1"] = np.zeros(h)
        p["head.w2"] = _uniform(rng, h, (h, h))
        p["head.b2"] = np.zeros(h)
        p["head.w3"] = _uniform(rng, h, (h, n_tags))
        p["head.b3"] = np.zeros(n_tags)
    bundle = ModelBundle(encoder=ec, head=hc, n_tags=n_tags,
                         vocab_size=vocab_size, vocab_hash=vocab.content_hash(),
                         params=p)
    expected = parameter_count(ec, hc, vocab_size, n_tags)
    assert bundle.parameter_count == expected, "parameter count formula drifted"
    return bundle


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------


def _layernorm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (x - mu) * inv
    return xhat * g + b, (xhat, inv)


def _layernorm_backward(dy, cache, g):
    xhat, inv = cache
    dg = (dy * xhat).sum(axis=(0, 1))
    db = dy.sum(axis=(0, 1))
    dxhat = dy * g
    dx = inv * (
        dxhat
        - dxhat.mean(axis=-1, keepdims=True)
        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
    )
    return dx, dg, db


def _split_heads(x, n_heads):
    B, L, d = x.shape
    return x.reshape(B, L, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, H, L, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, L, H * dh)


def _softmax_lastaxis(scores):
    m = scores.max(axis=-1, keepdims=True)
    e = np.exp(scores - m)
    return e / e.sum(axis=-1, keepdims=True)


def dropout_mask(shape, p: float, rng: np.random.Generator) -> np.ndarray:
    """Inverted-dropout keep mask, already scaled by 1/(1-p)."""
    return (rng.random(shape) >= p) / (1.0 - p)


def forward(bundle: ModelBundle, batch: Batch, mode: str = EVAL,
            rng: Optional[np.random.Generator] = None):
    """Run the encoder and head; returns (logits [B, L, n_tags], cache).

    In EVAL mode dropout is disabled and the output is deterministic. The
    cache holds every activation the backward pass needs.
    """
    ec, hc, p = bundle.encoder, bundle.head, bundle.params
    ids, mask = batch.token_ids, batch.mask
    B, L = ids.shape
    if L > ec.max_len:
        raise ShapeError(f"sequence length {L} exceeds max_len {ec.max_len}")
    if ids.max() >= bundle.vocab_size:
        raise ShapeError("token id outside the model's vocabulary")
    if mode == TRAIN and hc.kind == MLP and hc.dropout_p > 0.0 and rng is None:
        raise ConfigError("TRAIN mode with dropout needs an rng")

    x = p["tok_emb"][ids] + p["pos_emb"][:L]
    mask_add = (mask[:, None, None, :] - 1.0) * _NEG_INF
    scale = 1.0 / np.sqrt(ec.d_model // ec.n_heads)

    layer_caches = []
    for i in range(ec.n_layers):
        pre = f"layers.{i}."
        a, ln1c = _layernorm(x, p[pre + "ln1.g"], p[pre + "ln1.b"])
        q = a @ p[pre + "attn.wq"] + p[pre + "attn.bq"]
        k = a @ p[pre + "attn.wk"] + p[pre + "attn.bk"]
        v = a @ p[pre + "attn.wv"] + p[pre + "attn.bv"]
        qh, kh, vh = (_split_heads(t, ec.n_heads) for t in (q, k, v))
        scores = qh @ kh.transpose(0, 1, 3, 2) * scale + mask_add
        attn = _softmax_lastaxis(scores)
        ctx = _merge_heads(attn @ vh)
        o = ctx @ p[pre + "attn.wo"] + p[pre + "attn.bo"]
        x_mid = x + o
        a2, ln2c = _layernorm(x_mid, p[pre + "ln2.g"], p[pre + "ln2.b"])
        h_pre = a2 @ p[pre + "ffn.w1"] + p[pre + "ffn.b1"]
        h = np.maximum(h_pre, 0.0)
        f = h @ p[pre + "ffn.w2"] + p[pre + "ffn.b2"]
        x_out = x_mid + f
        layer_caches.append(dict(x=x, a=a, ln1=ln1c, qh=qh, kh=kh, vh=vh,
                                 attn=attn, ctx=ctx, x_mid=x_mid, a2=a2,
                                 ln2=ln2c, h_pre=h_pre, h=h))
        x = x_out

    xf, lnfc = _layernorm(x, p["ln_f.g"], p["ln_f.b"])

    head_cache: Dict[str, np.ndarray] = {}
    if hc.kind == LINEAR:
        logits = xf @ p["head.w"] + p["head.b"]
    else:
        z1_pre = xf @ p["head.w1"] + p["head.b1"]
        z1 = np.maximum(z1_pre, 0.0)
        if mode == TRAIN and hc.dropout_p > 0.0:
            dmask = dropout_mask(z1.shape, hc.dropout_p, rng)
        else:
            dmask = np.ones_like(z1)
        z1d = z1 * dmask
        z2_pre = z1d @ p["head.w2"] + p["head.b2"]
        z2 = np.maximum(z2_pre, 0.0)
        logits = z2 @ p["head.w3"] + p["head.b3"]
        head_cache = dict(z1_pre=z1_pre, z1=z1, dmask=dmask, z1d=z1d,
                          z2_pre=z2_pre, z2=z2)

    cache = dict(ids=ids, mask=mask, L=L, layers=layer_caches, x_last=x,
                 xf=xf, ln_f=lnfc, head=head_cache)
    return logits, cache


def token_nll(logits: np.ndarray, tag_ids: np.ndarray, mask: np.ndarray):
    """Per-batch cross-entropy pieces: (nll sum, token count, softmax probs)."""
    m = logits.max(axis=-1, keepdims=True)
    z = logits - m
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    logp = z - lse
    safe_gold = np.clip(tag_ids, 0, None)
    gold_logp = np.take_along_axis(logp, safe_gold[..., None], axis=-1)[..., 0]
    nll_sum = -(gold_logp * mask).sum()
    return nll_sum, mask.sum(), np.exp(logp)


def token_cross_entropy(logits: np.ndarray, batch: Batch) -> float:
    """Mean cross-entropy over unmasked token positions."""
    nll_sum, n, _ = token_nll(logits, batch.tag_ids, batch.mask)
    if n == 0:
        raise EmptyLoss("no unmasked positions in batch")
    return float(nll_sum / n)


def loss_and_grads(bundle: ModelBundle, batch: Batch, mode: str = TRAIN,
                   rng: Optional[np.random.Generator] = None):
    """Mean token cross-entropy and analytic gradients for every parameter."""
    logits, cache = forward(bundle, batch, mode=mode, rng=rng)
    nll_sum, n, probs = token_nll(logits, batch.tag_ids, batch.mask)
    if n == 0:
        raise EmptyLoss("no unmasked positions in batch")
    loss = float(nll_sum / n)
    dlogits = probs.copy()
    safe_gold = np.clip(batch.tag_ids, 0, None)
    np.put_along_axis(
        dlogits, safe_gold[..., None],
        np.take_along_axis(dlogits, safe_gold[..., None], axis=-1) - 1.0,
        axis=-1,
    )
    dlogits *= batch.mask[..., None] / n
    grads = _backward(bundle, cache, dlogits)
    return loss, grads


def _backward(bundle: ModelBundle, cache, dlogits) -> Dict[str, np.ndarray]:
    ec, hc, p = bundle.encoder, bundle.head, bundle.params
    g: Dict[str, np.ndarray] = {}
    xf = cache["xf"]

    if hc.kind == LINEAR:
        g["head.w"] = np.einsum("bld,blt->dt", xf, dlogits)
        g["head.b"] = dlogits.sum(axis=(0, 1))
        dxf = dlogits @ p["head.w"].T
    else:
        hcache = cache["head"]
        dz2 = dlogits @ p["head.w3"].T
        g["head.w3"] = np.einsum("blh,blt->ht", hcache["z2"], dlogits)
        g["head.b3"] = dlogits.sum(axis=(0, 1))
        dz2_pre = dz2 * (hcache["z2_pre"] > 0)
        g["head.w2"] = np.einsum("blh,blk->hk", hcache["z1d"], dz2_pre)
        g["head.b2"] = dz2_pre.sum(axis=(0, 1))
        dz1d = dz2_pre @ p["head.w2"].T
        dz1 = dz1d * hcache["dmask"]
        dz1_pre = dz1 * (hcache["z1_pre"] > 0)
        g["head.w1"] = np.einsum("bld,blh->dh", xf, dz1_pre)
        g["head.b1"] = dz1_pre.sum(axis=(0, 1))
        dxf = dz1_pre @ p["head.w1"].T

    dx, g["ln_f.g"], g["ln_f.b"] = _layernorm_backward(dxf, cache["ln_f"], p["ln_f.g"])

    scale = 1.0 / np.sqrt(ec.d_model // ec.n_heads)
    for i in reversed(range(ec.n_layers)):
        pre = f"layers.{i}."
        c = cache["layers"][i]
        # FFN branch: x_out = x_mid + f
        df = dx
        dh = df @ p[pre + "ffn.w2"].T
        g[pre + "ffn.w2"] = np.einsum("blf,bld->fd", c["h"], df)
        g[pre + "ffn.b2"] = df.sum(axis=(0, 1))
        dh_pre = dh * (c["h_pre"] > 0)
        g[pre + "ffn.w1"] = np.einsum("bld,blf->df", c["a2"], dh_pre)
        g[pre + "ffn.b1"] = dh_pre.sum(axis=(0, 1))
        da2 = dh_pre @ p[pre + "ffn.w1"].T
        dln2, g[pre + "ln2.g"], g[pre + "ln2.b"] = _layernorm_backward(
            da2, c["ln2"], p[pre + "ln2.g"])
        dx_mid = dx + dln2
        # attention branch: x_mid = x + o
        do = dx_mid
        dctx = do @ p[pre + "attn.wo"].T
        g[pre + "attn.wo"] = np.einsum("bld,ble->de", c["ctx"], do)
        g[pre + "attn.bo"] = do.sum(axis=(0, 1))
        dctxh = _split_heads(dctx, ec.n_heads)
        dattn = dctxh @ c["vh"].transpose(0, 1, 3, 2)
        dvh = c["attn"].transpose(0, 1, 3, 2) @ dctxh
        attn = c["attn"]
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dqh = dscores @ c["kh"] * scale
        dkh = dscores.transpose(0, 1, 3, 2) @ c["qh"] * scale
        dq, dk, dv = (_merge_heads(t) for t in (dqh, dkh, dvh))
        a = c["a"]
        g[pre + "attn.wq"] = np.einsum("bld,ble->de", a, dq)
        g[pre + "attn.bq"] = dq.sum(axis=(0, 1))
        g[pre + "attn.wk"] = np.einsum("bld,ble->de", a, dk)
        g[pre + "attn.bk"] = dk.sum(axis=(0, 1))
        g[pre + "attn.wv"] = np.einsum("bld,ble->de", a, dv)
        g[pre + "attn.bv"] = dv.sum(axis=(0, 1))
        da = dq @ p[pre + "attn.wq"].T + dk @ p[pre + "attn.wk"].T + dv @ p[pre + "attn.wv"].T
        dln1, g[pre + "ln1.g"], g[pre + "ln1.b"] = _layernorm_backward(
            da, c["ln1"], p[pre + "ln1.g"])
        dx = dx_mid + dln1

    ids, L = cache["ids"], cache["L"]
    d = ec.d_model
    dtok = np.zeros_like(p["tok_emb"])
    np.add.at(dtok, ids.reshape(-1), dx.reshape(-1, d))
    g["tok_emb"] = dtok
    dpos = np.zeros_like(p["pos_emb"])
    dpos[:L] = dx.sum(axis=0)
    g["pos_emb"] = dpos
    return g


# ---------------------------------------------------------------------------
# Inference helpers
# ---------------------------------------------------------------------------


def argmax_tags(logits_row: np.ndarray, length: int) -> List[int]:
    """Per-position argmax over one [L, n_tags] slice; ties pick the lowest id."""
    return np.argmax(logits_row[:length], axis=-1).tolist()


def predict_tags(bundle: ModelBundle, samples: Sequence[AddressSample],
                 vocab: Vocabulary, schema: TagSchema,
                 batch_size: int = 64) -> List[List[int]]:
    """Greedy per-token tag ids for each sample, in EVAL mode."""
    out: List[List[int]] = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        batch = encode_batch(chunk, vocab, schema)
        logits, _ = forward(bundle, batch, mode=EVAL)
        for row, sample in zip(logits, chunk):
            out.append(argmax_tags(row, len(sample)))
    return out


def export_representations(bundle: ModelBundle, samples: Sequence[AddressSample],
                           vocab: Vocabulary, schema: TagSchema,
                           batch_size: int = 64) -> Tuple[np.ndarray, List[str]]:
    """Final-encoder-layer vectors for every real token position.

    Rows follow sample order, then position order; the aligned gold tag
    names come back alongside.
    """
    rows: List[np.ndarray] = []
    tags: List[str] = []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start:start + batch_size]
        batch = encode_batch(chunk, vocab, schema)
        _, cache = forward(bundle, batch, mode=EVAL)
        reps = cache["xf"]
        for i, sample in enumerate(chunk):
            rows.append(reps[i, :len(sample)])
            tags.extend(sample.tags)
    return np.concatenate(rows, axis=0), tags


def representations_csv(reps: np.ndarray, tags: Sequence[str]) -> str:
    """CSV with one column per model dimension plus the gold tag."""
    d = reps.shape[1]
    header = ",".join(f"r{j}" for j in range(d)) + ",tag\n"
    lines = [header]
    for row, tag in zip(reps, tags):
        lines.append(",".join(repr(float(v)) for v in row) + f",{tag}\n")
    return "".join(lines)


# ---------------------------------------------------------------------------
# Checkpoint format: deterministic bytes, bit-exact round trip
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"ADRESKIT-CKPT-1\n"


def _encoder_to_dict(ec: EncoderConfig) -> dict:
    return dict(d_model=ec.d_model, n_layers=ec.n_layers, n_heads=ec.n_heads,
                d_ff=ec.d_ff, max_len=ec.max_len, variant_name=ec.variant_name)


def _head_to_dict(hc: HeadConfig) -> dict:
    return dict(kind=hc.kind, hidden_dim=hc.hidden_dim, dropout_p=hc.dropout_p)


def save_checkpoint(bundle: ModelBundle, path,
                    opt_payload: Optional[Tuple[dict, Dict[str, np.ndarray]]] = None) -> None:
    """Write configs, vocab hash, parameters, and optional optimizer state.

    The byte stream is a pure function of its contents: magic line, one JSON
    header line with an ordered array manifest, then raw little-endian
    float64 array data in manifest order.
    """
    arrays: List[Tuple[str, np.ndarray]] = [("param:" + k, v) for k, v in bundle.params.items()]
    opt_meta = None
    if opt_payload is not None:
        opt_meta, opt_arrays = opt_payload
        arrays.extend(("opt:" + k, v) for k, v in opt_arrays.items())
    manifest = [dict(name=name, shape=list(a.shape)) for name, a in arrays]
    header = dict(
        encoder=_encoder_to_dict(bundle.encoder),
        head=_head_to_dict(bundle.head),
        n_tags=bundle.n_tags,
        vocab_size=bundle.vocab_size,
        vocab_hash=bundle.vocab_hash,
        opt=opt_meta,
        arrays=manifest,
    )
    blob = [_CKPT_MAGIC, json.dumps(header, sort_keys=True).encode("utf-8"), b"\n"]
    for _, a in arrays:
        blob.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(blob))


def load_checkpoint(path) -> Tuple[ModelBundle, Optional[Tuple[dict, Dict[str, np.ndarray]]]]:
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(_CKPT_MAGIC):
        raise ConfigError(f"{path}: not a checkpoint file")
    rest = data[len(_CKPT_MAGIC):]
    header_bytes, _, body = rest.partition(b"\n")
    header = json.loads(header_bytes.decode("utf-8"))
    params: Dict[str, np.ndarray] = {}
    opt_arrays: Dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        a = np.frombuffer(body, dtype="<f8", count=count, offset=offset).reshape(shape).copy()
        offset += count * 8
        name = entry["name"]
        if name.startswith("param:"):
            params[name[6:]] = a
        else:
            opt_arrays[name[4:]] = a
    ec = EncoderConfig(**header["encoder"])
    hc = HeadConfig(**header["head"])
    bundle = ModelBundle(encoder=ec, head=hc, n_tags=header["n_tags"],
                         vocab_size=header["vocab_size"],
                         vocab_hash=header["vocab_hash"], params=params)
    opt_payload = (header["opt"], opt_arrays) if header["opt"] is not None else None
    return bundle, opt_payload


def copy_params(params: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}
