"""Message-passing network mapping normalised stencil geometry to operator weights.

The forward pass and its reverse-mode gradient are written out by hand on
numpy arrays over a batch of stencils ``(B, n+1, ...)``:

* ``MLP_emb``: node feature (2) -> latent (F_h)
* per graph layer: ``m = MLP_msg(v)``; each node aggregates the messages of
  its graph neighbours with scaled dot-product attention
  ``softmax_k(<v_j, v_k> / sqrt(F_h))``; ``v <- MLP_upd([v, aggregate])``
* ``MLP_out``: neighbour latents (F_h) -> weight (1); the centre emits none.

Every MLP uses ``mlp_hidden`` tanh layers of width ``F_h`` and a linear
output layer. Parameters live in a single flat vector described by
:class:`ParamLayout`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidArgument, NumericalFailure
from ..taylor import monomial_vector, target_moments
from .graph import batch_features


@dataclass(frozen=True)
class _Entry:
    name: str
    shape: tuple
    start: int

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def slice(self):
        return slice(self.start, self.start + self.size)


class ParamLayout:
    """Maps ``"<mlp>.<layer>.<W|b>"`` names to contiguous slices of the flat vector."""

    def __init__(self, config):
        self.config = config
        F, H, L = config.f_h, config.mlp_hidden, config.graph_layers
        self.mlps = {"emb": [2] + [F] * H + [F]}
        for l in range(L):
            self.mlps[f"msg{l}"] = [F] + [F] * H + [F]
            self.mlps[f"upd{l}"] = [2 * F] + [F] * H + [F]
        self.mlps["out"] = [F] + [F] * H + [1]
        self.entries = {}
        start = 0
        for mlp, dims in self.mlps.items():
            for k in range(len(dims) - 1):
                for part, shape in (("W", (dims[k], dims[k + 1])), ("b", (dims[k + 1],))):
                    e = _Entry(f"{mlp}.{k}.{part}", shape, start)
                    self.entries[e.name] = e
                    start += e.size
        self.size = start

    def __len__(self):
        return self.size

    def unpack(self, theta):
        theta = np.asarray(theta)
        if theta.shape != (self.size,):
            raise InvalidArgument(f"parameter vector has shape {theta.shape}, layout expects ({self.size},)")
        return {name: theta[e.slice].reshape(e.shape) for name, e in self.entries.items()}

    def pack(self, arrays, dtype=np.float64):
        theta = np.empty(self.size, dtype=dtype)
        for name, e in self.entries.items():
            theta[e.slice] = np.asarray(arrays[name]).ravel()
        return theta

    def describe(self):
        return [(e.name, e.shape, e.start, e.start + e.size) for e in self.entries.values()]


def init_params(config, seed):
    """Uniform ``(-1/sqrt(fan_in), 1/sqrt(fan_in))`` initialisation."""
    layout = ParamLayout(config)
    rng = np.random.default_rng(seed)
    theta = np.empty(layout.size)
    for e in layout.entries.values():
        fan_in = e.shape[0] if e.name.endswith("W") else layout.entries[e.name[:-1] + "W"].shape[0]
        bound = 1.0 / np.sqrt(fan_in)
        theta[e.slice] = rng.uniform(-bound, bound, e.size)
    return theta


def _mlp_forward(P, prefix, depth, x):
    lead = x.shape[:-1]
    a = x.reshape(-1, x.shape[-1])
    acts = [a]
    for k in range(depth):
        z = a @ P[f"{prefix}.{k}.W"]
        z += P[f"{prefix}.{k}.b"]
        a = np.tanh(z, out=z) if k < depth - 1 else z
        acts.append(a)
    return a.reshape(lead + (a.shape[-1],)), acts


def _mlp_backward(P, G, prefix, depth, acts, d):
    lead = d.shape[:-1]
    d = d.reshape(-1, d.shape[-1])
    for k in reversed(range(depth)):
        if k < depth - 1:
            d = d * (1.0 - acts[k + 1] ** 2)
        W = P[f"{prefix}.{k}.W"]
        G[f"{prefix}.{k}.W"] += acts[k].T @ d
        G[f"{prefix}.{k}.b"] += d.sum(axis=0)
        d = d @ W.T
    return d.reshape(lead + (d.shape[-1],))


def _attention(h, m, adj, F):
    """Attention-weighted aggregation over an arbitrary adjacency (reference path)."""
    S = h @ h.swapaxes(-1, -2) / np.sqrt(F)
    S = np.where(adj, S, -np.inf)
    S = S - S.max(axis=-1, keepdims=True)
    E = np.exp(S)
    alpha = E / E.sum(axis=-1, keepdims=True)
    return alpha @ m, alpha


def _star_attention(h, m, F):
    """Same aggregation specialised to the star graph.

    Neighbours see only the centre, so their softmax is a single unit weight;
    the centre attends over all neighbours.
    """
    s = np.einsum("bf,bkf->bk", h[:, 0], h[:, 1:]) / np.sqrt(F)
    s -= s.max(axis=1, keepdims=True)
    e = np.exp(s)
    alpha = e / e.sum(axis=1, keepdims=True)
    agg = np.empty_like(m)
    agg[:, 1:] = m[:, :1]
    agg[:, 0] = np.einsum("bk,bkf->bf", alpha, m[:, 1:])
    return agg, alpha


def _star_attention_backward(h, m, alpha, d_agg, F):
    dm = np.zeros_like(m)
    dh = np.zeros_like(h)
    dm[:, 0] = d_agg[:, 1:].sum(axis=1)
    d0 = d_agg[:, 0]
    dm[:, 1:] = alpha[..., None] * d0[:, None, :]
    d_alpha = np.einsum("bf,bkf->bk", d0, m[:, 1:])
    ds = alpha * (d_alpha - np.sum(alpha * d_alpha, axis=1, keepdims=True)) / np.sqrt(F)
    dh[:, 0] = np.einsum("bk,bkf->bf", ds, h[:, 1:])
    dh[:, 1:] = ds[..., None] * h[:, :1]
    return dh, dm


class NemdoNet:
    """Stateless forward/backward for one :class:`ModelConfig`."""

    def __init__(self, config):
        self.config = config
        self.layout = ParamLayout(config)
        self.depth = config.mlp_hidden + 1

    def n_params(self):
        return self.layout.size

    def forward(self, theta, offsets_hat, keep_cache=False):
        """Normalised weights ``(B, n)`` for normalised offsets ``(B, n, 2)``."""
        cfg = self.config
        theta = np.asarray(theta)
        dtype = theta.dtype if theta.dtype == np.float32 else np.float64
        offsets_hat = np.asarray(offsets_hat, dtype=dtype)
        squeeze = offsets_hat.ndim == 2
        if squeeze:
            offsets_hat = offsets_hat[None]
        if offsets_hat.shape[1] != cfg.stencil_n:
            raise InvalidArgument(f"stencil has {offsets_hat.shape[1]} neighbours, model expects {cfg.stencil_n}")
        P = self.layout.unpack(theta)
        F = cfg.f_h
        feats = batch_features(offsets_hat)

        v, emb_acts = _mlp_forward(P, "emb", self.depth, feats)
        layers = []
        for l in range(cfg.graph_layers):
            m, msg_acts = _mlp_forward(P, f"msg{l}", self.depth, v)
            agg, alpha = _star_attention(v, m, F)
            u = np.concatenate([v, agg], axis=-1)
            v_new, upd_acts = _mlp_forward(P, f"upd{l}", self.depth, u)
            layers.append((v, m, alpha, msg_acts, upd_acts))
            v = v_new
        out, out_acts = _mlp_forward(P, "out", self.depth, v[:, 1:])
        w = out[..., 0]
        if not np.all(np.isfinite(w)):
            bad = np.flatnonzero(~np.all(np.isfinite(w), axis=1))
            raise NumericalFailure(
                f"non-finite weights for {len(bad)} stencil(s), first at batch row {bad[0]}; "
                f"max |theta| = {np.max(np.abs(theta)):.3e}")
        if squeeze:
            w = w[0]
        if keep_cache:
            return w, (P, emb_acts, layers, out_acts)
        return w

    def backward(self, cache, d_w):
        """Gradient with respect to the flat parameters given ``dL/dw`` of shape ``(B, n)``."""
        cfg = self.config
        P, emb_acts, layers, out_acts = cache
        G = {k: np.zeros_like(v) for k, v in P.items()}
        F = cfg.f_h
        d_out = np.asarray(d_w, dtype=P["out.0.W"].dtype)[..., None]
        d_v_nb = _mlp_backward(P, G, "out", self.depth, out_acts, d_out)
        B = d_v_nb.shape[0]
        d_v = np.concatenate([np.zeros((B, 1, F), d_v_nb.dtype), d_v_nb], axis=1)
        for l in reversed(range(cfg.graph_layers)):
            v, m, alpha, msg_acts, upd_acts = layers[l]
            d_u = _mlp_backward(P, G, f"upd{l}", self.depth, upd_acts, d_v)
            d_prev = d_u[..., :F].copy()
            d_h_att, d_m = _star_attention_backward(v, m, alpha, d_u[..., F:], F)
            d_prev += d_h_att
            d_prev += _mlp_backward(P, G, f"msg{l}", self.depth, msg_acts, d_m)
            d_v = d_prev
        _mlp_backward(P, G, "emb", self.depth, emb_acts, d_v)
        return self.layout.pack(G, dtype=d_out.dtype)


def moment_loss_from_weights(w_hat, offsets_hat, kind, p):
    """Mean over stencils of ``|sum_j X(x_hat_j) w_hat_j - M|^2``."""
    X = monomial_vector(np.asarray(offsets_hat, dtype=float), p)
    r = np.einsum("bjq,bj->bq", X, np.asarray(w_hat)) - target_moments(kind, p)
    return float(np.mean(np.sum(r * r, axis=1)))


def loss(theta, offsets_hat, config, net=None):
    net = net or NemdoNet(config)
    w = net.forward(theta, offsets_hat)
    return moment_loss_from_weights(w, offsets_hat, config.kind, config.order_p)


def loss_and_grad(theta, offsets_hat, config, net=None):
    """Loss and flat gradient; float32 ``theta`` runs the whole pass in single precision."""
    net = net or NemdoNet(config)
    theta = np.asarray(theta)
    dtype = theta.dtype if theta.dtype == np.float32 else np.float64
    offsets_hat = np.asarray(offsets_hat, dtype=dtype)
    if len(offsets_hat) == 0:
        raise InvalidArgument("empty batch")
    w, cache = net.forward(theta, offsets_hat, keep_cache=True)
    X = monomial_vector(offsets_hat, config.order_p)
    r = np.einsum("bjq,bj->bq", X, w) - target_moments(config.kind, config.order_p)
    B = len(offsets_hat)
    value = float(np.sum(r * r, dtype=np.float64) / B)
    d_w = (2.0 / B) * np.einsum("bjq,bq->bj", X, r)
    return value, net.backward(cache, d_w)


def grad(theta, offsets_hat, config, net=None):
    return loss_and_grad(theta, offsets_hat, config, net)[1]
