"""Encoder-decoder policy: GAT encoders, context encoder, clipped pointer
attention, and the masked action distribution.

Both graphs go through separate input projections followed by multi-head
GAT layers (optionally shared between the two encoders). The decoder
builds a fixed-size context query from the current/placed program-node
embeddings and scores every physical node with a multi-head glimpse
feeding a single clipped compatibility head.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .circuit import ProgramGraph
from .diffcore import Tensor
from .errors import ConfigError, InfeasibleStateError, ShapeError
from .topology import CouplingGraph, coupling_graph_from_dict

NORM_KINDS = ("layer", "batch", "graph")
CONTEXT_KINDS = ("project_concat", "concat_project", "stack_project")

_NORM_EPS = 1e-5
_BN_MOMENTUM = 0.1


@dataclass
class EncoderConfig:
    layers: int = 4
    heads: int = 8
    embed_dim: int = 128
    norm_kind: str = "batch"

    def __post_init__(self):
        if self.embed_dim % self.heads:
            raise ConfigError(
                f"embed_dim {self.embed_dim} not divisible by heads {self.heads}"
            )
        if self.norm_kind not in NORM_KINDS:
            raise ConfigError(f"unknown norm kind '{self.norm_kind}'")


@dataclass
class DecoderConfig:
    heads: int = 16
    context_kind: str = "concat_project"
    clip: float = 10.0
    context_dim: int = 128
    stack_pool: str = "mean"  # mean | sum | last

    def __post_init__(self):
        if self.heads < 1:
            raise ConfigError("decoder needs at least one head")
        if self.clip <= 0:
            raise ConfigError("clip must be positive")
        if self.context_kind not in CONTEXT_KINDS:
            raise ConfigError(f"unknown context kind '{self.context_kind}'")
        if self.context_dim % self.heads:
            raise ConfigError(
                f"context_dim {self.context_dim} not divisible by heads {self.heads}"
            )
        if self.context_kind == "project_concat" and self.context_dim % 2:
            raise ConfigError("project_concat needs an even context_dim")


@dataclass
class NodeEmbeddings:
    program: Tensor  # n x d_e
    physical: Tensor  # N x d_e


class ParamStore:
    """Named trainable tensors plus non-trainable buffers."""

    def __init__(self):
        self.params = {}
        self.buffers = {}

    def add(self, name, array):
        self.params[name] = Tensor(array, requires_grad=True)
        return self.params[name]

    def __getitem__(self, name):
        return self.params[name]

    def zero_grad(self):
        for t in self.params.values():
            t.grad = None

    def grads(self):
        return {
            k: t.grad for k, t in self.params.items() if t.grad is not None
        }

    def data(self):
        return {k: t.data for k, t in self.params.items()}

    def num_values(self):
        return sum(t.data.size for t in self.params.values())


def _uniform_init(rng, shape, fan_in):
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class PolicyNetwork:
    def __init__(self, cg: CouplingGraph, enc_cfg: EncoderConfig,
                 dec_cfg: DecoderConfig, prog_feature_dim: int,
                 feature_kind: str = "onehot", shared_encoder: bool = False,
                 seed: int = 0):
        self.cg = cg
        self.enc_cfg = enc_cfg
        self.dec_cfg = dec_cfg
        self.prog_feature_dim = prog_feature_dim
        self.feature_kind = feature_kind
        self.shared_encoder = shared_encoder
        self.seed = seed
        self.store = ParamStore()
        self._cg_adj = self._with_self_loops(cg.adjacency_matrix())
        self._phys_feats = np.eye(cg.num_physical)
        self._init_params(np.random.default_rng(seed))

    # --- construction ----------------------------------------------

    @staticmethod
    def _with_self_loops(adj):
        adj = adj.copy()
        np.fill_diagonal(adj, True)
        return adj

    def _encoder_names(self):
        return ("shared",) if self.shared_encoder else ("prog", "phys")

    def _enc_prefix(self, which):
        return "enc.shared" if self.shared_encoder else f"enc.{which}"

    def _init_params(self, rng):
        e = self.enc_cfg
        d_e, d_c = e.embed_dim, self.dec_cfg.context_dim
        dh = d_e // e.heads
        add = self.store.add

        add("in.prog.W", _uniform_init(rng, (d_e, self.prog_feature_dim),
                                       self.prog_feature_dim))
        add("in.phys.W", _uniform_init(rng, (d_e, self.cg.num_physical),
                                       self.cg.num_physical))
        for which in self._encoder_names():
            for layer in range(e.layers):
                p = f"enc.{which}.l{layer}"
                add(f"{p}.W", _uniform_init(rng, (d_e, d_e), d_e))
                add(f"{p}.a_src", _uniform_init(rng, (e.heads, dh), dh))
                add(f"{p}.a_dst", _uniform_init(rng, (e.heads, dh), dh))
                add(f"{p}.norm.g", np.ones(d_e))
                add(f"{p}.norm.b", np.zeros(d_e))
                if e.norm_kind == "batch":
                    self.store.buffers[f"{p}.norm.mean"] = np.zeros(d_e)
                    self.store.buffers[f"{p}.norm.var"] = np.ones(d_e)

        kind = self.dec_cfg.context_kind
        if kind == "project_concat":
            add("ctx.W", _uniform_init(rng, (d_c // 2, d_e), d_e))
            add("ctx.start", _uniform_init(rng, (d_e,), d_e))
        elif kind == "concat_project":
            add("ctx.W", _uniform_init(rng, (d_c, 2 * d_e), 2 * d_e))
            add("ctx.start", _uniform_init(rng, (d_e,), d_e))
        else:
            if d_c != d_e:
                raise ConfigError(
                    "stack_project requires context_dim == embed_dim"
                )
            add("ctx.W", _uniform_init(rng, (d_e, d_e), d_e))

        add("ptr.W_Q", _uniform_init(rng, (d_c, d_c), d_c))
        add("ptr.W_K", _uniform_init(rng, (d_c, d_e), d_e))
        add("ptr.W_V", _uniform_init(rng, (d_c, d_e), d_e))
        add("ptr.W_G", _uniform_init(rng, (d_c, d_c), d_c))
        add("ptr.W_Kf", _uniform_init(rng, (d_c, d_e), d_e))

    # --- encoder ----------------------------------------------------

    def _norm(self, h, prefix, train, update_running):
        kind = self.enc_cfg.norm_kind
        g = self.store[f"{prefix}.g"]
        b = self.store[f"{prefix}.b"]
        if kind == "layer":
            m = h.mean(axis=1, keepdims=True)
            centered = h - m
            var = dc.tmean(dc.mul(centered, centered), axis=1, keepdims=True)
            h_hat = dc.mul(centered, dc.powi(var + _NORM_EPS, -0.5))
            return h_hat * g.reshape(1, -1) + b.reshape(1, -1)
        if kind == "graph" or train:
            m = h.mean(axis=0, keepdims=True)
            centered = h - m
            var = dc.tmean(dc.mul(centered, centered), axis=0, keepdims=True)
            if kind == "batch" and update_running:
                rm = self.store.buffers[f"{prefix}.mean"]
                rv = self.store.buffers[f"{prefix}.var"]
                rm += _BN_MOMENTUM * (m.data.ravel() - rm)
                rv += _BN_MOMENTUM * (var.data.ravel() - rv)
        else:
            m = Tensor(self.store.buffers[f"{prefix}.mean"].reshape(1, -1))
            var = Tensor(self.store.buffers[f"{prefix}.var"].reshape(1, -1))
            centered = h - m
        h_hat = dc.mul(centered, dc.powi(var + _NORM_EPS, -0.5))
        return h_hat * g.reshape(1, -1) + b.reshape(1, -1)

    def _gat_layer(self, h, adj, prefix, train, update_running):
        e = self.enc_cfg
        n = h.shape[0]
        k, dh = e.heads, e.embed_dim // e.heads
        z = dc.matmul(h, self.store[f"{prefix}.W"].T)  # (n, d_e)
        zh = z.reshape(n, k, dh)
        s_src = dc.tsum(zh * self.store[f"{prefix}.a_src"].reshape(1, k, dh), axis=2)
        s_dst = dc.tsum(zh * self.store[f"{prefix}.a_dst"].reshape(1, k, dh), axis=2)
        scores = dc.leaky_relu(
            s_src.reshape(n, 1, k) + s_dst.reshape(1, n, k), 0.2
        )
        scores = dc.masked_fill(scores, ~adj[:, :, None], -np.inf)
        alpha = dc.softmax(scores, axis=1)  # (n, n, k)
        agg = dc.tsum(
            alpha.reshape(n, n, k, 1) * zh.reshape(1, n, k, dh), axis=1
        )  # (n, k, dh)
        out = dc.elu(agg).reshape(n, e.embed_dim)
        return self._norm(out, f"{prefix}.norm", train, update_running)

    def _encode_graph(self, feats, adj, which, train, update_running):
        if feats.shape[1] != self.store[f"in.{which}.W"].shape[1]:
            raise ShapeError(
                "feature dimension does not match the input projection",
                feats.shape, self.store[f"in.{which}.W"].shape,
            )
        h = dc.matmul(Tensor(feats), self.store[f"in.{which}.W"].T)
        prefix = self._enc_prefix(which)
        for layer in range(self.enc_cfg.layers):
            h = self._gat_layer(h, adj, f"{prefix}.l{layer}", train,
                                update_running)
        return h

    def encode(self, pg: ProgramGraph, train=False, update_running=None
               ) -> NodeEmbeddings:
        if update_running is None:
            update_running = train
        adj_p = self._with_self_loops(pg.undirected_adjacency())
        program = self._encode_graph(pg.node_features, adj_p, "prog", train,
                                     update_running)
        physical = self._encode_graph(self._phys_feats, self._cg_adj, "phys",
                                      train, update_running)
        return NodeEmbeddings(program, physical)

    # --- decoder ----------------------------------------------------

    def make_context(self, emb: NodeEmbeddings, t: int, order) -> Tensor:
        kind = self.dec_cfg.context_kind
        prog = emb.program
        w = self.store["ctx.W"]
        h_c = dc.gather(prog, int(order[t]))
        if kind == "stack_project":
            if t == 0:
                return dc.matmul(w, h_c)
            stacked = dc.gather(prog, np.asarray(order[: t + 1], dtype=np.intp))
            proj = dc.matmul(stacked, w.T)  # (t+1, d_e)
            if self.dec_cfg.stack_pool == "sum":
                return dc.tsum(proj, axis=0)
            if self.dec_cfg.stack_pool == "last":
                return dc.gather(proj, t)
            return dc.tmean(proj, axis=0)
        h_p = self.store["ctx.start"] if t == 0 else dc.gather(prog, int(order[t - 1]))
        if kind == "project_concat":
            return dc.concat([dc.matmul(w, h_c), dc.matmul(w, h_p)])
        return dc.matmul(w, dc.concat([h_c, h_p]))

    def pointer_logits(self, context: Tensor, physical: Tensor) -> Tensor:
        d_c = self.dec_cfg.context_dim
        m = self.dec_cfg.heads
        d = d_c // m
        n_phys = physical.shape[0]
        s = self.store

        q = dc.matmul(s["ptr.W_Q"], context)  # (d_c,)
        keys = dc.matmul(physical, s["ptr.W_K"].T)  # (N, d_c)
        vals = dc.matmul(physical, s["ptr.W_V"].T)
        scores = dc.tsum(
            dc.mul(keys, q.reshape(1, d_c)).reshape(n_phys, m, d), axis=2
        ) * Tensor(1.0 / np.sqrt(d))  # (N, m)
        weights = dc.softmax(scores, axis=0)
        glimpse = dc.tsum(
            weights.reshape(n_phys, m, 1) * vals.reshape(n_phys, m, d), axis=0
        ).reshape(d_c)
        q_final = dc.matmul(s["ptr.W_G"], glimpse)
        keys_final = dc.matmul(physical, s["ptr.W_Kf"].T)  # (N, d_c)
        compat = dc.matmul(keys_final, q_final) * Tensor(1.0 / np.sqrt(d_c))
        return dc.tanh(compat) * Tensor(self.dec_cfg.clip)

    @staticmethod
    def masked_distribution(logits: Tensor, feasible) -> Tensor:
        feasible = np.asarray(feasible, dtype=bool)
        if not feasible.any():
            raise InfeasibleStateError("no feasible action remains")
        return dc.softmax(dc.masked_fill(logits, ~feasible, -np.inf), axis=0)

    # --- checkpointing ----------------------------------------------

    def config_header(self):
        return {
            "version": 1,
            "d_e": self.enc_cfg.embed_dim,
            "d_c": self.dec_cfg.context_dim,
            "layers": self.enc_cfg.layers,
            "heads": self.enc_cfg.heads,
            "m_heads": self.dec_cfg.heads,
            "norm_kind": self.enc_cfg.norm_kind,
            "context_kind": self.dec_cfg.context_kind,
            "clip": self.dec_cfg.clip,
            "stack_pool": self.dec_cfg.stack_pool,
            "n_max": self.prog_feature_dim,
            "N": self.cg.num_physical,
            "feature_kind": self.feature_kind,
            "shared_encoder": self.shared_encoder,
            "seed": self.seed,
            "topology_hash": self.cg.topology_hash(),
        }

    def save(self, path):
        doc = {
            "header": self.config_header(),
            "device": self.cg.to_dict(),
            "params": {
                k: {"shape": list(t.data.shape), "values": t.data.ravel().tolist()}
                for k, t in self.store.params.items()
            },
            "buffers": {
                k: v.tolist() for k, v in self.store.buffers.items()
            },
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            doc = json.load(fh)
        h = doc["header"]
        cg = coupling_graph_from_dict(doc["device"])
        enc = EncoderConfig(layers=h["layers"], heads=h["heads"],
                            embed_dim=h["d_e"], norm_kind=h["norm_kind"])
        dec = DecoderConfig(heads=h["m_heads"], context_kind=h["context_kind"],
                            clip=h["clip"], context_dim=h["d_c"],
                            stack_pool=h.get("stack_pool", "mean"))
        net = cls(cg, enc, dec, h["n_max"], feature_kind=h["feature_kind"],
                  shared_encoder=h["shared_encoder"], seed=h.get("seed", 0))
        for name, entry in doc["params"].items():
            net.store.params[name] = Tensor(
                np.asarray(entry["values"]).reshape(entry["shape"]),
                requires_grad=True,
            )
        for name, values in doc["buffers"].items():
            net.store.buffers[name] = np.asarray(values, dtype=np.float64)
        return net
