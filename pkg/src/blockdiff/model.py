"""Hybrid node-attention / PPGN denoiser with causal masking.

Each layer runs (a) masked multi-head attention over nodes with an additive
bias from the edge between them, (b) a PPGN edge update whose matrix product is
replaced by :func:`blockdiff.causal.causal_matmul`, and (c) node/edge
cross-talk. Every non-elementwise step reads only through the visibility mask,
so the network is both permutation equivariant and leakage free.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, fields

import torch
from torch import nn

from .causal import causal_matmul

log = logging.getLogger(__name__)

BACKBONES = ("hybrid", "ppgn", "transformer")


@dataclass
class DenoiserConfig:
    layers: int = 4
    node_dim: int = 64
    edge_dim: int = 32
    heads: int = 4
    max_block_id: int = 32
    max_degree: int = 32
    t_max: int = 20
    max_block_size: int = 32
    k_v: int = 1
    k_e: int = 2
    backbone: str = "hybrid"

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, int) and v <= 0:
                raise ValueError(f"{f.name} must be positive (got {v})")
        if self.node_dim % self.heads:
            raise ValueError("node_dim must be divisible by heads")
        if self.k_e < 2:
            raise ValueError("k_e counts the 'no edge' class and must be >= 2")
        if self.backbone not in BACKBONES:
            raise ValueError(f"backbone must be one of {BACKBONES}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class DenoiserInputs:
    """Batched, padded network inputs.

    ``mask[b, i, j]`` is True when node i may read node j. Padded nodes read
    only themselves and are read by nobody.
    """

    node_labels: torch.Tensor  # (B, n) long
    edge_labels: torch.Tensor  # (B, n, n) long
    t: torch.Tensor  # (B,) long
    block_ids: torch.Tensor  # (B, n) long, >= 1 for valid nodes
    degrees: torch.Tensor  # (B, n) long
    virtual: torch.Tensor  # (B, n) long
    mask: torch.Tensor  # (B, n, n) bool
    node_valid: torch.Tensor  # (B, n) bool

    def permute(self, perm: torch.Tensor) -> "DenoiserInputs":
        """Relabel nodes: entry i moves to position perm[i] (same for every graph)."""
        inv = torch.empty_like(perm)
        inv[perm] = torch.arange(perm.numel())
        return DenoiserInputs(
            node_labels=self.node_labels[:, inv],
            edge_labels=self.edge_labels[:, inv][:, :, inv],
            t=self.t,
            block_ids=self.block_ids[:, inv],
            degrees=self.degrees[:, inv],
            virtual=self.virtual[:, inv],
            mask=self.mask[:, inv][:, :, inv],
            node_valid=self.node_valid[:, inv],
        )


@dataclass
class DenoiserOutput:
    node_logits: torch.Tensor  # (B, n, k_v)
    edge_logits: torch.Tensor  # (B, n, n, k_e), symmetric
    size_logits: torch.Tensor  # (B, R, max_block_size + 1); row r-1 reads prefix blocks 1..r
    degree_logits: torch.Tensor  # (B, R, max_degree + 1)


def sinusoid(x: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal features of a scalar in [0, 1]."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=x.dtype) / max(half, 1))
    ang = 1000.0 * x.unsqueeze(-1) * freqs
    out = torch.cat([torch.sin(ang), torch.cos(ang)], dim=-1)
    if out.shape[-1] < dim:
        out = torch.cat([out, torch.zeros(*out.shape[:-1], dim - out.shape[-1], dtype=x.dtype)], dim=-1)
    return out


def mlp(d_in: int, d_hidden: int, d_out: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(d_in, d_hidden), nn.SiLU(), nn.Linear(d_hidden, d_out))


class HybridLayer(nn.Module):
    def __init__(self, cfg: DenoiserConfig):
        super().__init__()
        dn, de = cfg.node_dim, cfg.edge_dim
        self.heads = cfg.heads
        self.use_attn = cfg.backbone in ("hybrid", "transformer")
        self.use_ppgn = cfg.backbone in ("hybrid", "ppgn")
        if self.use_attn:
            self.qkv = nn.Linear(dn, 3 * dn)
            self.edge_bias = nn.Linear(de, cfg.heads)
            self.attn_out = nn.Linear(dn, dn)
            self.norm_attn = nn.LayerNorm(dn)
            self.ffn = mlp(dn, 2 * dn, dn)
            self.norm_ffn = nn.LayerNorm(dn)
        if self.use_ppgn:
            self.mlp_a = mlp(de, de, de)
            self.mlp_b = mlp(de, de, de)
            self.mlp_mix = mlp(2 * de, de, de)
            self.norm_ppgn = nn.LayerNorm(de)
        self.node_to_edge = nn.Linear(dn, de)
        self.norm_edge = nn.LayerNorm(de)
        self.edge_to_node = nn.Linear(de, dn)
        self.norm_node = nn.LayerNorm(dn)

    def attention(self, h, e, mask):
        B, n, dn = h.shape
        dh = dn // self.heads
        q, k, v = self.qkv(h).view(B, n, 3, self.heads, dh).permute(2, 0, 3, 1, 4)
        scores = q @ k.transpose(-1, -2) / math.sqrt(dh) + self.edge_bias(e).permute(0, 3, 1, 2)
        scores = scores.masked_fill(~mask.unsqueeze(1), float("-inf"))
        out = torch.softmax(scores, dim=-1) @ v
        out = out.transpose(1, 2).reshape(B, n, dn)
        h = self.norm_attn(h + self.attn_out(out))
        return self.norm_ffn(h + self.ffn(h))

    def ppgn(self, e, mask_f, union_count):
        a = self.mlp_a(e).permute(0, 3, 1, 2)
        b = self.mlp_b(e).permute(0, 3, 1, 2)
        prod = causal_matmul(a, b, mask_f.unsqueeze(1)) / union_count.unsqueeze(1)
        mixed = self.mlp_mix(torch.cat([e, prod.permute(0, 2, 3, 1)], dim=-1))
        return self.norm_ppgn(e + mixed)

    def forward(self, h, e, mask, mask_f, union_count):
        if self.use_attn:
            h = self.attention(h, e, mask)
        if self.use_ppgn:
            e = self.ppgn(e, mask_f, union_count)
        p = self.node_to_edge(h)
        e = self.norm_edge(e + p.unsqueeze(2) + p.unsqueeze(1))
        agg = (mask_f.unsqueeze(-1) * e).sum(2) / mask_f.sum(2, keepdim=True)
        h = self.norm_node(h + self.edge_to_node(agg))
        return h, e


class Denoiser(nn.Module):
    """Predicts clean node/edge labels and, via prefix pooling, the next block's size and degree."""

    def __init__(self, cfg: DenoiserConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.clamp_warnings = 0
        dn, de = cfg.node_dim, cfg.edge_dim
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.node_label_emb = nn.Embedding(cfg.k_v, dn)
            self.edge_label_emb = nn.Embedding(cfg.k_e, de)
            self.time_proj = nn.Linear(dn, dn)
            self.block_emb = nn.Embedding(cfg.max_block_id + 1, dn)
            self.degree_emb = nn.Embedding(cfg.max_degree + 1, dn)
            self.virtual_emb = nn.Embedding(2, dn)
            self.edge_block_emb = nn.Embedding(cfg.max_block_id + 1, de)
            self.layers = nn.ModuleList(HybridLayer(cfg) for _ in range(cfg.layers))
            self.node_head = mlp(dn, dn, cfg.k_v)
            self.edge_head = mlp(de, de, cfg.k_e)
            self.size_head = mlp(2 * dn, dn, cfg.max_block_size + 1)
            self.degree_head = mlp(2 * dn, dn, cfg.max_degree + 1)

    def _clamp(self, x: torch.Tensor, hi: int) -> torch.Tensor:
        over = int((x > hi).sum())
        if over:
            self.clamp_warnings += over
            log.warning("%d ids/degrees exceed embedding table size %d; clamped", over, hi + 1)
            x = x.clamp(max=hi)
        return x

    def embed_inputs(self, inp: DenoiserInputs) -> tuple[torch.Tensor, torch.Tensor]:
        cfg = self.cfg
        dtype = self.time_proj.weight.dtype
        block_ids = self._clamp(inp.block_ids, cfg.max_block_id)
        degrees = self._clamp(inp.degrees, cfg.max_degree)
        tt = sinusoid(inp.t.to(dtype) / cfg.t_max, cfg.node_dim)
        h = (
            self.node_label_emb(inp.node_labels)
            + self.time_proj(tt).unsqueeze(1)
            + self.block_emb(block_ids)
            + self.degree_emb(degrees)
            + self.virtual_emb(inp.virtual)
        )
        eids = torch.maximum(block_ids.unsqueeze(2), block_ids.unsqueeze(1))
        e = self.edge_label_emb(inp.edge_labels) + self.edge_block_emb(eids)
        return h, e

    def trunk(self, inp: DenoiserInputs) -> tuple[torch.Tensor, torch.Tensor]:
        h, e = self.embed_inputs(inp)
        mask = inp.mask
        mask_f = mask.to(h.dtype)
        ones = torch.ones_like(mask_f)
        union_count = causal_matmul(ones, ones, mask_f)  # |reads(i) ∪ reads(j)|
        for i, layer in enumerate(self.layers):
            h, e = layer(h, e, mask, mask_f, union_count)
            if not (torch.isfinite(h).all() and torch.isfinite(e).all()):
                raise FloatingPointError(f"non-finite activation in layers.{i}")
        return h, e

    def forward(self, inp: DenoiserInputs) -> DenoiserOutput:
        h, e = self.trunk(inp)
        node_logits = self.node_head(h)
        edge_logits = self.edge_head(e + e.transpose(1, 2))
        # prefix r pools real nodes with block id <= r
        R = self.cfg.max_block_id
        r = torch.arange(1, R + 1).view(1, R, 1)
        member = (inp.block_ids.unsqueeze(1) <= r) & (inp.node_valid & (inp.virtual == 0)).unsqueeze(1)
        member = member.to(h.dtype)
        total = member @ h
        count = member.sum(-1, keepdim=True).clamp_min(1.0)
        pooled = torch.cat([total / count, total / self.cfg.max_block_size], dim=-1)
        return DenoiserOutput(node_logits, edge_logits, self.size_head(pooled), self.degree_head(pooled))


def parameter_gradients(model: nn.Module, loss_fn) -> dict[str, torch.Tensor]:
    """Gradient of ``loss_fn(model)`` for every parameter, keyed by parameter path."""
    model.zero_grad(set_to_none=True)
    loss = loss_fn(model)
    loss.backward()
    grads = {}
    for name, p in model.named_parameters():
        g = torch.zeros_like(p) if p.grad is None else p.grad.detach().clone()
        if not torch.isfinite(g).all():
            raise FloatingPointError(f"non-finite gradient for {name}")
        grads[name] = g
    return grads
