"""Block IDs, causal masks and the leakage-free products used for parallel training.

A mask row ``M[i]`` lists what element ``i`` may read. The products below are
written with ``*``, ``@`` and ``swapaxes`` only, so they work unchanged on
numpy arrays and on (batched) torch tensors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BlockMask:
    block_ids: tuple[int, ...]

    def __post_init__(self):
        ids = tuple(int(b) for b in self.block_ids)
        object.__setattr__(self, "block_ids", ids)
        if any(b < 1 for b in ids):
            raise ValueError("block ids start at 1")

    @property
    def n(self) -> int:
        return len(self.block_ids)

    @property
    def mask(self) -> np.ndarray:
        ids = np.asarray(self.block_ids)
        return (ids[:, None] >= ids[None, :]).astype(np.float64)


def edge_block_id(mask: BlockMask, i: int, j: int) -> int:
    return max(mask.block_ids[i], mask.block_ids[j])


def edge_block_ids(block_ids: np.ndarray) -> np.ndarray:
    ids = np.asarray(block_ids)
    return np.maximum(ids[:, None], ids[None, :])


def _as_matrix(mask):
    return mask.mask if isinstance(mask, BlockMask) else mask


def masked_attention_product(a, x, mask):
    """``(A * M) x``: row i only aggregates entries that i may read."""
    m = _as_matrix(mask)
    rows = x.shape[0] if x.ndim == 1 else x.shape[-2]  # a vector or a (..., n, d) feature matrix
    if a.shape[-1] != rows or a.shape[-2] != a.shape[-1] or m.shape[-1] != a.shape[-1]:
        raise ValueError(f"shape mismatch: A {tuple(a.shape)}, x {tuple(x.shape)}, M {tuple(m.shape)}")
    return (a * m) @ x


def causal_matmul(a, b, mask):
    """Leakage-free generalisation of ``A @ B``.

    Entry (i, j) is ``sum_k A[i,k] B[k,j] (M[i,k] or M[j,k])``: it reads only what
    i or j may read. Holds for any binary mask, not just block-ID masks.

    Computed as ``A (B*M^T) + (A*M) (B*(1-M^T))``, which splits the union into
    "j may read k" and "only i may read k". This equals the inclusion-exclusion
    form ``(A*M)B + A(B*M^T) - (A*M)(B*M^T)`` with one product fewer and no
    cancellation.
    """
    m = _as_matrix(mask)
    if a.shape[-1] != b.shape[-2] or a.shape[-2:] != b.shape[-2:] or m.shape[-2:] != a.shape[-2:]:
        raise ValueError(f"shape mismatch: A {tuple(a.shape)}, B {tuple(b.shape)}, M {tuple(m.shape)}")
    mt = m.swapaxes(-1, -2)
    return a @ (b * mt) + (a * m) @ (b * (1 - mt))


def causal_matmul_three_term(a, b, mask):
    """Inclusion-exclusion form of :func:`causal_matmul`, kept as a cross-check."""
    m = _as_matrix(mask)
    mt = m.swapaxes(-1, -2)
    am = a * m
    bm = b * mt
    return am @ b + a @ bm - am @ bm


@dataclass
class VirtualLayout:
    """2N-node layout: real nodes first (original indices), then one virtual twin per node."""

    twin_of: np.ndarray  # augmented index -> original node index
    virtual: np.ndarray  # 1 for virtual twins
    block_ids: np.ndarray  # virtual twins share their original's block ID

    @property
    def n(self) -> int:
        return int(self.twin_of.shape[0])

    def original_to_augmented(self) -> np.ndarray:
        """Column 0: real position, column 1: virtual twin position."""
        n = self.n // 2
        return np.stack([np.arange(n), np.arange(n) + n], axis=1)

    def visibility(self) -> np.ndarray:
        return visibility_mask(self.block_ids, self.virtual)


def visibility_mask(block_ids, virtual) -> np.ndarray:
    """Read mask for a layout of clean (real) and noisy (virtual) nodes.

    Real nodes follow the block-ID rule among real nodes. A virtual node of
    block i reads real nodes of blocks < i and virtual nodes of block i only.
    With only one virtual block on top of its prefix this is the plain
    block-ID rule; with one virtual twin per block it lets every block be
    predicted from exactly the context it would see on its own.
    """
    ids = np.asarray(block_ids)
    v = np.asarray(virtual).astype(bool)
    real_r, real_c = ~v[:, None], ~v[None, :]
    m = real_r & real_c & (ids[:, None] >= ids[None, :])
    m |= v[:, None] & real_c & (ids[None, :] < ids[:, None])
    m |= v[:, None] & v[None, :] & (ids[:, None] == ids[None, :])
    return m


def augment_virtual_blocks(phi) -> VirtualLayout:
    """Append a virtual twin for every node, carrying the same block ID."""
    phi = np.asarray(phi, dtype=np.int64)
    n = phi.shape[0]
    return VirtualLayout(
        twin_of=np.concatenate([np.arange(n), np.arange(n)]),
        virtual=np.concatenate([np.zeros(n, dtype=np.int64), np.ones(n, dtype=np.int64)]),
        block_ids=np.concatenate([phi, phi]),
    )
