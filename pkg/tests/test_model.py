import numpy as np
import pytest
import torch

from blockdiff.kernel import cosine_schedule
from blockdiff.model import DenoiserConfig, parameter_gradients
from blockdiff.training import TrainExample, diffusion_loss, draw_noise, parallel_view
from blockdiff.datasets import grid_graph

from helpers import model, random_inputs, small_config, tiny_config


class TestConfig:
    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError, match="layers"):
            DenoiserConfig(layers=0)

    def test_heads_divide(self):
        with pytest.raises(ValueError, match="divisible"):
            DenoiserConfig(node_dim=10, heads=4)

    def test_backbone(self):
        with pytest.raises(ValueError, match="backbone"):
            DenoiserConfig(backbone="gnn")


def _permute_out(out, perm):
    inv = torch.empty_like(perm)
    inv[perm] = torch.arange(len(perm))
    return out.node_logits[:, inv], out.edge_logits[:, inv][:, :, inv]


@pytest.mark.parametrize("backbone", ["hybrid", "ppgn", "transformer"])
@pytest.mark.parametrize("dtype,tol", [(torch.float64, 1e-10), (torch.float32, 1e-5)])
def test_permutation_equivariance(backbone, dtype, tol):
    m = model(small_config(k_v=3, k_e=3, backbone=backbone), dtype=dtype)
    for seed in range(3):
        inp = random_inputs(9, 3, 3, 3, seed, virtual_top=True)
        perm = torch.from_numpy(np.random.default_rng(seed).permutation(9))
        out = m(inp)
        pout = m(inp.permute(perm))
        node, edge = _permute_out(out, perm)
        torch.testing.assert_close(pout.node_logits, node, atol=tol, rtol=0)
        torch.testing.assert_close(pout.edge_logits, edge, atol=tol, rtol=0)
        # pooled heads are invariant
        torch.testing.assert_close(pout.size_logits, out.size_logits, atol=tol, rtol=0)
        torch.testing.assert_close(pout.degree_logits, out.degree_logits, atol=tol, rtol=0)


def test_edge_logits_exactly_symmetric():
    m = model(small_config(k_e=3))
    out = m(random_inputs(7, 2, 1, 3, 0))
    assert torch.equal(out.edge_logits, out.edge_logits.transpose(1, 2))


def test_deterministic():
    m = model(small_config())
    inp = random_inputs(8, 3, 1, 2, 1)
    a, b = m(inp), m(inp)
    assert torch.equal(a.edge_logits, b.edge_logits) and torch.equal(a.size_logits, b.size_logits)


def test_same_seed_same_parameters():
    a, b = model(small_config(), seed=3), model(small_config(), seed=3)
    for (na, pa), (nb, pb) in zip(a.named_parameters(), b.named_parameters()):
        assert na == nb and torch.equal(pa, pb)


class TestEmbedding:
    def test_zero_tables_leave_label_embeddings(self):
        m = model(small_config(k_v=3, k_e=3))
        with torch.no_grad():
            for emb in (m.block_emb, m.degree_emb, m.virtual_emb, m.edge_block_emb):
                emb.weight.zero_()
            m.time_proj.weight.zero_()
            m.time_proj.bias.zero_()
        inp = random_inputs(6, 3, 3, 3, 2, virtual_top=True)
        h, e = m.embed_inputs(inp)
        torch.testing.assert_close(h, m.node_label_emb(inp.node_labels), rtol=0, atol=0)
        torch.testing.assert_close(e, m.edge_label_emb(inp.edge_labels), rtol=0, atol=0)

    def test_time_only_changes_time_channel(self):
        m = model(small_config())
        inp = random_inputs(6, 2, 1, 2, 3)
        inp.t = torch.tensor([0])
        h0, e0 = m.embed_inputs(inp)
        inp.t = torch.tensor([m.cfg.t_max])
        h1, e1 = m.embed_inputs(inp)
        assert torch.equal(e0, e1)
        diff = h1 - h0
        torch.testing.assert_close(diff, diff[:, :1].expand_as(diff), rtol=0, atol=1e-12)

    def test_equivariant_lookup(self):
        m = model(small_config())
        inp = random_inputs(6, 3, 1, 2, 4)
        perm = torch.tensor([3, 1, 0, 5, 2, 4])
        h, e = m.embed_inputs(inp)
        hp, ep = m.embed_inputs(inp.permute(perm))
        inv = torch.argsort(perm)
        assert torch.equal(hp, h[:, inv]) and torch.equal(ep, e[:, inv][:, :, inv])

    def test_clamps_large_ids_with_warning(self, caplog):
        m = model(small_config(max_block_id=3, max_degree=2))
        inp = random_inputs(6, 5, 1, 2, 5)
        inp.degrees = torch.full_like(inp.degrees, 9)
        m.embed_inputs(inp)
        assert m.clamp_warnings > 0 and "clamped" in caplog.text


def _perturb_later_blocks(inp, r, seed):
    rng = np.random.default_rng(seed)
    ids = inp.block_ids[0].numpy()
    late = ids > r
    nodes = inp.node_labels.clone()
    nodes[0, torch.from_numpy(late)] = torch.from_numpy(rng.integers(0, 3, size=int(late.sum())))
    edges = inp.edge_labels.clone()
    pair_late = np.maximum(ids[:, None], ids[None, :]) > r
    noise = np.triu(rng.integers(0, 3, size=pair_late.shape), 1)
    noise = noise + noise.T
    edges[0] = torch.where(torch.from_numpy(pair_late), torch.from_numpy(noise), edges[0])
    degrees = inp.degrees.clone()
    degrees[0, torch.from_numpy(late)] = torch.from_numpy(rng.integers(0, 5, size=int(late.sum())))
    return type(inp)(nodes, edges, inp.t, inp.block_ids, degrees, inp.virtual, inp.mask, inp.node_valid)


@pytest.mark.parametrize("backbone", ["hybrid", "ppgn", "transformer"])
def test_no_leakage_from_later_blocks(backbone):
    m = model(small_config(k_v=3, k_e=3, backbone=backbone))
    for seed in range(5):
        inp = random_inputs(10, 4, 3, 3, seed)
        ids = inp.block_ids[0].numpy()
        for r in range(1, 4):
            keep = torch.from_numpy(ids <= r)
            keep_pair = keep[:, None] & keep[None, :]
            a = m(inp)
            b = m(_perturb_later_blocks(inp, r, seed + 100))
            assert torch.equal(a.node_logits[0][keep], b.node_logits[0][keep])
            assert torch.equal(a.edge_logits[0][keep_pair], b.edge_logits[0][keep_pair])
            assert torch.equal(a.size_logits[0, :r], b.size_logits[0, :r])


def test_nonfinite_activation_names_layer():
    m = model(small_config())
    with torch.no_grad():
        m.layers[1].norm_node.weight.fill_(float("inf"))
    with pytest.raises(FloatingPointError, match="layers.1"):
        m(random_inputs(5, 2, 1, 2, 0))


def _tiny_loss_setup():
    return TrainExample.build(grid_graph(2, 2), 1, 0)


def test_zero_heads_give_zero_upstream_gradients():
    cfg = tiny_config(k_v=1, k_e=2)
    m = model(cfg)
    with torch.no_grad():
        m.node_head[2].weight.zero_()
        m.edge_head[2].weight.zero_()
    ex = _tiny_loss_setup()
    sched = cosine_schedule(cfg.t_max)
    noise = draw_noise(ex, sched, 0, 0, t=3)
    grads = parameter_gradients(m, lambda mm: diffusion_loss(mm, [parallel_view(ex, noise)], sched, 1).total)
    for name, g in grads.items():
        if name.startswith(("layers", "node_label_emb", "block_emb", "time_proj")):
            assert torch.count_nonzero(g) == 0, name


def test_untouched_embedding_rows_get_zero_gradient():
    cfg = tiny_config(k_v=1, k_e=2)
    m = model(cfg)
    ex = _tiny_loss_setup()
    sched = cosine_schedule(cfg.t_max)
    noise = draw_noise(ex, sched, 0, 0, t=2)
    grads = parameter_gradients(m, lambda mm: diffusion_loss(mm, [parallel_view(ex, noise)], sched, 1).total)
    used = set(ex.degrees.tolist())
    for row in range(cfg.max_degree + 1):
        if row not in used:
            assert torch.count_nonzero(grads["degree_emb.weight"][row]) == 0
    assert torch.count_nonzero(grads["degree_emb.weight"][sorted(used)[0]]) > 0


def test_nonfinite_gradient_names_parameter():
    m = model(tiny_config())
    inp = random_inputs(4, 2, 2, 3, 0)

    def loss(mm):
        return mm(inp).node_logits.sum() * torch.tensor(float("nan"))

    with pytest.raises(FloatingPointError):
        parameter_gradients(m, loss)


def test_backbones_have_distinct_parameters():
    names = {b: {n for n, _ in model(small_config(backbone=b)).named_parameters()} for b in ("hybrid", "ppgn", "transformer")}
    assert not any("qkv" in n for n in names["ppgn"])
    assert not any("mlp_a" in n for n in names["transformer"])
    assert names["ppgn"] | names["transformer"] == names["hybrid"]
