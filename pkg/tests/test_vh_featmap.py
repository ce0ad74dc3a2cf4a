import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from iconannot.corpus import BoundingBox, VHNode
from iconannot.textproc import HashedTextEncoder
from iconannot.vh_featmap import (
    COVER_MEAN,
    VHFusion,
    aggregate,
    aggregate_nodes,
    calc_overlay,
    node_feature,
    project_and_fuse,
)

from oracles import brute_overlay, central_diff_check, naive_aggregate, naive_fuse


def random_box(rng):
    x = np.sort(rng.uniform(0, 1, 2))
    y = np.sort(rng.uniform(0, 1, 2))
    if x[0] == x[1] or y[0] == y[1]:
        return BoundingBox(0, 0, 1, 1)
    return BoundingBox(x[0], y[0], x[1], y[1])


class TestOverlay:
    def test_full(self):
        assert calc_overlay(BoundingBox(0, 0, 1, 1), 2, 2, 3).all()

    def test_quarter(self):
        o = calc_overlay(BoundingBox(0, 0, 0.5, 0.5), 4, 4, 1)[:, :, 0]
        expected = np.zeros((4, 4))
        expected[:2, :2] = 1
        assert np.array_equal(o, expected)

    def test_offset_box(self):
        o = calc_overlay(BoundingBox(0.5, 0.25, 1.0, 0.75), 4, 4, 2)
        expected = np.zeros((4, 4))
        expected[1:3, 2:4] = 1
        assert np.array_equal(o[:, :, 0], expected)
        assert np.array_equal(o[:, :, 1], expected)

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            calc_overlay(BoundingBox(0, 0, 1, 1), 0, 4, 1)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            H, W = rng.integers(1, 33, 2)
            b = random_box(rng)
            assert np.array_equal(calc_overlay(b, H, W, 2)[:, :, 0].astype(bool), brute_overlay(b.as_tuple(), H, W))

    def test_translation_by_one_cell(self):
        H, W = 8, 16
        a = BoundingBox(2 / W, 1 / H, 5 / W, 4 / H)
        b = BoundingBox(3 / W, 1 / H, 6 / W, 4 / H)
        oa = calc_overlay(a, H, W, 1)[:, :, 0]
        ob = calc_overlay(b, H, W, 1)[:, :, 0]
        assert np.array_equal(np.roll(oa, 1, axis=1), ob)


class TestNodeFeature:
    def test_one_cell(self):
        o = np.zeros((2, 2, 2))
        o[0, 1] = 1
        out = node_feature(np.array([1.0, 2.0]), o)
        expected = np.zeros((2, 2, 2))
        expected[0, 1] = [1, 2]
        assert np.array_equal(out, expected)

    def test_all_ones_and_zeros(self):
        t = np.array([0.5, -1.0, 3.0])
        assert np.array_equal(node_feature(t, np.ones((3, 2, 3))), np.broadcast_to(t, (3, 2, 3)))
        assert not node_feature(t, np.zeros((3, 2, 3))).any()

    def test_mismatch(self):
        with pytest.raises(ValueError):
            node_feature(np.ones(3), np.ones((2, 2, 2)))


class TestAggregate:
    def test_single_full(self):
        t = np.array([1.0, -2.0])
        g = aggregate([(t, BoundingBox(0, 0, 1, 1))], 3, 4, 2)
        assert np.array_equal(g, np.broadcast_to(t, (3, 4, 2)))

    def test_two_full(self):
        t1, t2 = np.array([1.0, 0.5]), np.array([-3.0, 2.0])
        full = BoundingBox(0, 0, 1, 1)
        g = aggregate([(t1, full), (t2, full)], 2, 2, 2)
        assert np.array_equal(g, np.broadcast_to(t1 + t2, (2, 2, 2)))

    def test_left_right_halves_factor_of_s(self):
        t1, t2 = np.array([1.0, 3.0]), np.array([-2.0, 0.25])
        g = aggregate([(t1, BoundingBox(0, 0, 0.5, 1)), (t2, BoundingBox(0.5, 0, 1, 1))], 2, 4, 2)
        assert np.array_equal(g[:, :2], np.broadcast_to(2 * t1, (2, 2, 2)))
        assert np.array_equal(g[:, 2:], np.broadcast_to(2 * t2, (2, 2, 2)))

    def test_cover_mean_variant(self):
        t1, t2 = np.array([1.0]), np.array([3.0])
        nodes = [(t1, BoundingBox(0, 0, 0.5, 1)), (t2, BoundingBox(0.5, 0, 1, 1))]
        g = aggregate(nodes, 2, 4, 1, COVER_MEAN)
        assert g[0, 0, 0] == 1.0 and g[0, 3, 0] == 3.0

    def test_empty(self):
        assert not aggregate([], 3, 3, 4).any()

    def test_uncovered_zero(self):
        g = aggregate([(np.ones(2), BoundingBox(0, 0, 0.5, 0.5))], 4, 4, 2)
        assert not g[2:].any() and not g[:, 2:].any()

    def test_matches_naive_loop(self):
        rng = np.random.default_rng(1)
        for _ in range(60):
            H, W, K = int(rng.integers(1, 9)), int(rng.integers(1, 9)), int(rng.integers(1, 4))
            S = int(rng.integers(0, 21))
            nodes = [(rng.standard_normal(K), random_box(rng)) for _ in range(S)]
            ref = naive_aggregate([(t, b.as_tuple()) for t, b in nodes], H, W, K)
            np.testing.assert_allclose(aggregate(nodes, H, W, K), ref, atol=1e-9, rtol=0)

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 8))
    def test_permutation_invariant(self, seed, S):
        rng = np.random.default_rng(seed)
        nodes = [(rng.standard_normal(3), random_box(rng)) for _ in range(S)]
        perm = rng.permutation(S)
        a = aggregate(nodes, 6, 7, 3)
        b = aggregate([nodes[i] for i in perm], 6, 7, 3)
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_aggregate_nodes_uses_encoder(self):
        enc = HashedTextEncoder(8)
        leaf = VHNode("a.ImageButton", "x:id/menu", BoundingBox(0, 0, 1, 1))
        g = aggregate_nodes(enc, [leaf], 2, 2)
        np.testing.assert_allclose(g[1, 1], enc.encode(["image", "button", "menu"]))
        g2 = aggregate_nodes(enc, [leaf], 2, 2, rid_overrides={0: "x:id/search"})
        np.testing.assert_allclose(g2[0, 0], enc.encode(["image", "button", "search"]))


def _fusion(K, D, hidden, seed=0):
    torch.manual_seed(seed)
    return VHFusion(K, D, hidden).double()


class TestFusion:
    def test_zero_params_identity(self):
        f = _fusion(3, 4, 3)
        for p in f.parameters():
            torch.nn.init.zeros_(p)
        g = torch.randn(2, 3, 5, 6, dtype=torch.float64)
        c = torch.randn(2, 4, 5, 6, dtype=torch.float64)
        assert torch.equal(project_and_fuse(g, c, f), c)

    def test_zero_g_zero_bias_identity(self):
        f = _fusion(3, 4, 3)
        torch.nn.init.zeros_(f.proj1.bias)
        torch.nn.init.zeros_(f.proj2.bias)
        c = torch.randn(1, 4, 3, 3, dtype=torch.float64)
        assert torch.equal(f(torch.zeros(1, 3, 3, 3, dtype=torch.float64), c), c)

    def test_spatial_mismatch(self):
        f = _fusion(2, 2, 2)
        with pytest.raises(ValueError):
            f(torch.zeros(1, 2, 3, 3, dtype=torch.float64), torch.zeros(1, 2, 3, 4, dtype=torch.float64))

    def test_matches_naive_loop(self):
        f = _fusion(3, 4, 5, seed=2)
        g = torch.randn(1, 3, 3, 4, dtype=torch.float64)
        c = torch.randn(1, 4, 3, 4, dtype=torch.float64)
        out = f(g, c)[0].detach().numpy()
        ref = naive_fuse(
            g[0].numpy(), c[0].numpy(),
            f.proj1.weight[:, :, 0, 0].detach().numpy(), f.proj1.bias.detach().numpy(),
            f.proj2.weight[:, :, 0, 0].detach().numpy(), f.proj2.bias.detach().numpy(),
        )
        np.testing.assert_allclose(out, ref, atol=1e-10, rtol=0)

    def test_gradients_finite_difference(self):
        f = _fusion(3, 2, 4, seed=3)
        g = torch.randn(2, 3, 3, 3, dtype=torch.float64, requires_grad=True)
        c = torch.randn(2, 2, 3, 3, dtype=torch.float64, requires_grad=True)
        weights = torch.randn(2, 2, 3, 3, dtype=torch.float64)

        def fn():
            return (f(g, c) * weights).sum()

        assert central_diff_check(fn, [*f.parameters(), g, c]) < 1e-4
