import numpy as np
import pytest

from nanops import ShapeError, make_rng, tensor_from_parts
from nanops.network import LayerGraph, LayerSpec
from nanops.tensor import Kernel4
from nanops.uncertainty import (McaConfig, mca_run, perturb, render_ascii,
                                significant_bits)

from reference import ref_significant_bits


def pool_unpool_graph():
    return LayerGraph(layers=[LayerSpec("p", "maxpool", k=2, s=2),
                              LayerSpec("u", "maxunpool", pool="p")])


class TestPerturb:
    def test_zero_unchanged(self):
        x = tensor_from_parts((1, 1, 2, 2), [0.0, -0.0, 1.0, 2.0])
        y = perturb(x, McaConfig(), make_rng(0))
        assert y[0, 0, 0, 0] == 0.0
        assert y[0, 0, 0, 1] == 0.0

    def test_nan_unchanged(self):
        x = tensor_from_parts((1, 1, 2, 2), [np.nan, 1, 2, 3])
        y = perturb(x, McaConfig(), make_rng(0))
        assert np.isnan(y[0, 0, 0, 0])
        assert not np.isnan(y[0, 0]).reshape(-1)[1:].any()

    @pytest.mark.parametrize("t", [4, 10, 24])
    def test_relative_bound_with_storage_rounding(self, t):
        # bound holds up to the half-ulp float32 storage rounding step
        rng = make_rng(3)
        vals = (rng.random(4096, dtype=np.float32) * 100 - 50)
        x = tensor_from_parts((1, 1, 64, 64), vals)
        y = perturb(x, McaConfig(precision_bits=t), make_rng(7))
        xd, yd = x.astype(np.float64), y.astype(np.float64)
        ulp = np.float64(np.spacing(np.abs(x), dtype=np.float32))
        limit = np.abs(xd) * 2.0 ** -t + ulp / 2
        ok = np.abs(yd - xd) <= limit
        assert ok.all()

    def test_actually_perturbs_off_binade_floor(self):
        x = tensor_from_parts((1, 1, 32, 32), np.full(1024, 1.5))
        y = perturb(x, McaConfig(precision_bits=24), make_rng(1))
        assert (y != x).any()

    def test_deterministic(self):
        x = tensor_from_parts((1, 1, 4, 4), np.arange(16) + 1.0)
        a = perturb(x, McaConfig(), make_rng(9))
        b = perturb(x, McaConfig(), make_rng(9))
        np.testing.assert_array_equal(a, b)


class TestSignificantBits:
    def test_identical_samples_full_bits(self):
        s = [tensor_from_parts((1, 1, 2, 2), [1, 2, 3, 4])] * 3
        np.testing.assert_array_equal(significant_bits(s),
                                      np.full((1, 1, 2, 2), 24, np.float32))

    def test_alternating_sign_zero_bits(self):
        a = tensor_from_parts((1, 1, 1, 1), [1.0])
        b = tensor_from_parts((1, 1, 1, 1), [-1.0])
        got = significant_bits([a, b, a, b])
        assert got[0, 0, 0, 0] == 0.0

    def test_relative_spread_2_pow_10(self):
        # frozen from the direct estimator: alternating 1 +/- 2^-10
        deltas = np.array([1 + 2**-10, 1 - 2**-10] * 5)
        samples = [tensor_from_parts((1, 1, 1, 1), [d]) for d in deltas]
        want = ref_significant_bits(deltas.reshape(-1, 1))
        got = significant_bits(samples)[0, 0, 0, 0]
        assert 9.0 <= got <= 11.0
        assert abs(got - want) < 1e-3

    def test_nan_sample_scores_zero(self):
        a = tensor_from_parts((1, 1, 1, 1), [1.0])
        b = tensor_from_parts((1, 1, 1, 1), [np.nan])
        assert significant_bits([a, b])[0, 0, 0, 0] == 0.0

    def test_permutation_invariant_across_samples(self):
        rng = make_rng(12)
        samples = [tensor_from_parts((1, 1, 2, 2), rng.random(4, np.float32))
                   for _ in range(6)]
        a = significant_bits(samples)
        b = significant_bits(samples[::-1])
        np.testing.assert_array_equal(a, b)

    def test_shape_mismatch(self):
        a = tensor_from_parts((1, 1, 1, 2), [1.0, 2.0])
        b = tensor_from_parts((1, 1, 2, 1), [1.0, 2.0])
        with pytest.raises(ShapeError):
            significant_bits([a, b])

    def test_needs_two_samples(self):
        a = tensor_from_parts((1, 1, 1, 1), [1.0])
        with pytest.raises(ShapeError):
            significant_bits([a])


class TestMcaRun:
    def test_relu_identity_keeps_bits(self):
        # oracle: significant_bits of directly perturbed copies stays >= t-2
        x = tensor_from_parts((1, 1, 8, 8), make_rng(2).random(64, np.float32) + 1.0)
        g = LayerGraph(layers=[LayerSpec("r", "relu")])
        maps = mca_run(g, x, McaConfig(), "standard")
        assert (maps[0] >= 22.0).all()

    def test_constant_background_is_noise(self):
        x = tensor_from_parts((1, 1, 16, 16), np.full(256, 1.5))
        maps, samples = mca_run(pool_unpool_graph(), x, McaConfig(),
                                "standard", keep_samples=True)
        filled = (samples[-1] != 0).any(axis=0)
        assert float(np.asarray(maps[-1])[filled].mean()) < 2.0

    def test_distinct_foreground_is_stable(self):
        vals = make_rng(3).permutation(256).astype(np.float32) + 2.0
        x = tensor_from_parts((1, 1, 16, 16), vals)
        maps, samples = mca_run(pool_unpool_graph(), x, McaConfig(),
                                "standard", keep_samples=True)
        filled = (samples[-1] != 0).any(axis=0)
        assert float(np.asarray(maps[-1])[filled].mean()) >= 22.0

    def test_conservative_excludes_instability(self):
        # the ambiguity that destabilizes standard unpooling becomes NaN
        # markers under the conservative variant; the surviving background
        # positions are exact zeros and keep full precision
        x = tensor_from_parts((1, 1, 16, 16), np.full(256, 1.5))
        cfg = McaConfig()
        maps_std, samp_std = mca_run(pool_unpool_graph(), x, cfg, "standard",
                                     keep_samples=True)
        maps_con, samp_con = mca_run(pool_unpool_graph(), x, cfg,
                                     "conservative", keep_samples=True)
        filled_std = (samp_std[-1] != 0).any(axis=0)
        nan_marked = np.isnan(samp_con[-1]).any(axis=0)
        background = ~nan_marked
        std_mean = float(np.asarray(maps_std[-1])[filled_std].mean())
        con_mean = float(np.asarray(maps_con[-1])[background].mean())
        assert std_mean < con_mean
        assert con_mean >= 22.0


def test_render_ascii_shape_and_ramp():
    art = render_ascii(np.array([[0.0, 24.0], [12.0, 24.0]]))
    rows = art.split("\n")
    assert len(rows) == 2 and len(rows[0]) == 2
    assert rows[0][0] == " " and rows[0][1] == "@"
