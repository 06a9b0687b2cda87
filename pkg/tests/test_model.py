"""Attention weight invariants, refinement geometry, and model wiring."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsda import diffcore as dc
from hsda.diffcore import Tensor, make_rng
from hsda.errors import ConfigError, ProtocolError
from hsda.model import (
    DiscrepancyNet,
    GatingMix,
    HsdaNet,
    HybridBlock,
    ImageStem,
    ModelConfig,
    Rfm1d,
    Rfm2d,
    SignalEmbed,
    load_checkpoint,
    multiscale_concat,
    restore_parameters,
    save_checkpoint,
    saw,
    toy_config,
)


def rand_tensor(rng, shape, requires_grad=False):
    return Tensor(rng.normal(size=shape), requires_grad=requires_grad)


def toy_inputs(seed=0, canvas=16, t_len=32):
    rng = np.random.default_rng(seed)
    img = rng.normal(size=(3, canvas, canvas))
    sig = rng.normal(size=(9, t_len))
    return img, sig


# ---------------------------------------------------------------------------


class TestAttentionWeights:
    def test_saw_rows_sum_to_one(self):
        rng = np.random.default_rng(0)
        q, k = rand_tensor(rng, (6, 4)), rand_tensor(rng, (6, 4))
        bias = rand_tensor(rng, (6, 6))
        w = saw(q, k, bias)
        assert w.shape == (6, 6)
        np.testing.assert_allclose(w.values.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(w.values > 0)

    def test_saw_bias_row_shift_invariance(self):
        # softmax ignores a constant added to a whole logit row
        rng = np.random.default_rng(1)
        q, k = rand_tensor(rng, (4, 3)), rand_tensor(rng, (4, 3))
        bias = rng.normal(size=(4, 4))
        shifted = bias.copy()
        shifted[2] += 7.5
        a = saw(q, k, Tensor(bias))
        b = saw(q, k, Tensor(shifted))
        np.testing.assert_allclose(a.values, b.values, atol=1e-6)

    def test_saw_key_permutation_permutes_columns(self):
        rng = np.random.default_rng(2)
        q, k = rand_tensor(rng, (5, 4)), rand_tensor(rng, (5, 4))
        zero_bias = Tensor(np.zeros((5, 5)))
        perm = np.array([3, 0, 4, 1, 2])
        a = saw(q, k, zero_bias)
        b = saw(q, Tensor(k.values[perm]), zero_bias)
        np.testing.assert_allclose(a.values[:, perm], b.values, atol=1e-6)

    def test_daw_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        net = DiscrepancyNet(4, make_rng(0, "init"))
        q, k = rand_tensor(rng, (7, 4)), rand_tensor(rng, (7, 4))
        w = net(q, k)
        assert w.shape == (7, 7)
        np.testing.assert_allclose(w.values.sum(axis=1), 1.0, atol=1e-6)
        assert np.all(w.values > 0)

    def test_daw_worked_example_single_feature(self):
        # isolate the kernel-1 path: logits become |q_i - k_j| exactly
        net = DiscrepancyNet(1, make_rng(0, "init"))
        net.conv5.w.values[:] = 0.0
        net.conv3.w.values[:] = 0.0
        net.conv1.w.values[:] = 1.0
        net.reduce.fc1.w.values[:] = 1.0
        net.reduce.fc1.b.values[:] = 0.0
        net.reduce.fc2.w.values[:] = 1.0
        net.reduce.fc2.b.values[:] = 0.0
        q = Tensor(np.array([[1.0], [3.0]]))
        k = Tensor(np.array([[2.0], [5.0]]))
        w = net(q, k)
        expected_logits = np.array([[1.0, 4.0], [1.0, 2.0]])
        e = np.exp(expected_logits - expected_logits.max(axis=1, keepdims=True))
        np.testing.assert_allclose(w.values, e / e.sum(axis=1, keepdims=True), atol=1e-6)

    def test_gate_strictly_inside_unit_interval(self):
        rng = np.random.default_rng(4)
        mixer = GatingMix(make_rng(1, "init"))
        s = dc.softmax_rows(rand_tensor(rng, (8, 8)))
        d = dc.softmax_rows(rand_tensor(rng, (8, 8)))
        _, g = mixer(s, d)
        assert g.shape == (8, 1)
        assert np.all(g.values > 0.0) and np.all(g.values < 1.0)

    def test_mix_rows_sum_to_one_many_draws(self):
        mixer = GatingMix(make_rng(2, "init"))
        rng = np.random.default_rng(5)
        for _ in range(50):
            n = rng.integers(2, 12)
            s = dc.softmax_rows(rand_tensor(rng, (n, n)))
            d = dc.softmax_rows(rand_tensor(rng, (n, n)))
            mix, _ = mixer(s, d)
            np.testing.assert_allclose(mix.values.sum(axis=1), 1.0, atol=1e-6)
            assert np.all(mix.values > 0)

    def test_gate_saturation_selects_one_branch(self):
        rng = np.random.default_rng(6)
        s = dc.softmax_rows(rand_tensor(rng, (5, 5)))
        d = dc.softmax_rows(rand_tensor(rng, (5, 5)))
        mixer = GatingMix(make_rng(3, "init"))
        mixer.gate.w.values[:] = 0.0
        mixer.gate.b.values[:] = 30.0
        mix, g = mixer(s, d)
        np.testing.assert_allclose(g.values, 1.0, atol=1e-9)
        np.testing.assert_allclose(mix.values, s.values, atol=1e-8)
        mixer.gate.b.values[:] = -30.0
        mix, g = mixer(s, d)
        np.testing.assert_allclose(mix.values, d.values, atol=1e-8)

    @given(st.integers(0, 10_000))
    @settings(max_examples=25, deadline=None)
    def test_hybrid_weights_row_stochastic_property(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 11))
        width = 8
        block = HybridBlock(width, 2, n, make_rng(seed, "init"))
        collect = []
        block(rand_tensor(rng, (n, width)), collect)
        assert len(collect) == 2
        for entry in collect:
            for key in ("saw", "daw", "mix"):
                np.testing.assert_allclose(
                    entry[key].values.sum(axis=1), 1.0, atol=1e-5
                )
            g = entry["gate"].values
            assert np.all(g > 0) and np.all(g < 1)


class TestHybridBlock:
    def test_fresh_block_is_identity(self):
        # zero-started projection and FFN tail make the residuals exact
        rng = np.random.default_rng(7)
        block = HybridBlock(16, 2, 6, make_rng(4, "init"))
        x = rand_tensor(rng, (6, 16))
        out = block(x)
        np.testing.assert_array_equal(out.values, x.values)

    def test_block_not_token_permutation_equivariant(self):
        # position bias and key-axis convolutions see token order
        rng = np.random.default_rng(8)
        block = HybridBlock(8, 2, 5, make_rng(5, "init"))
        for head in block.heads:
            head.bias.values[:] = rng.normal(size=(5, 5))
        block.proj.w.values[:] = rng.normal(size=(8, 8)) * 0.5
        x = rng.normal(size=(5, 8))
        perm = np.array([4, 2, 0, 3, 1])
        out = block(Tensor(x)).values
        out_perm = block(Tensor(x[perm])).values
        assert not np.allclose(out[perm], out_perm, atol=1e-6)

    def test_block_gradients_match_numerics(self):
        # fresh weights leave the softmax rows near-uniform, where the gate's
        # row-max statistic sits on an argmax tie; spread them out first
        n, width = 4, 8
        with dc.using_dtype(np.float64):
            block = HybridBlock(width, 2, n, make_rng(6, "init"))
            gen = np.random.default_rng(9)
            for _, p in block.parameters():
                p.values = p.values + gen.normal(size=p.shape) * 0.3
            x = gen.normal(size=(n, width))
            weights = gen.normal(size=(n, width))

            def loss_fn():
                return dc.sum_(dc.mul(block(Tensor(x)), Tensor(weights)))

            errs = dc.check_parameter_gradients(
                loss_fn,
                block.parameter_dict(),
                samples_per_param=4,
                rng=np.random.default_rng(10),
            )
        assert max(errs.values()) < 1e-4

    def test_width_must_divide_heads(self):
        with pytest.raises(ValueError):
            HybridBlock(10, 3, 4, make_rng(0, "init"))


class TestRefinement:
    def test_rfm2d_halving_chain(self):
        sizes = [16]
        for _ in range(3):
            sizes.append((sizes[-1] - 1) // 2 + 1)
        assert sizes == [16, 8, 4, 2]
        rng = make_rng(7, "init")
        x = rand_tensor(np.random.default_rng(11), (4, 16, 16))
        for in_hw in sizes[:-1]:
            rfm = Rfm2d(4, 8, in_hw, rng)
            x, z = rfm(x)
            assert x.shape == (4, rfm.out_hw, rfm.out_hw)
            assert z.shape == (1, 8)

    def test_rfm2d_unit_map_is_fixed_point(self):
        rfm = Rfm2d(3, 4, 1, make_rng(8, "init"))
        out, _ = rfm(rand_tensor(np.random.default_rng(12), (3, 1, 1)))
        assert out.shape == (3, 1, 1)

    def test_fresh_rfm2d_branch_is_inert(self):
        rfm = Rfm2d(3, 4, 6, make_rng(9, "init"))
        x = rand_tensor(np.random.default_rng(13), (3, 6, 6))
        refined, _ = rfm(x)
        np.testing.assert_array_equal(refined.values, rfm.pool(x).values)

    def test_rfm1d_halves_with_floor(self):
        rng = make_rng(10, "init")
        x = rand_tensor(np.random.default_rng(14), (5, 9))
        rfm = Rfm1d(5, 9, 4, 9, rng)
        out, z = rfm(x)
        assert out.shape == (5, 4)
        assert z.shape == (9, 4)
        out2, _ = Rfm1d(5, 9, 4, 1, rng)(rand_tensor(np.random.default_rng(15), (5, 1)))
        assert out2.shape == (5, 1)

    def test_fresh_rfm1d_branch_is_inert(self):
        rfm = Rfm1d(4, 9, 4, 10, make_rng(11, "init"))
        x = rand_tensor(np.random.default_rng(16), (4, 10))
        refined, _ = rfm(x)
        np.testing.assert_array_equal(
            refined.values, dc.adaptive_max_pool1d(x, 5).values
        )

    def test_multiscale_concat_widens_every_token(self):
        rng = np.random.default_rng(17)
        tokens = rand_tensor(rng, (10, 16))
        z_prime = rand_tensor(rng, (1, 8))
        z_dprime = rand_tensor(rng, (9, 8))
        out = multiscale_concat(tokens, z_prime, z_dprime)
        assert out.shape == (10, 24)
        np.testing.assert_array_equal(out.values[:, :16], tokens.values)
        np.testing.assert_array_equal(out.values[0, 16:], z_prime.values[0])
        np.testing.assert_array_equal(out.values[1:, 16:], z_dprime.values)

    def test_multiscale_concat_rejects_mismatches(self):
        rng = np.random.default_rng(18)
        tokens = rand_tensor(rng, (10, 16))
        with pytest.raises(dc.ShapeError):
            multiscale_concat(tokens, rand_tensor(rng, (2, 8)), rand_tensor(rng, (9, 8)))
        with pytest.raises(dc.ShapeError):
            multiscale_concat(tokens, rand_tensor(rng, (1, 8)), rand_tensor(rng, (9, 4)))
        with pytest.raises(dc.ShapeError):
            multiscale_concat(tokens, rand_tensor(rng, (1, 8)), rand_tensor(rng, (5, 8)))


class TestEmbeddings:
    def test_stem_shapes_and_stride_arithmetic(self):
        cfg = toy_config()
        stem = ImageStem(cfg, make_rng(12, "init"))
        img = rand_tensor(np.random.default_rng(19), (3, 16, 16))
        token, map2d = stem(img)
        assert token.shape == (1, cfg.d)
        assert map2d.shape == (cfg.stem_channels, 2, 2)

    def test_stem_rejects_wrong_canvas(self):
        stem = ImageStem(toy_config(), make_rng(13, "init"))
        with pytest.raises(ConfigError):
            stem(rand_tensor(np.random.default_rng(20), (3, 32, 32)))

    def test_signal_embed_shapes_any_length(self):
        cfg = toy_config()
        embed = SignalEmbed(cfg, make_rng(14, "init"))
        for t_len in (5, 16, 57, 400):
            tokens, map1d = embed(rand_tensor(np.random.default_rng(t_len), (9, t_len)))
            assert tokens.shape == (9, cfg.d)
            assert map1d.shape == (cfg.signal_map_channels, cfg.signal_map_len)

    def test_signal_embed_rejects_wrong_channel_count(self):
        embed = SignalEmbed(toy_config(), make_rng(15, "init"))
        with pytest.raises(ConfigError):
            embed(rand_tensor(np.random.default_rng(21), (7, 32)))


class TestNetwork:
    def test_toy_forward_shapes(self):
        cfg = toy_config()
        net = HsdaNet(cfg, seed=0)
        img, sig = toy_inputs()
        logits, f = net(img, sig)
        assert logits.shape == (1, 2)
        assert f.shape == (1, cfg.d)
        assert np.all(np.isfinite(logits.values))

    def test_stage_widths_grow_by_d_prime(self):
        cfg = ModelConfig()
        assert [cfg.stage_width(l) for l in (1, 2, 3, 4)] == [128, 192, 256, 320]
        flat = toy_config()
        assert [flat.stage_width(l) for l in (1, 2, 3, 4)] == [16, 24, 32, 40]

    def test_default_config_forward_runs(self):
        net = HsdaNet(ModelConfig(), seed=0)
        img, sig = toy_inputs(canvas=128, t_len=100)
        logits, f = net(img, sig)
        assert logits.shape == (1, 2)
        assert f.shape == (1, 128)

    def test_multiscale_off_keeps_width_flat(self):
        cfg = toy_config(use_multiscale=False)
        assert [cfg.stage_width(l) for l in (1, 2, 3, 4)] == [16, 16, 16, 16]
        net = HsdaNet(cfg, seed=0)
        assert not any(name.startswith("rfm") for name in net.parameter_dict())
        img, sig = toy_inputs()
        logits, _ = net(img, sig)
        assert np.all(np.isfinite(logits.values))

    def test_zero_inputs_stay_finite(self):
        net = HsdaNet(toy_config(), seed=0)
        logits, f = net(np.zeros((3, 16, 16)), np.zeros((9, 32)))
        assert np.all(np.isfinite(logits.values))
        assert np.all(np.isfinite(f.values))

    def test_same_seed_same_outputs(self):
        img, sig = toy_inputs(seed=3)
        a = HsdaNet(toy_config(), seed=42)(img, sig)[0].values
        b = HsdaNet(toy_config(), seed=42)(img, sig)[0].values
        np.testing.assert_array_equal(a, b)
        c = HsdaNet(toy_config(), seed=43)(img, sig)[0].values
        assert not np.array_equal(a, c)

    def test_collect_reports_every_block_and_head(self):
        cfg = toy_config()
        net = HsdaNet(cfg, seed=0)
        collect = []
        img, sig = toy_inputs()
        net(img, sig, collect)
        assert len(collect) == cfg.stages * cfg.blocks_per_stage * cfg.heads
        for entry in collect:
            assert entry["saw"].shape == (cfg.n_tokens, cfg.n_tokens)

    def test_gradients_flow_to_all_parameters(self):
        net = HsdaNet(toy_config(), seed=0)
        img, sig = toy_inputs(seed=5)
        with dc.Tape() as tape:
            logits, _ = net(img, sig)
            loss = dc.sum_(dc.mul(logits, logits))
            dc.backward(loss, tape)
        missing = [n for n, t in net.parameter_dict().items() if t.grad is None]
        assert missing == []


class TestCheckpoint:
    def test_roundtrip_restores_outputs_exactly(self, tmp_path):
        cfg = toy_config()
        net = HsdaNet(cfg, seed=1)
        img, sig = toy_inputs(seed=6)
        want = net(img, sig)[0].values
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(path, net.parameter_dict(), {"seed": 1, "d": cfg.d})
        other = HsdaNet(cfg, seed=99)
        assert not np.array_equal(other(img, sig)[0].values, want)
        loaded, config = load_checkpoint(path)
        restore_parameters(other, loaded)
        np.testing.assert_array_equal(other(img, sig)[0].values, want)
        assert config["seed"] == "1"
        assert config["d"] == str(cfg.d)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.ckpt"
        path.write_bytes(b"NOPE" + b"\x00" * 16)
        with pytest.raises(ProtocolError):
            load_checkpoint(str(path))

    def test_truncated_file_rejected(self, tmp_path):
        net = HsdaNet(toy_config(), seed=0)
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(path, net.parameter_dict(), {})
        blob = open(path, "rb").read()
        open(path, "wb").write(blob[: len(blob) // 2])
        with pytest.raises(ProtocolError):
            load_checkpoint(path)

    def test_mismatched_names_rejected(self, tmp_path):
        net = HsdaNet(toy_config(), seed=0)
        path = str(tmp_path / "model.ckpt")
        params = dict(net.parameter_dict())
        params.pop(next(iter(params)))
        save_checkpoint(path, params, {})
        loaded, _ = load_checkpoint(path)
        with pytest.raises(ProtocolError):
            restore_parameters(net, loaded)

    def test_values_stored_as_float32(self, tmp_path):
        with dc.using_dtype(np.float64):
            net = HsdaNet(toy_config(), seed=0)
        path = str(tmp_path / "model.ckpt")
        save_checkpoint(path, net.parameter_dict(), {})
        loaded, _ = load_checkpoint(path)
        for arr in loaded.values():
            assert arr.dtype == np.float32


class TestModelGradients:
    def test_toy_model_gradcheck_sampled(self):
        with dc.using_dtype(np.float64):
            net = HsdaNet(toy_config(), seed=0)
            gen = np.random.default_rng(22)
            for _, p in net.parameters():
                p.values = p.values + gen.normal(size=p.shape) * 0.2
            img, sig = toy_inputs(seed=7)
            target = gen.normal(size=(1, 2))

            def loss_fn():
                logits, _ = net(img, sig)
                return dc.sum_(dc.mul(logits, Tensor(target)))

            params = net.parameter_dict()
            rng = np.random.default_rng(23)
            picked = {
                name: params[name]
                for name in rng.choice(sorted(params), size=24, replace=False)
            }
            errs = dc.check_parameter_gradients(
                loss_fn, picked, samples_per_param=2, rng=rng
            )
        assert max(errs.values()) < 1e-4
