"""Tests for the residual memory network and its analytic gradients."""

import numpy as np
import pytest

from memflow import net


def zero_final_layer(params):
    weights = [w.copy() for w in params.weights]
    biases = [b.copy() for b in params.biases]
    weights[-1][:] = 0.0
    biases[-1][:] = 0.0
    return net.NetworkParams(
        d=params.d, n_mem=params.n_mem, hidden=params.hidden,
        weights=weights, biases=biases,
    )


def fd_gradient(params, z, grad_out, step=1e-5):
    """Central finite differences of (output . grad_out) w.r.t. every parameter."""

    def objective(p):
        return float(net.forward(p, z) @ grad_out)

    grads_w = []
    grads_b = []
    for l in range(params.n_layers):
        gw = np.zeros_like(params.weights[l])
        for idx in np.ndindex(*gw.shape):
            wp = [w.copy() for w in params.weights]
            wm = [w.copy() for w in params.weights]
            wp[l][idx] += step
            wm[l][idx] -= step
            pp = net.NetworkParams(params.d, params.n_mem, params.hidden,
                                   wp, params.biases)
            pm = net.NetworkParams(params.d, params.n_mem, params.hidden,
                                   wm, params.biases)
            gw[idx] = (objective(pp) - objective(pm)) / (2 * step)
        grads_w.append(gw)
        gb = np.zeros_like(params.biases[l])
        for i in range(gb.shape[0]):
            bp = [b.copy() for b in params.biases]
            bm = [b.copy() for b in params.biases]
            bp[l][i] += step
            bm[l][i] -= step
            pp = net.NetworkParams(params.d, params.n_mem, params.hidden,
                                   params.weights, bp)
            pm = net.NetworkParams(params.d, params.n_mem, params.hidden,
                                   params.weights, bm)
            gb[i] = (objective(pp) - objective(pm)) / (2 * step)
        grads_b.append(gb)
    return grads_w, grads_b


class TestInitParams:
    def test_first_layer_shape(self):
        params = net.init_params(d=1, n_mem=30, hidden=[30, 30, 30], seed=0)
        assert params.weights[0].shape == (30, 31)
        assert params.input_width == 31

    def test_deterministic_under_seed(self):
        a = net.init_params(2, 5, [12, 12], seed=42)
        b = net.init_params(2, 5, [12, 12], seed=42)
        for wa, wb in zip(a.weights, b.weights):
            np.testing.assert_array_equal(wa, wb)

    def test_wide_input_configuration(self):
        params = net.init_params(d=3, n_mem=60, hidden=[60, 60, 60], seed=1)
        assert params.input_width == 183
        assert params.weights[0].shape == (60, 183)
        assert params.weights[-1].shape == (3, 60)

    def test_biases_start_at_zero(self):
        params = net.init_params(2, 3, [7], seed=5)
        for b in params.biases:
            np.testing.assert_array_equal(b, np.zeros_like(b))

    def test_weight_scale_tracks_fan_in(self):
        params = net.init_params(1, 199, [400], seed=7)  # fan-in 200
        observed = params.weights[0].std()
        assert 0.8 / np.sqrt(200) < observed < 1.2 / np.sqrt(200)

    def test_empty_hidden_rejected(self):
        with pytest.raises(ValueError, match="hidden"):
            net.init_params(1, 0, [], seed=0)


class TestForward:
    def test_residual_identity_with_zero_final_layer(self):
        rng = np.random.default_rng(2)
        params = zero_final_layer(net.init_params(3, 4, [10, 10], seed=3))
        for _ in range(100):
            z = rng.normal(size=params.input_width)
            np.testing.assert_array_equal(net.forward(params, z), z[:3])

    def test_hand_evaluated_single_unit(self):
        # d=1, n_mem=1, one hidden unit:
        # out = z_now + w_out * tanh(w1*z_now + w2*z_prev + b) + b_out
        w1, w2, b = 0.3, -0.7, 0.2
        w_out, b_out = 1.5, -0.1
        params = net.NetworkParams(
            d=1, n_mem=1, hidden=(1,),
            weights=[np.array([[w1, w2]]), np.array([[w_out]])],
            biases=[np.array([b]), np.array([b_out])],
        )
        z_now, z_prev = 0.8, -0.4
        want = z_now + w_out * np.tanh(w1 * z_now + w2 * z_prev + b) + b_out
        got = net.forward(params, np.array([z_now, z_prev]))
        np.testing.assert_allclose(got, [want], rtol=1e-15)

    def test_zero_input_zero_bias_maps_to_zero(self):
        params = net.init_params(2, 3, [9, 9], seed=11)  # biases are zero
        np.testing.assert_array_equal(
            net.forward(params, np.zeros(params.input_width)), np.zeros(2)
        )

    def test_length_mismatch_rejected(self):
        params = net.init_params(1, 2, [4], seed=0)
        with pytest.raises(ValueError, match="width"):
            net.forward(params, np.zeros(5))

    def test_batch_matches_single(self):
        # last-ulp differences are allowed: BLAS picks different kernels for
        # different batch shapes
        rng = np.random.default_rng(8)
        params = net.init_params(2, 2, [6, 6], seed=8)
        batch = rng.normal(size=(7, params.input_width))
        out = net.forward_batch(params, batch)
        for i in range(7):
            np.testing.assert_allclose(
                out[i], net.forward(params, batch[i]), rtol=1e-13, atol=1e-15
            )

    def test_determinism(self):
        rng = np.random.default_rng(12)
        params = net.init_params(1, 3, [5], seed=12)
        z = rng.normal(size=params.input_width)
        a = net.forward(params, z)
        b = net.forward(params, z)
        np.testing.assert_array_equal(a, b)

    def test_permutation_sensitivity(self):
        # swapping the newest and second-newest blocks changes the residual
        # contribution by exactly (z_prev - z_now) when the network path is
        # zeroed out
        rng = np.random.default_rng(13)
        d = 2
        params = net.init_params(d, 3, [8], seed=13)
        z = rng.normal(size=params.input_width)
        swapped = z.copy()
        swapped[:d], swapped[d : 2 * d] = z[d : 2 * d].copy(), z[:d].copy()
        pz = zero_final_layer(params)
        diff_skip_only = net.forward(pz, swapped) - net.forward(pz, z)
        np.testing.assert_allclose(diff_skip_only, z[d : 2 * d] - z[:d], rtol=1e-15)
        # with the live network the difference is skip change + network change
        diff_full = net.forward(params, swapped) - net.forward(params, z)
        assert not np.allclose(diff_full, diff_skip_only)


class TestBackward:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(31)
        params = net.init_params(d=2, n_mem=3, hidden=[10, 10], seed=31)
        z = rng.normal(size=params.input_width)
        grad_out = rng.normal(size=2)
        grads, _ = net.backward(params, z, grad_out)
        fd_w, fd_b = fd_gradient(params, z, grad_out)
        for l in range(params.n_layers):
            scale = np.maximum(np.abs(fd_w[l]), 1e-8)
            assert (np.abs(grads.weights[l] - fd_w[l]) / scale).max() <= 1e-6
            scale_b = np.maximum(np.abs(fd_b[l]), 1e-8)
            assert (np.abs(grads.biases[l] - fd_b[l]) / scale_b).max() <= 1e-6

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(32)
        params = net.init_params(d=1, n_mem=4, hidden=[6], seed=32)
        z = rng.normal(size=params.input_width)
        grad_out = np.array([1.0])
        _, input_grad = net.backward(params, z, grad_out)
        step = 1e-6
        for i in range(z.shape[0]):
            zp, zm = z.copy(), z.copy()
            zp[i] += step
            zm[i] -= step
            fd = (net.forward(params, zp) - net.forward(params, zm))[0] / (2 * step)
            assert abs(input_grad[i] - fd) <= 1e-7 * max(1.0, abs(fd))

    def test_zero_output_grad_gives_zero_gradients(self):
        params = net.init_params(2, 2, [5], seed=1)
        grads, input_grad = net.backward(
            params, np.ones(params.input_width), np.zeros(2)
        )
        for g in grads.weights + grads.biases:
            np.testing.assert_array_equal(g, np.zeros_like(g))
        np.testing.assert_array_equal(input_grad, np.zeros(params.input_width))

    def test_skip_path_feeds_first_block(self):
        params = zero_final_layer(net.init_params(1, 3, [4], seed=2))
        _, input_grad = net.backward(
            params, np.ones(params.input_width), np.array([2.5])
        )
        assert input_grad[0] == 2.5
        np.testing.assert_array_equal(input_grad[1:], np.zeros(3))


class TestCountParams:
    def test_documented_architecture(self):
        params = net.init_params(1, 30, [30, 30, 30], seed=0)
        want = (31 * 30 + 30) + (30 * 30 + 30) + (30 * 30 + 30) + (30 * 1 + 1)
        assert net.count_params(params) == want
        assert want == 2851

    def test_minimal_network(self):
        params = net.init_params(1, 0, [1], seed=0)
        assert net.count_params(params) == (1 * 1 + 1) + (1 * 1 + 1)

    def test_doubling_width_roughly_quadruples_interior(self):
        def interior(width):
            params = net.init_params(1, 0, [width, width], seed=0)
            return params.weights[1].size

        assert interior(40) == 4 * interior(20)


class TestCheckpoint:
    def test_round_trip_bitwise(self, tmp_path):
        params = net.init_params(3, 7, [11, 13], seed=77)
        path = tmp_path / "model.txt"
        net.save_params(params, path)
        back = net.load_params(path)
        assert back.d == 3 and back.n_mem == 7 and back.hidden == (11, 13)
        for a, b in zip(back.weights, params.weights):
            np.testing.assert_array_equal(a, b)
        for a, b in zip(back.biases, params.biases):
            np.testing.assert_array_equal(a, b)

    def test_forward_agreement_after_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        params = net.init_params(2, 4, [9], seed=5)
        path = tmp_path / "model.txt"
        net.save_params(params, path)
        back = net.load_params(path)
        for _ in range(10):
            z = rng.normal(size=params.input_width)
            np.testing.assert_array_equal(
                net.forward(back, z), net.forward(params, z)
            )

    def test_shape_mismatch_rejected(self, tmp_path):
        params = net.init_params(1, 2, [4], seed=0)
        path = tmp_path / "model.txt"
        net.save_params(params, path)
        text = path.read_text().replace("layers=4", "layers=5")
        path.write_text(text)
        with pytest.raises(ValueError, match="shape|expected"):
            net.load_params(path)

    def test_malformed_header_rejected(self, tmp_path):
        path = tmp_path / "model.txt"
        path.write_text("not a header\n")
        with pytest.raises(ValueError, match="header"):
            net.load_params(path)
