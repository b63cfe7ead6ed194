import math

import numpy as np
import pytest
from oracles import max_relative_error, numeric_gradients, random_net

from textovision import neuralnet as nn
from textovision.textvec import SentenceVector


def identity_params(dim):
    return [(np.eye(dim), np.zeros(dim))]


class TestInit:
    def test_deterministic(self):
        cfg = nn.NetworkConfig([5, 7, 3], 0.0)
        a = nn.init_network(cfg, 42)
        b = nn.init_network(cfg, 42)
        for (wa, ba), (wb, bb) in zip(a, b):
            assert np.array_equal(wa, wb)
            assert np.array_equal(ba, bb)

    def test_biases_zero(self):
        for _, b in nn.init_network(nn.NetworkConfig([4, 6, 2], 0.0), 1):
            assert np.all(b == 0.0)

    def test_fan_based_bound(self):
        params = nn.init_network(nn.NetworkConfig([4, 4], 0.0), 123)
        limit = math.sqrt(6.0 / 8.0)
        assert np.all(np.abs(params[0][0]) <= limit)
        assert limit == pytest.approx(0.8660254, abs=1e-7)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            nn.NetworkConfig([5], 0.0)
        with pytest.raises(ValueError):
            nn.NetworkConfig([5, 0], 0.0)
        with pytest.raises(ValueError):
            nn.NetworkConfig([5, 2], 1.0)


class TestForward:
    def test_identity_passthrough(self):
        cache = nn.forward(identity_params(2), np.array([[1.0, 2.0]]))
        assert cache.output.tolist() == [[1.0, 2.0]]

    def test_relu_clamps_negative(self):
        params = [(np.array([[1.0]]), np.array([-2.0]))]
        cache = nn.forward(params, np.array([[1.0]]))
        assert cache.output.tolist() == [[0.0]]

    def test_two_layer_hand_evaluation(self):
        params = [
            (np.array([[1.0], [-1.0]]), np.zeros(2)),
            (np.array([[1.0, 1.0]]), np.zeros(1)),
        ]
        cache = nn.forward(params, np.array([[3.0]]))
        assert cache.acts[0].tolist() == [[3.0, 0.0]]
        assert cache.output.tolist() == [[3.0]]

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="input dim"):
            nn.forward(identity_params(2), np.array([[1.0, 2.0, 3.0]]))
        with pytest.raises(ValueError, match="2-D"):
            nn.forward(identity_params(2), np.array([1.0, 2.0]))

    def test_output_nonnegative(self):
        rng = np.random.default_rng(5)
        params = nn.init_network(nn.NetworkConfig([6, 8, 4], 0.0), 5)
        cache = nn.forward(params, rng.normal(size=(10, 6)))
        assert np.all(cache.output >= 0.0)

    def test_infer_mode_ignores_dropout_rate(self):
        params = nn.init_network(nn.NetworkConfig([3, 5, 2], 0.5), 2)
        x = np.ones((4, 3))
        plain = nn.forward(params, x)
        assert plain.masks is None
        again = nn.forward(params, x)
        assert np.array_equal(plain.output, again.output)


class TestDropout:
    def test_inverted_scaling_with_explicit_mask(self):
        # one hidden unit kept out of two: survivor doubled at rate 0.5
        params = [
            (np.eye(2), np.zeros(2)),
            (np.eye(2), np.zeros(2)),
        ]
        mask = np.array([[True, False]])
        cache = nn.forward(
            params, np.array([[1.0, 1.0]]), train=True, dropout_rate=0.5, masks=[mask]
        )
        assert cache.acts[0].tolist() == [[2.0, 0.0]]
        assert cache.output.tolist() == [[2.0, 0.0]]

    def test_no_mask_on_output_layer(self):
        params = nn.init_network(nn.NetworkConfig([3, 4, 4, 2], 0.3), 9)
        rng = np.random.default_rng(0)
        cache = nn.forward(params, np.ones((2, 3)), train=True, dropout_rate=0.3, rng=rng)
        assert len(cache.masks) == 2  # hidden layers only

    def test_seeded_masks_reproducible(self):
        params = nn.init_network(nn.NetworkConfig([3, 8, 2], 0.4), 11)
        x = np.ones((5, 3))
        a = nn.forward(params, x, train=True, dropout_rate=0.4, rng=np.random.default_rng(77))
        b = nn.forward(params, x, train=True, dropout_rate=0.4, rng=np.random.default_rng(77))
        assert np.array_equal(a.output, b.output)
        for ma, mb in zip(a.masks, b.masks):
            assert np.array_equal(ma, mb)

    def test_rng_required_when_dropping(self):
        params = nn.init_network(nn.NetworkConfig([3, 8, 2], 0.4), 11)
        with pytest.raises(ValueError, match="masks or an rng"):
            nn.forward(params, np.ones((1, 3)), train=True, dropout_rate=0.4)


class TestMseLoss:
    def test_identical_vectors(self):
        assert nn.mse_loss(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0

    def test_mean_over_dimensions(self):
        assert nn.mse_loss(np.array([0.0, 0.0]), np.array([3.0, 4.0])) == 12.5

    def test_batch_mean(self):
        pred = np.array([[0.0], [0.0]])
        target = np.array([[2.0], [0.0]])
        assert nn.mse_loss(pred, target) == 2.0

    def test_positive_for_distinct(self):
        assert nn.mse_loss(np.array([1.0]), np.array([1.5])) > 0.0

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            nn.mse_loss(np.zeros(2), np.zeros(3))


class TestBackward:
    def test_zero_at_minimum(self):
        params = identity_params(3)
        x = np.array([[1.0, 2.0, 3.0]])
        cache = nn.forward(params, x)
        grads = nn.backward(params, cache, cache.output.copy())
        for gw, gb in grads:
            assert np.all(gw == 0.0)
            assert np.all(gb == 0.0)

    def test_hand_derived_single_layer(self):
        params = [(np.array([[1.0]]), np.array([0.0]))]
        cache = nn.forward(params, np.array([[1.0]]))
        (gw, gb), = nn.backward(params, cache, np.array([[3.0]]))
        assert gw.tolist() == [[-4.0]]
        assert gb.tolist() == [-4.0]

    def test_matches_finite_differences_random_nets(self):
        rng = np.random.default_rng(2024)
        checked = 0
        while checked < 20:
            depth = int(rng.integers(2, 5))
            sizes = [int(rng.integers(1, 17)) for _ in range(depth)]
            batch = int(rng.integers(1, 9))
            params = random_net(sizes, rng)
            x = rng.normal(size=(batch, sizes[0]))
            t = np.abs(rng.normal(size=(batch, sizes[-1])))
            cache = nn.forward(params, x)
            # central differences are meaningless within h of a ReLU kink
            if any(np.any(np.abs(z) < 1e-4) for z in cache.preacts):
                continue
            analytic = nn.backward(params, cache, t)
            numeric = numeric_gradients(params, x, t)
            assert max_relative_error(analytic, numeric) <= 1e-4, f"config {sizes}x{batch}"
            checked += 1

    def test_matches_finite_differences_with_dropout_masks(self):
        rng = np.random.default_rng(7)
        sizes = [5, 9, 6, 3]
        params = nn.init_network(nn.NetworkConfig(sizes, 0.0), 31)
        x = rng.normal(size=(4, 5))
        t = np.abs(rng.normal(size=(4, 3)))
        masks = [rng.random((4, 9)) >= 0.4, rng.random((4, 6)) >= 0.4]
        cache = nn.forward(params, x, train=True, dropout_rate=0.4, masks=masks)
        analytic = nn.backward(params, cache, t)
        numeric = numeric_gradients(params, x, t, dropout_rate=0.4, masks=masks)
        assert max_relative_error(analytic, numeric) <= 1e-4

    def test_relu_subgradient_at_zero_is_zero(self):
        # z = 1*1 - 1 = 0 exactly: the gate must stay closed
        params = [(np.array([[1.0]]), np.array([-1.0]))]
        cache = nn.forward(params, np.array([[1.0]]))
        assert cache.preacts[0][0, 0] == 0.0
        (gw, gb), = nn.backward(params, cache, np.array([[5.0]]))
        assert gw[0, 0] == 0.0
        assert gb[0] == 0.0

    def test_target_shape_mismatch(self):
        params = identity_params(2)
        cache = nn.forward(params, np.ones((1, 2)))
        with pytest.raises(ValueError):
            nn.backward(params, cache, np.ones((1, 3)))


class TestRmsprop:
    def test_hand_derived_step(self):
        params = [(np.array([[0.0]]), np.array([0.0]))]
        grads = [(np.array([[1.0]]), np.array([0.0]))]
        state = nn.zero_state(params)
        cfg = nn.OptimizerConfig()
        new_params, new_state = nn.rmsprop_step(params, grads, state, cfg)
        assert new_state[0][0][0, 0] == pytest.approx(0.1, abs=1e-15)
        expected = -0.001 / math.sqrt(0.100001)
        assert new_params[0][0][0, 0] == pytest.approx(expected, abs=1e-12)

    def test_zero_gradient_decays_state_only(self):
        params = [(np.full((2, 2), 0.5), np.array([1.0, -1.0]))]
        state = [(np.full((2, 2), 0.4), np.array([0.2, 0.2]))]
        grads = [(np.zeros((2, 2)), np.zeros(2))]
        new_params, new_state = nn.rmsprop_step(params, grads, state, nn.OptimizerConfig())
        assert np.array_equal(new_params[0][0], params[0][0])
        assert np.array_equal(new_params[0][1], params[0][1])
        assert np.allclose(new_state[0][0], 0.9 * 0.4, atol=1e-15)

    def test_two_successive_unit_gradient_steps(self):
        params = [(np.array([[0.0]]), np.array([0.0]))]
        grads = [(np.array([[1.0]]), np.array([0.0]))]
        state = nn.zero_state(params)
        cfg = nn.OptimizerConfig()
        params, state = nn.rmsprop_step(params, grads, state, cfg)
        p1 = params[0][0][0, 0]
        params, state = nn.rmsprop_step(params, grads, state, cfg)
        assert state[0][0][0, 0] == pytest.approx(0.19, abs=1e-15)
        assert params[0][0][0, 0] == pytest.approx(p1 - 0.001 / math.sqrt(0.190001), abs=1e-12)

    def test_state_nonnegative_and_bounded_by_peak_squared_gradient(self):
        rng = np.random.default_rng(88)
        params = [(rng.normal(size=(3, 4)), rng.normal(size=3))]
        state = nn.zero_state(params)
        cfg = nn.OptimizerConfig()
        peak_w = np.zeros((3, 4))
        peak_b = np.zeros(3)
        for _ in range(50):
            gw = rng.normal(size=(3, 4))
            gb = rng.normal(size=3)
            peak_w = np.maximum(peak_w, gw * gw)
            peak_b = np.maximum(peak_b, gb * gb)
            params, state = nn.rmsprop_step(params, [(gw, gb)], state, cfg)
            assert np.all(state[0][0] >= 0.0)
            assert np.all(state[0][1] >= 0.0)
            assert np.all(state[0][0] <= peak_w + 1e-15)
            assert np.all(state[0][1] <= peak_b + 1e-15)


class TestEarlyStopping:
    def test_injected_plateau_sequence(self):
        # minimum at epoch 2, then five non-improving epochs -> stop at 7
        stopper = nn.EarlyStopping(patience=5)
        losses = [1.0, 0.9, 0.9, 0.9, 0.9, 0.9, 0.9]
        marker = {}
        stopped_at = None
        for epoch, loss in enumerate(losses, start=1):
            params = [(np.array([[float(epoch)]]), np.array([0.0]))]
            marker[epoch] = params
            if stopper.update(epoch, loss, params):
                stopped_at = epoch
                break
        assert stopped_at == 7
        assert stopper.best_epoch == 2
        assert stopper.best_params[0][0][0, 0] == 2.0

    def test_best_params_are_a_snapshot(self):
        stopper = nn.EarlyStopping(patience=2)
        params = [(np.array([[1.0]]), np.array([0.0]))]
        stopper.update(1, 0.5, params)
        params[0][0][0, 0] = 99.0
        assert stopper.best_params[0][0][0, 0] == 1.0

    def test_strictly_lower_comparison(self):
        stopper = nn.EarlyStopping(patience=3)
        p = [(np.zeros((1, 1)), np.zeros(1))]
        assert not stopper.update(1, 1.0, p)
        assert not stopper.update(2, 1.0, p)  # equal is not an improvement
        assert not stopper.update(3, 1.0, p)
        assert stopper.update(4, 1.0, p)
        assert stopper.best_epoch == 1


OVERFIT_X = np.array([1.0, 0.5])
OVERFIT_T = np.array([0.6, 0.4])
# seed 7 keeps both initial output preactivations positive; a negative one
# would be pinned at zero by the output ReLU and never receive gradient
OVERFIT_SEED = 7


def overfit_pair():
    return nn.TrainingPair(SentenceVector(OVERFIT_X, "bow"), OVERFIT_T)


class TestTrain:
    def test_single_pair_overfits(self):
        pair = overfit_pair()
        result = nn.train(
            [pair],
            [pair],
            nn.NetworkConfig([2, 2], dropout_rate=0.0),
            nn.OptimizerConfig(seed=OVERFIT_SEED),
        )
        assert len(result.history) <= 500
        assert result.best_val_loss < 1e-3

    def test_train_loss_at_best_epoch_not_above_first_epoch(self):
        pair = overfit_pair()
        result = nn.train(
            [pair],
            [pair],
            nn.NetworkConfig([2, 2], dropout_rate=0.0),
            nn.OptimizerConfig(seed=OVERFIT_SEED),
        )
        by_epoch = {s.epoch: s for s in result.history}
        assert by_epoch[result.best_epoch].train_loss <= by_epoch[1].train_loss

    def test_history_is_bit_identical_across_runs(self):
        rng = np.random.default_rng(0)
        pairs = [
            nn.TrainingPair(
                SentenceVector(np.abs(rng.normal(size=6)), "bow"),
                np.abs(rng.normal(size=3)),
            )
            for _ in range(12)
        ]
        net = nn.NetworkConfig([6, 5, 3], dropout_rate=0.25)
        opt = nn.OptimizerConfig(seed=99, batch_size=4, max_epochs=15, patience=50)
        a = nn.train(pairs[:9], pairs[9:], net, opt)
        b = nn.train(pairs[:9], pairs[9:], net, opt)
        assert [(s.epoch, s.train_loss, s.val_loss) for s in a.history] == [
            (s.epoch, s.train_loss, s.val_loss) for s in b.history
        ]
        for (wa, ba), (wb, bb) in zip(a.params, b.params):
            assert np.array_equal(wa, wb)
            assert np.array_equal(ba, bb)

    def test_rejects_empty_sets(self):
        with pytest.raises(ValueError):
            nn.train([], [overfit_pair()], nn.NetworkConfig([2, 2], 0.0), nn.OptimizerConfig())
        with pytest.raises(ValueError):
            nn.train([overfit_pair()], [], nn.NetworkConfig([2, 2], 0.0), nn.OptimizerConfig())

    def test_rejects_dim_mismatch(self):
        pair = overfit_pair()
        with pytest.raises(ValueError, match="input width"):
            nn.train([pair], [pair], nn.NetworkConfig([3, 2], 0.0), nn.OptimizerConfig())
        with pytest.raises(ValueError, match="output width"):
            nn.train([pair], [pair], nn.NetworkConfig([2, 5], 0.0), nn.OptimizerConfig())

    def test_custom_validation_metric_is_monitored(self):
        pair = overfit_pair()
        calls = []

        def metric(params):
            calls.append(1)
            return float(len(calls))  # strictly worsening: stop after patience epochs

        result = nn.train(
            [pair],
            [pair],
            nn.NetworkConfig([2, 2], 0.0),
            nn.OptimizerConfig(seed=1, patience=3),
            val_metric_fn=metric,
        )
        assert len(result.history) == 4  # epoch 1 improves over inf, then 3 strikes
        assert result.best_epoch == 1


class TestEncode:
    def test_identity_passthrough(self):
        out = nn.encode(identity_params(2), SentenceVector(np.array([1.0, 2.0]), "bow"))
        assert out.tolist() == [1.0, 2.0]

    def test_pure(self):
        params = nn.init_network(nn.NetworkConfig([4, 3], 0.0), 3)
        sv = SentenceVector(np.array([1.0, 0.0, 2.0, 1.0]), "bow")
        assert np.array_equal(nn.encode(params, sv), nn.encode(params, sv))

    def test_overfit_model_reproduces_target(self):
        pair = overfit_pair()
        result = nn.train(
            [pair],
            [pair],
            nn.NetworkConfig([2, 2], dropout_rate=0.0),
            nn.OptimizerConfig(seed=OVERFIT_SEED),
        )
        pred = nn.encode(result.params, pair.sentence_vector)
        assert nn.mse_loss(pred, OVERFIT_T) < 1e-3
