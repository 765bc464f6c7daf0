import numpy as np
import pytest

from skdlab.exceptions import ConfigError, ShapeError
from skdlab.network import MLP, GradientTape
from skdlab.optim import (
    AdamConfig,
    OptimizerState,
    SGDConfig,
    adam_step,
    default_optimizer,
    lr_at,
    sgd_step,
)


def scalar_model(w: float) -> MLP:
    return MLP([1, 1], "relu", [np.array([[w]])], [np.zeros(1)])


def tape_for(model: MLP, grad_value: float) -> GradientTape:
    tape = GradientTape.zeros_like(model)
    for dw in tape.d_weights:
        dw[...] = grad_value
    return tape


class TestConfigs:
    def test_sgd_defaults_mirror_step_protocol(self):
        cfg = SGDConfig()
        assert cfg.lr == 0.05
        assert cfg.milestones == (150, 180, 210)
        assert cfg.decay_factor == 0.1
        assert cfg.weight_decay == 5e-4
        assert cfg.momentum == 0.9

    def test_sgd_validation(self):
        with pytest.raises(ConfigError):
            SGDConfig(lr=0.0)
        with pytest.raises(ConfigError):
            SGDConfig(momentum=1.0)
        with pytest.raises(ConfigError):
            SGDConfig(milestones=(10, 10))
        with pytest.raises(ConfigError):
            SGDConfig(decay_factor=0.0)

    def test_adam_defaults(self):
        cfg = AdamConfig()
        assert cfg.eps == 1e-6
        assert cfg.beta1 == 0.9
        assert cfg.beta2 == 0.999
        assert cfg.warmup_fraction == 0.1
        assert cfg.weight_decay == 1e-4
        assert cfg.decay == "linear"

    def test_adam_validation(self):
        with pytest.raises(ConfigError):
            AdamConfig(eps=0.0)
        with pytest.raises(ConfigError):
            AdamConfig(beta1=1.0)
        with pytest.raises(ConfigError):
            AdamConfig(warmup_fraction=0.5, total_steps=1)
        with pytest.raises(ConfigError):
            AdamConfig(decay="cosine")

    def test_default_optimizer_is_hotter_sgd(self):
        cfg = default_optimizer()
        assert isinstance(cfg, SGDConfig) and cfg.lr == 0.2


class TestSGDSchedule:
    def test_step_protocol_exact(self):
        cfg = SGDConfig(lr=0.05, milestones=(150, 180, 210), decay_factor=0.1)
        for epoch in range(0, 150):
            assert lr_at(cfg, epoch) == 0.05
        for epoch in range(150, 180):
            assert lr_at(cfg, epoch) == 0.005
        for epoch in range(180, 210):
            assert lr_at(cfg, epoch) == 0.0005
        for epoch in (210, 230, 500):
            assert lr_at(cfg, epoch) == 0.00005

    def test_examples_at_200_and_230(self):
        cfg = SGDConfig()
        assert lr_at(cfg, 200) == 0.0005
        assert lr_at(cfg, 230) == 0.00005

    def test_non_increasing(self):
        cfg = SGDConfig()
        lrs = [lr_at(cfg, e) for e in range(300)]
        assert all(b <= a for a, b in zip(lrs, lrs[1:]))


class TestAdamSchedule:
    CFG = AdamConfig(peak_lr=1e-3, warmup_fraction=0.1, total_steps=1000)

    def test_warmup_origin_zero(self):
        assert lr_at(self.CFG, 0) == 0.0

    def test_warmup_apex_hits_peak(self):
        assert lr_at(self.CFG, 100) == self.CFG.peak_lr

    def test_terminus_zero(self):
        assert lr_at(self.CFG, 1000) == 0.0
        assert lr_at(self.CFG, 2000) == 0.0

    def test_decay_midpoint_half_peak(self):
        assert lr_at(self.CFG, 550) == self.CFG.peak_lr / 2

    def test_monotone_up_then_down(self):
        lrs = [lr_at(self.CFG, s) for s in range(1001)]
        apex = int(np.argmax(lrs))
        assert apex == 100
        assert all(b > a for a, b in zip(lrs[:101], lrs[1:101]))
        assert all(b < a for a, b in zip(lrs[100:1000], lrs[101:1001]))

    def test_no_warmup_starts_at_peak(self):
        cfg = AdamConfig(peak_lr=1e-3, warmup_fraction=0.0, total_steps=10)
        assert lr_at(cfg, 0) == 1e-3


class TestSGDStep:
    def test_zero_gradient_fixed_point(self):
        model = MLP.glorot_init([2, 4, 3], "relu", seed=0)
        before = [w.copy() for w in model.weights]
        cfg = SGDConfig(lr=0.1, momentum=0.0, weight_decay=0.0, milestones=())
        state = OptimizerState.for_model(model, cfg)
        for _ in range(5):
            sgd_step(model, GradientTape.zeros_like(model), state, cfg)
        for w, b in zip(model.weights, before):
            assert np.array_equal(w, b)

    def test_definitional_update(self):
        model = scalar_model(1.0)
        cfg = SGDConfig(lr=0.1, momentum=0.0, weight_decay=0.0, milestones=())
        state = OptimizerState.for_model(model, cfg)
        sgd_step(model, tape_for(model, 0.5), state, cfg)
        assert model.weights[0][0, 0] == 0.95

    def test_momentum_two_steps_hand_computed(self):
        model = scalar_model(0.0)
        cfg = SGDConfig(lr=0.1, momentum=0.5, weight_decay=0.0, milestones=())
        state = OptimizerState.for_model(model, cfg)
        sgd_step(model, tape_for(model, 1.0), state, cfg)   # v=1.0, w=-0.1
        sgd_step(model, tape_for(model, 1.0), state, cfg)   # v=1.5, w=-0.25
        np.testing.assert_allclose(model.weights[0][0, 0], -0.25, rtol=1e-15)

    def test_weight_decay_pulls_toward_zero(self):
        model = scalar_model(2.0)
        cfg = SGDConfig(lr=0.1, momentum=0.0, weight_decay=0.01, milestones=())
        state = OptimizerState.for_model(model, cfg)
        sgd_step(model, tape_for(model, 0.0), state, cfg)
        np.testing.assert_allclose(model.weights[0][0, 0], 2.0 - 0.1 * 0.01 * 2.0,
                                   rtol=1e-15)

    def test_shape_mismatch(self):
        model = MLP.glorot_init([2, 3], "relu", seed=0)
        other = MLP.glorot_init([2, 4, 3], "relu", seed=0)
        cfg = SGDConfig()
        state = OptimizerState.for_model(model, cfg)
        with pytest.raises(ShapeError):
            sgd_step(model, GradientTape.zeros_like(other), state, cfg)

    def test_epoch_drives_schedule(self):
        model = scalar_model(1.0)
        cfg = SGDConfig(lr=0.05, momentum=0.0, weight_decay=0.0,
                        milestones=(1,), decay_factor=0.1)
        state = OptimizerState.for_model(model, cfg)
        state.epoch = 1
        sgd_step(model, tape_for(model, 1.0), state, cfg)
        np.testing.assert_allclose(model.weights[0][0, 0], 1.0 - 0.005, rtol=1e-15)


class TestAdamStep:
    def test_single_step_hand_computed(self):
        model = scalar_model(1.0)
        cfg = AdamConfig(peak_lr=1e-3, eps=1e-6, beta1=0.9, beta2=0.999,
                         weight_decay=0.0, warmup_fraction=0.0, total_steps=100)
        state = OptimizerState.for_model(model, cfg)
        adam_step(model, tape_for(model, 1.0), state, cfg)
        # m=0.1, v=0.001; bias-corrected both are exactly 1; update lr/(1+eps)
        expected = 1.0 - 1e-3 * (1.0 / (1.0 + 1e-6))
        np.testing.assert_allclose(model.weights[0][0, 0], expected, rtol=1e-15)
        assert state.step == 1

    def test_zero_gradient_fixed_point_without_decay(self):
        model = MLP.glorot_init([2, 3], "tanh", seed=4)
        before = [w.copy() for w in model.weights]
        cfg = AdamConfig(peak_lr=1e-2, weight_decay=0.0, warmup_fraction=0.0,
                         total_steps=50)
        state = OptimizerState.for_model(model, cfg)
        for _ in range(10):
            adam_step(model, GradientTape.zeros_like(model), state, cfg)
        for w, b in zip(model.weights, before):
            assert np.array_equal(w, b)

    def test_decoupled_weight_decay_applies_without_gradient(self):
        model = scalar_model(4.0)
        cfg = AdamConfig(peak_lr=1e-2, weight_decay=0.5, warmup_fraction=0.0,
                         total_steps=10)
        state = OptimizerState.for_model(model, cfg)
        adam_step(model, tape_for(model, 0.0), state, cfg)
        np.testing.assert_allclose(model.weights[0][0, 0], 4.0 - 1e-2 * 0.5 * 4.0,
                                   rtol=1e-15)

    def test_second_moment_nonnegative_and_finite_updates(self):
        model = MLP.glorot_init([3, 8, 2], "relu", seed=6)
        cfg = AdamConfig(peak_lr=1e-3, warmup_fraction=0.1, total_steps=200)
        state = OptimizerState.for_model(model, cfg)
        rng = np.random.Generator(np.random.PCG64(6))
        for _ in range(25):
            tape = GradientTape.zeros_like(model)
            for dw in tape.d_weights:
                dw[...] = rng.normal(size=dw.shape)
            adam_step(model, tape, state, cfg)
        assert all(np.all(v >= 0) for v in state.second_moment)
        assert all(np.all(np.isfinite(w)) for w in model.weights)

    def test_state_kind_mismatch(self):
        model = scalar_model(1.0)
        sgd_state = OptimizerState.for_model(model, SGDConfig())
        with pytest.raises(ConfigError):
            adam_step(model, GradientTape.zeros_like(model), sgd_state, AdamConfig())
