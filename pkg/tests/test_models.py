import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fusetl import autodiff as ad
from fusetl.autodiff.gradcheck import check_gradients
from fusetl.errors import ConfigError, ConsistencyError, ShapeError
from fusetl.models import (
    ARCHITECTURES,
    HeadSpec,
    apply_freeze,
    attach_head,
    build_backbone,
    build_model,
    compute_freeze_plan,
    frozen_count_for,
    parameter_census,
    predict,
)
from fusetl.models.graph import INPUT, ModelGraph, Node
from fusetl.models.layers import Linear

EXPECTED_LAYERS = {"micro_cnn": 6, "micro_resnet": 10, "micro_densenet": 7, "micro_mobilenet": 10}


def census_from_spec(model):
    """Scalar parameter count per parameterized layer, from hyperparameters only."""
    sizes = []
    for entry in model.topology():
        kind = entry["kind"]
        if kind == "conv":
            sizes.append(entry["out"] * entry["in"] // entry["groups"] * entry["k"] ** 2 + entry["out"])
        elif kind == "batchnorm":
            sizes.append(2 * entry["channels"])
        elif kind == "linear":
            sizes.append(entry["out"] * entry["in"] + entry["out"])
    return sizes


def frozen_model(arch, fraction=0.6, seed=0, **cfg):
    m = build_model(arch, cfg or None, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        apply_freeze(m, compute_freeze_plan(m, fraction))
    return m


class TestBackbones:
    @pytest.mark.parametrize("arch", ARCHITECTURES)
    def test_layer_counts_and_features(self, arch, rng):
        m = build_backbone(arch, seed=3)
        assert len(m.parameterized_layers()) == EXPECTED_LAYERS[arch]
        assert not m.has_head
        feats = m.features(rng.random((2, 3, 64, 64)))
        assert feats.shape == (2, m.feature_dim)

    def test_micro_cnn_feature_dim_is_last_width(self):
        m = build_backbone("micro_cnn", {"width": 4})
        last_conv = [e for e in m.topology() if e["kind"] == "conv"][-1]
        assert m.feature_dim == last_conv["out"] == 16

    @pytest.mark.parametrize("arch", ARCHITECTURES)
    def test_seed_determinism(self, arch):
        a, b = build_backbone(arch, seed=7), build_backbone(arch, seed=7)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert pa.name == pb.name
            np.testing.assert_array_equal(pa.data, pb.data)
        c = build_backbone(arch, seed=8)
        assert not np.array_equal(a.parameters()[0].data, c.parameters()[0].data)

    def test_family_mechanisms_repeat(self):
        kinds = lambda arch: [e for e in build_backbone(arch).topology()]
        assert sum(e["kind"] == "add" for e in kinds("micro_resnet")) == 2
        assert sum(e["kind"] == "concat" for e in kinds("micro_densenet")) == 2
        dw = [e for e in kinds("micro_mobilenet") if e["kind"] == "conv" and e["groups"] > 1]
        assert len(dw) == 2 and all(e["groups"] == e["in"] == e["out"] for e in dw)

    def test_unknown_arch_and_config(self):
        with pytest.raises(ConfigError):
            build_backbone("resnet50")
        with pytest.raises(ConfigError):
            build_backbone("micro_cnn", {"in_channels": 1})
        with pytest.raises(ConfigError):
            build_backbone("micro_cnn", {"depth": 3})


class TestHead:
    def test_head_shapes(self):
        m = build_backbone("micro_cnn")
        assert m.feature_dim == 32
        m = attach_head(m, HeadSpec(32, 128, 0.5))
        shapes = {p.name: p.shape for p in m.parameters() if p.name.startswith("head.")}
        assert shapes == {"head.fc1.weight": (128, 32), "head.fc1.bias": (128,),
                          "head.fc2.weight": (1, 128), "head.fc2.bias": (1,)}
        kinds = [m.nodes[i].layer.spec() for i in m.head_range]
        assert [k["kind"] for k in kinds] == ["linear", "activation", "dropout", "linear", "activation"]
        assert kinds[-1]["fn"] == "sigmoid"

    def test_output_in_open_interval(self, rng):
        m = build_model("micro_resnet", seed=2)
        p = predict(m, rng.random((4, 3, 64, 64)) * 50)
        assert p.shape == (4,)
        assert np.all((p.data > 0) & (p.data < 1))

    def test_wrong_in_dim(self):
        with pytest.raises(ConfigError):
            attach_head(build_backbone("micro_cnn"), HeadSpec(16))

    def test_surgery_preserves_backbone(self):
        bb = build_backbone("micro_densenet", seed=5)
        before = bb.state_dict()
        m = attach_head(bb, HeadSpec(bb.feature_dim), seed=9)
        after = m.state_dict()
        for name, value in before.items():
            np.testing.assert_array_equal(after[name], value)

    def test_reattach_replaces_head(self):
        m = build_model("micro_cnn", head={"hidden_dim": 16})
        m2 = attach_head(m, HeadSpec(32, 8))
        assert len(m2.nodes) == len(m.nodes)
        assert m2.nodes[m2.head_start].layer.out_features == 8


class TestFreezePlan:
    def _toy(self, n_layers, n_head=2):
        nodes, last = [], INPUT
        for i in range(n_layers):
            layer = Linear(f"{'head.' if i >= n_layers - n_head else ''}l{i}", 2, 2)
            nodes.append(Node(layer, (last,)))
            last = layer.name
        return ModelGraph(nodes, 2, head_start=n_layers - n_head)

    @pytest.mark.parametrize("n,f,k", [(10, 0.6, 6), (8, 0.6, 4), (10, 0.0, 0)])
    def test_examples(self, n, f, k):
        assert compute_freeze_plan(self._toy(n), f).frozen_count == k

    def test_clamp_warns(self):
        with pytest.warns(UserWarning, match="clamped"):
            plan = compute_freeze_plan(self._toy(10), 1.0)
        assert plan.frozen_count == 8 and plan.warnings

    def test_bad_fraction(self):
        with pytest.raises(ConfigError):
            compute_freeze_plan(self._toy(4), 1.2)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(2, 64), st.sampled_from([0, 0.25, 0.5, 0.6, 0.75, 1.0]), st.integers(0, 2))
    def test_floor_law(self, n, f, n_head):
        # exact integer arithmetic: f = p/q
        p, q = {0: (0, 1), 0.25: (1, 4), 0.5: (1, 2), 0.6: (3, 5), 0.75: (3, 4), 1.0: (1, 1)}[f]
        assert frozen_count_for(n, f, n_head) == min(n * p // q, n - n_head)

    def test_prefix_and_head_exempt(self):
        m = frozen_model("micro_cnn", 1.0)
        plan = m.freeze_plan
        params = m.parameterized_layers()
        frozen_flags = [not layer.parameters()[0].requires_grad for _, layer in params]
        assert frozen_flags == sorted(frozen_flags, reverse=True)
        assert not set(plan.frozen_layers) & set(m.head_layer_names())


class TestApplyFreeze:
    def test_zero_fraction(self):
        m = frozen_model("micro_cnn", 0.0)
        total, trainable = parameter_census(m)
        assert total == trainable

    @pytest.mark.parametrize("arch", ARCHITECTURES)
    def test_census(self, arch):
        m = frozen_model(arch, 0.6)
        sizes = census_from_spec(m)
        k = math.floor(3 * len(sizes) / 5)
        total, trainable = parameter_census(m)
        assert total == sum(sizes)
        assert trainable == sum(sizes[k:])

    def test_frozen_batchnorm_flag(self):
        m = frozen_model("micro_cnn", 0.6)
        flags = {layer.name: getattr(layer, "frozen", None) for _, layer in m.parameterized_layers()}
        assert flags["stage1.bn"] is True and flags["stage2.bn"] is True
        assert flags["stage3.bn"] is False

    def test_stale_plan(self):
        m = build_model("micro_cnn")
        plan = compute_freeze_plan(build_model("micro_resnet"), 0.6)
        with pytest.raises(ConsistencyError):
            apply_freeze(m, plan)

    def test_frozen_parameters_fixed_over_training(self, rng):
        m = frozen_model("micro_mobilenet", 0.6, width=4, input_size=16)
        frozen = {p.name: p.data.copy() for p in m.parameters() if not p.requires_grad}
        buffers = {k: v.copy() for k, v in m.buffers().items()
                   if k.rsplit(".", 1)[0] in m.freeze_plan.frozen_layers}
        opt = ad.Adam(m.parameters())
        x = rng.random((8, 3, 16, 16))
        y = (rng.random(8) < 0.5).astype(float)
        for _ in range(50):
            opt.zero_grad()
            ad.bce_loss(predict(m, x, training=True), y).backward()
            opt.step()
        for p in m.parameters():
            if p.name in frozen:
                np.testing.assert_array_equal(p.data, frozen[p.name])
                assert p.grad is None
        for k, v in buffers.items():
            np.testing.assert_array_equal(m.buffers()[k], v)


class TestPredict:
    def test_determinism_and_eval_repeat(self, rng):
        x = rng.random((3, 3, 64, 64))
        a = predict(build_model("micro_cnn", seed=4), x).data
        b = predict(build_model("micro_cnn", seed=4), x).data
        np.testing.assert_array_equal(a, b)
        m = build_model("micro_cnn", seed=4)
        np.testing.assert_array_equal(predict(m, x).data, predict(m, x).data)

    def test_shape(self, rng):
        assert predict(build_model("micro_cnn"), rng.random((4, 3, 64, 64))).shape == (4,)

    def test_wrong_size(self, rng):
        with pytest.raises(ShapeError):
            predict(build_model("micro_cnn"), rng.random((4, 3, 32, 32)))
        with pytest.raises(ShapeError):
            predict(build_model("micro_cnn"), rng.random((4, 1, 64, 64)))


@pytest.mark.parametrize("arch", ARCHITECTURES)
def test_end_to_end_gradients_with_freeze(arch, rng):
    m = frozen_model(arch, 0.6, seed=1, width=2, input_size=8)
    m.nodes[m.head_start + 2].layer.p = 0.0  # deterministic head for finite differences
    x = rng.random((3, 3, 8, 8))
    y = np.array([1.0, 0.0, 1.0])
    params = m.trainable_parameters()
    for p in params:
        if p.name.endswith("bn.beta"):  # a zero shift on a dead channel sits on the relu kink
            p.data[:] = rng.uniform(0.1, 0.5, p.shape)
    # batch statistics cancel a conv bias feeding batchnorm, so only eval mode sees it
    live = [p for p in params if not p.name.endswith("conv.bias")]
    for training, group in ((True, live), (False, params)):
        errs = check_gradients(lambda: ad.bce_loss(predict(m, x, training=training), y), group)
        assert max(errs) <= 1e-4, dict(zip([p.name for p in group], errs))
