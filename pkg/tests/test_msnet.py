import math

import numpy as np
import pytest

from conftest import toy_dataset
from oracles import central_difference, rel_error
from tdfix.dataio import NTU_HAND_JOINTS, NTU_LAYOUT, SYNTH_LAYOUT, SyntheticSpec, synth_datasets
from tdfix.errors import ConfigError
from tdfix.msnet import MaskSpec, MSResTCNConfig, build_ms, load_mask, mask_input, ms_fit, ms_forward
from tdfix.numcore import SGDConfig, global_average_pool
from tdfix.restcn import ResTCN, ResTCNConfig, evaluate

TINY = ResTCNConfig(input_dim=4, num_classes=3, block_channels=(2, 3, 4), first_filter_len=4, unit_filter_len=4)


def _ms(base=TINY, dims=(0, 2), seed=0, **kw):
    return build_ms(MSResTCNConfig(base, MaskSpec(dims), **kw), seed)


def _zero_pipes(m):
    for p in m.pipes.values():
        p.w.value[...] = 0.0


# -- masks --------------------------------------------------------------------

def test_mask_all_dims_is_identity():
    x = np.random.default_rng(0).normal(size=(2, 5, 6))
    np.testing.assert_array_equal(mask_input(x, MaskSpec.all_dims(6)), x)


def test_mask_single_dim():
    out = mask_input(np.ones((3, 4)), MaskSpec((0,)))
    np.testing.assert_array_equal(out[:, 0], 1.0)
    assert not out[:, 1:].any()


def test_ntu_hand_mask_zeroes_the_rest():
    mask = MaskSpec.from_joints(NTU_LAYOUT, NTU_HAND_JOINTS)
    assert len(mask.kept_dims) == 24
    out = mask_input(np.ones((2, NTU_LAYOUT.dim)), mask)
    assert int((out[0] == 0).sum()) == NTU_LAYOUT.dim - 24


def test_mask_is_idempotent():
    x = np.random.default_rng(1).normal(size=(4, 10))
    m = MaskSpec((1, 3, 7))
    np.testing.assert_array_equal(mask_input(mask_input(x, m), m), mask_input(x, m))


def test_mask_validation():
    with pytest.raises(ConfigError):
        mask_input(np.ones((2, 4)), MaskSpec((4,)))
    for bad in ((), (2, 1), (1, 1), (-1,)):
        with pytest.raises(ConfigError):
            MaskSpec(bad)
    with pytest.raises(ConfigError):
        MSResTCNConfig(TINY, MaskSpec((9,)))


def test_load_mask(tmp_path):
    p = tmp_path / "mask.yaml"
    p.write_text("note: hands\njoints: [handLeft, 'a0:handRight']\ndims: [0]\n")
    m = load_mask(p, SYNTH_LAYOUT)
    hl, hr = SYNTH_LAYOUT.joint_dims("handLeft"), SYNTH_LAYOUT.joint_dims("handRight")
    assert m.kept_dims == tuple(sorted({0, *hl, *hr})) and m.note == "hands"
    (tmp_path / "bad.json").write_text('{"other": 1}')
    with pytest.raises(ConfigError):
        load_mask(tmp_path / "bad.json", SYNTH_LAYOUT)


# -- construction -------------------------------------------------------------

def test_pipes_and_parameter_count():
    m = _ms()
    assert sorted(m.pipes) == list(range(2, 11))
    assert [m.pipes[l].w.value.shape[0] for l in range(2, 11)] == [2, 2, 2, 3, 3, 3, 4, 4, 4]
    single = ResTCN(TINY).num_parameters()
    pipes = sum(c * c for c in [2, 2, 2, 3, 3, 3, 4, 4, 4])
    single_head = 4 * 3 + 3
    assert m.num_parameters() == 2 * (single - single_head) + pipes + (8 * 3 + 3)
    a, b = _ms(seed=5).state_dict(), _ms(seed=5).state_dict()
    assert all(a[k].tobytes() == b[k].tobytes() for k in a)


def test_bad_pipe_options():
    with pytest.raises(ConfigError):
        MSResTCNConfig(TINY, MaskSpec((0,)), pipe_sigma="tanh")
    with pytest.raises(ConfigError):
        MSResTCNConfig(TINY, MaskSpec((0,)), pipe_filter_len=0)


# -- structure ----------------------------------------------------------------

def _stream_pass(stream, x):
    """Disjoint single-stream forward using the stream's own units."""
    h, _ = stream.first(x)
    for l in range(2, 11):
        h, _ = stream.units[l].forward(h, "eval")
    return h


def test_zero_pipes_equal_disjoint_streams():
    m = _ms(seed=3)
    _zero_pipes(m)
    x = np.random.default_rng(2).normal(size=(3, 12, 4))
    logits, _ = m.forward(x)
    a = _stream_pass(m.main, x)
    b = _stream_pass(m.ta, mask_input(x, m.config.mask))
    ref = global_average_pool(np.concatenate([a, b], axis=2)) @ m.head_w.value + m.head_b.value
    assert logits.tobytes() == ref.tobytes()


def test_tied_streams_match_layer_by_layer():
    m = _ms(dims=(0, 1, 2, 3), seed=1)
    _zero_pipes(m)
    for p_main, p_ta in zip(m.main.parameters(), m.ta.parameters()):
        p_ta.value[...] = p_main.value
    _, (mains, tas) = m.forward(np.random.default_rng(0).normal(size=(2, 10, 4)), record=True)
    for bm, bt in zip(mains, tas):
        for l in range(1, 11):
            assert bm[l].tobytes() == bt[l].tobytes()


def test_forward_order_follows_parity():
    trace = []
    _ms().forward(np.zeros((1, 8, 4)), trace=trace)
    for l in range(2, 11):
        i_main, i_ta = trace.index(("main", l)), trace.index(("ta", l))
        pipe = [e for e in trace if e[:2] == ("pipe", l)][0]
        assert pipe[2] == ("ta->main" if l % 2 == 0 else "main->ta")
        assert (i_ta < i_main) == (l % 2 == 0)


@pytest.mark.parametrize("sigma", ["relu_only", "bn_relu"])
def test_pipe_outputs_are_non_negative(sigma):
    m = _ms(pipe_sigma=sigma)
    x = np.random.default_rng(0).normal(size=(2, 8, 2))
    for mode in ("eval", "train"):
        out, _ = m.pipes[3].forward(x, mode)
        assert (out >= 0).all()


def test_ablated_main_stream_sees_zeros():
    m = _ms()
    m.ablate_main = True
    x = np.random.default_rng(4).normal(size=(2, 8, 4))
    _, (mains, _) = ms_forward(m, x, record=True)
    assert not mains[0].x0.any()
    np.testing.assert_array_equal(m.forward(x)[0], m.forward(mask_input(x, MaskSpec((0, 2))))[0])


@pytest.mark.parametrize("sigma,mode,step", [("relu_only", "train", 1e-3), ("bn_relu", "train", 1e-5),
                                             ("relu_only", "eval", 1e-5)])
def test_ms_gradients_all_parameters(sigma, mode, step):
    # eval mode skips normalization, so larger steps can straddle ReLU kinks
    m = _ms(seed=2, pipe_sigma=sigma)
    x = np.random.default_rng(102).normal(size=(3, 8, 4))
    y = np.array([0, 1, 2])

    def loss():
        return m.loss_and_backward(x, y, np.random.default_rng(1), mode=mode)[0]

    for p in m.parameters():
        p.zero_grad()
    loss()
    params = m.parameters()
    analytic = [p.grad.copy() for p in params]
    for p, g in zip(params, analytic):
        assert rel_error(g, central_difference(loss, p.value, step)) < 1e-4, p.name


def test_zero_pipes_get_no_gradient_but_small_pipes_do():
    x = np.random.default_rng(6).normal(size=(4, 8, 4))
    y = np.array([0, 1, 2, 0])
    m = _ms(seed=2)
    _zero_pipes(m)
    m.loss_and_backward(x, y, np.random.default_rng(0))
    assert all(not p.w.grad.any() for p in m.pipes.values())
    m = _ms(seed=2)
    for p in m.pipes.values():
        p.w.value *= 1e-3
        p.w.zero_grad()
    m.loss_and_backward(x, y, np.random.default_rng(0))
    assert all(p.w.grad.any() for p in m.pipes.values())


def test_zero_head_loss_is_log_k():
    m = _ms()
    m.head_w.value[...] = 0.0
    loss, _, _ = m.loss_and_backward(np.ones((3, 8, 4)), np.array([0, 1, 2]), mode="eval")
    assert loss == pytest.approx(math.log(3), abs=1e-12)


def test_zero_pipe_model_trains():
    r = np.random.default_rng(0)
    ds = toy_dataset(r.normal(size=(12, 8, 4)), np.arange(12) % 3, 3)
    m = _ms()
    _zero_pipes(m)
    hist = ms_fit(m, ds, ds, SGDConfig(), epochs=2, batch_size=4)
    assert len(hist) == 3 and all(np.isfinite(h["train_loss"]) for h in hist)


def test_ta_stream_alone_is_above_chance():
    spec = SyntheticSpec(train_per_class=40, test_per_class=20, seed=1)
    tr, te = synth_datasets(spec)
    base = ResTCNConfig(input_dim=48, num_classes=4, block_channels=(4, 8, 8))
    m = build_ms(MSResTCNConfig(base, MaskSpec(spec.fine_dims)), 0)
    m.ablate_main = True
    ms_fit(m, tr, te, SGDConfig(learning_rate=0.01, momentum=0.9), epochs=8, batch_size=16)
    assert evaluate(m, te).accuracy > 0.4
