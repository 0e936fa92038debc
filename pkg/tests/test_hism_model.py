import numpy as np
import pytest

from src.hism.layers import LSTM, Conv2D, Dropout, MaxPool2, sinusoidal_positions
from src.hism.model import HismModel, grad_check, load_checkpoint, save_checkpoint
from src.utils.errors import ShapeError
from src.utils.models import HismConfig, Variant


def tiny_cfg(variant: Variant, dropout: float = 0.0) -> HismConfig:
    return HismConfig(
        variant=variant, image_size=8, conv_channels=(2, 3, 4), lstm_hidden=4,
        d_model=8, n_heads=2, n_layers=1, ffn_dim=8, fusion_hidden=(6, 5), dropout=dropout, T=6,
    )


def tiny_batch(seed: int = 0, n: int = 3):
    rng = np.random.default_rng(seed)
    images = rng.random((2, 4, 8, 8))
    image_index = np.array([0, 1, 0][:n])
    temporal = np.stack([rng.choice([-1.0, 1.0], size=(n, 6)), rng.random((n, 6))], axis=2)
    targets = rng.random(n)
    return images, image_index, temporal, targets


@pytest.mark.parametrize("variant", list(Variant))
def test_gradients_match_finite_differences(variant):
    model = HismModel(tiny_cfg(variant), seed=1)
    assert grad_check(model, *tiny_batch(), n_coords=150) < 1e-4


def test_conv_matches_explicit_sum():
    rng = np.random.default_rng(2)
    conv = Conv2D(2, 3, rng)
    x = rng.random((1, 2, 5, 6))
    out = conv.forward(x)
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    W, b = conv.params["W"], conv.params["b"]
    for o in range(3):
        for i in range(5):
            for j in range(6):
                want = np.sum(W[o] * xp[0, :, i:i + 3, j:j + 3]) + b[o]
                assert out[0, o, i, j] == pytest.approx(want)


def test_maxpool_drops_odd_edges():
    pool = MaxPool2()
    x = np.arange(2 * 5 * 5, dtype=float).reshape(1, 2, 5, 5)
    out = pool.forward(x)
    assert out.shape == (1, 2, 2, 2)
    assert out[0, 0, 0, 0] == x[0, 0, 1, 1]
    dx = pool.backward(np.ones_like(out))
    assert dx.sum() == 8.0
    assert not dx[:, :, 4, :].any() and not dx[:, :, :, 4].any()


def test_lstm_returns_last_hidden_state():
    lstm = LSTM(2, 3, np.random.default_rng(3))
    x = np.random.default_rng(4).random((5, 7, 2))
    h = lstm.forward(x)
    assert h.shape == (5, 3)
    assert np.all(np.abs(h) < 1.0)


def test_dropout_only_in_training():
    layer = Dropout(0.5, np.random.default_rng(5))
    x = np.ones((100, 10))
    assert layer.forward(x) is x
    dropped = layer.forward(x, train=True)
    assert set(np.unique(dropped)) <= {0.0, 2.0}
    assert 0.3 < np.mean(dropped == 0.0) < 0.7


def test_positions_table():
    table = sinusoidal_positions(60, 32)
    assert table.shape == (60, 32)
    assert table[0, 0] == 0.0 and table[0, 1] == 1.0


def test_forward_shapes_and_range():
    model = HismModel(tiny_cfg(Variant.TRAN_ENC_TASK), seed=0)
    images, index, temporal, _ = tiny_batch()
    pred = model.forward(images, index, temporal)
    assert pred.shape == (3,)
    assert np.all((pred > 0) & (pred < 1))
    assert model.predict(images, index, temporal, batch_size=2) == pytest.approx(pred)


def test_task_channel_is_ignored_without_task_input():
    model = HismModel(tiny_cfg(Variant.TRAN_ENC), seed=0)
    images, index, temporal, _ = tiny_batch()
    changed = temporal.copy()
    changed[:, :, 1] = 0.0
    assert model.forward(images, index, changed) == pytest.approx(model.forward(images, index, temporal))


def test_dropout_makes_training_forward_stochastic():
    model = HismModel(tiny_cfg(Variant.LSTM, dropout=0.5), seed=0)
    images, index, temporal, _ = tiny_batch()
    eval_a = model.forward(images, index, temporal)
    eval_b = model.forward(images, index, temporal)
    assert np.array_equal(eval_a, eval_b)
    assert not np.array_equal(model.forward(images, index, temporal, train=True), eval_a)


def test_shape_errors():
    model = HismModel(tiny_cfg(Variant.LSTM), seed=0)
    images, index, temporal, _ = tiny_batch()
    with pytest.raises(ShapeError):
        model.forward(images[:, :3], index, temporal)
    with pytest.raises(ShapeError):
        model.forward(images, index, temporal[:, :5])
    with pytest.raises(ShapeError):
        model.forward(images, np.array([0, 2, 0]), temporal)
    with pytest.raises(ShapeError):
        model.forward(images, index[:2], temporal)


def test_output_bias_starts_at_target_mean():
    model = HismModel(tiny_cfg(Variant.LSTM), seed=0)
    model.set_output_bias(0.25)
    assert dict(model.head)["out"].params["b"][0] == pytest.approx(np.log(0.25 / 0.75))


def test_same_seed_same_weights():
    a = HismModel(tiny_cfg(Variant.TRAN_ENC), seed=9).state_dict()
    b = HismModel(tiny_cfg(Variant.TRAN_ENC), seed=9).state_dict()
    assert a.keys() == b.keys()
    assert all(np.array_equal(a[k], b[k]) for k in a)


@pytest.mark.parametrize("variant", list(Variant))
def test_checkpoint_round_trip(variant, tmp_path):
    model = HismModel(tiny_cfg(variant), seed=4)
    images, index, temporal, _ = tiny_batch()
    path = save_checkpoint(model, tmp_path / f"{variant.value}.bin")
    assert path.read_bytes()[:4] == b"HISM"

    restored = load_checkpoint(path)
    assert restored.cfg == model.cfg
    assert restored.parameter_count() == model.parameter_count()
    assert restored.forward(images, index, temporal) == pytest.approx(
        model.forward(images, index, temporal), rel=1e-5
    )


def test_bad_checkpoints(tmp_path):
    path = save_checkpoint(HismModel(tiny_cfg(Variant.LSTM)), tmp_path / "m.bin")
    data = path.read_bytes()
    (tmp_path / "magic.bin").write_bytes(b"NOPE" + data[4:])
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "magic.bin")
    (tmp_path / "trailing.bin").write_bytes(data + b"\x00\x00\x00\x00")
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "trailing.bin")


def test_load_state_dict_checks_shapes():
    model = HismModel(tiny_cfg(Variant.LSTM))
    state = model.state_dict()
    name = next(iter(state))
    state[name] = np.zeros(3)
    with pytest.raises(ShapeError):
        model.load_state_dict(state)
