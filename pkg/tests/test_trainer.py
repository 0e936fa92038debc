import numpy as np
import pandas as pd
import pytest

from src.hism.model import HismModel
from src.hism.trainer import (
    Adam,
    ConstantMeanBaseline,
    EarlyStopping,
    PlateauScheduler,
    predict_series,
    train,
    write_history_csv,
)
from src.utils.errors import DegenerateInputError
from src.utils.models import HismConfig, HismDataset, TrainConfig, Variant

SMALL = HismConfig(
    image_size=8, conv_channels=(2, 3, 4), lstm_hidden=4, d_model=8, n_heads=2,
    n_layers=1, ffn_dim=8, fusion_hidden=(6, 5), dropout=0.1, T=6,
)


def synthetic_dataset(n: int = 40, seed: int = 0) -> HismDataset:
    rng = np.random.default_rng(seed)
    temporal = np.stack([rng.choice([-1.0, 1.0], size=(n, 6)), rng.random((n, 6))], axis=2)
    split = np.array((["train"] * 3 + ["val", "test"]) * (n // 5))
    return HismDataset(
        images=rng.random((2, 4, 8, 8)),
        image_index=rng.integers(0, 2, n),
        temporal=temporal,
        targets=0.2 + 0.1 * (temporal[:, -1, 0] > 0),
        event=np.arange(n) // 6,
        slice_index=np.arange(n) % 6,
        highlighted=temporal[:, -1, 0] > 0,
        split=split,
    )


def test_adam_first_step_moves_by_lr():
    model = HismModel(SMALL, seed=0)
    before = model.state_dict()
    for _, _, grad in model.parameters():
        grad.fill(2.0)
    Adam(model, lr=0.01).step()
    for name, value, _ in model.parameters():
        assert value == pytest.approx(before[name] - 0.01, abs=1e-8)


def test_plateau_scheduler_reduces_after_patience():
    model = HismModel(SMALL, seed=0)
    opt = Adam(model, lr=1e-3)
    sched = PlateauScheduler(opt, factor=0.8, patience=5)
    reduced = [sched.step(1.0) for _ in range(6)]
    assert reduced == [False] * 5 + [True]
    assert opt.lr == pytest.approx(8e-4)
    assert sched.reductions == 1
    assert not sched.step(0.5)
    assert sched.best == 0.5


def test_early_stopping():
    stopper = EarlyStopping(patience=3)
    for loss in (1.0, 0.9, 0.95, 0.95):
        stopper(loss)
        assert not stopper.early_stop
    stopper(0.95)
    assert stopper.early_stop
    assert stopper.best_loss == 0.9


def test_constant_mean_baseline():
    baseline = ConstantMeanBaseline().fit([0.1, 0.3])
    assert baseline.predict(3).tolist() == pytest.approx([0.2, 0.2, 0.2])
    with pytest.raises(DegenerateInputError):
        ConstantMeanBaseline().fit([])


def test_training_is_deterministic(tmp_path):
    ds = synthetic_dataset()
    cfg = TrainConfig(max_epochs=3, batch_size=8, lr=1e-3)
    a = train(ds, Variant.TRAN_ENC_TASK, cfg, seed=5, hism_cfg=SMALL, quiet=True)
    b = train(ds, Variant.TRAN_ENC_TASK, cfg, seed=5, hism_cfg=SMALL, quiet=True)
    assert [h.model_dump() for h in a.history] == [h.model_dump() for h in b.history]
    assert 1 <= a.best_epoch <= 3
    assert a.best_val_mse == min(h.val_mse for h in a.history)

    test = ds.subset("test")
    assert np.array_equal(
        a.model.predict(test.images, test.image_index, test.temporal),
        b.model.predict(test.images, test.image_index, test.temporal),
    )

    path = write_history_csv(a.history, tmp_path / "history.csv")
    frame = pd.read_csv(path)
    assert list(frame.columns) == ["epoch", "train_mse", "val_mse", "lr"]
    assert frame["epoch"].tolist() == [1, 2, 3]


def test_training_stops_early_without_progress():
    cfg = TrainConfig(max_epochs=50, batch_size=8, lr=1e-12, early_stop_epochs=2, min_delta=1e-3)
    result = train(synthetic_dataset(), Variant.LSTM, cfg, seed=0, hism_cfg=SMALL, quiet=True)
    assert len(result.history) == 3
    assert 1 <= result.best_epoch <= 3


def test_training_needs_a_validation_split():
    ds = synthetic_dataset()
    ds.split[:] = "train"
    with pytest.raises(DegenerateInputError):
        train(ds, Variant.LSTM, TrainConfig(max_epochs=1), hism_cfg=SMALL, quiet=True)


def test_predict_series(short_trace, layout):
    model = HismModel(SMALL.model_copy(update={"image_size": 16, "T": 60}), seed=0)
    iv = next(iv for iv in short_trace.plan.critical_intervals() if iv.onset_s >= 15.0)
    series = predict_series(model, short_trace, layout, iv)
    assert series.element_id == layout.element_for(iv.drone_index, iv.kind).id
    assert len(series.ns) == 60
    assert all(0.0 < v < 1.0 for v in series.ns)
