"""
Training loop, optimizer, LR schedule and baselines for the NS predictor
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.hism.dataset import right_align, slice_states, stack_input
from src.hism.model import HismModel
from src.simulation.dronesim import drone_simulator
from src.utils.errors import DegenerateInputError
from src.utils.models import (
    HismConfig,
    HismDataset,
    Interval,
    Layout,
    NsSeries,
    ScenarioTrace,
    TimeGrid,
    TrainConfig,
    TrainHistoryRow,
    TrainResult,
    Variant,
)

logger = logging.getLogger(__name__)


class Adam:
    """Adaptive-moment gradient descent over a model's parameters"""

    def __init__(self, model: HismModel, lr: float = 1e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.model = model
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: Dict[str, np.ndarray] = {}
        self.v: Dict[str, np.ndarray] = {}
        for name, value, _ in model.parameters():
            self.m[name] = np.zeros_like(value)
            self.v[name] = np.zeros_like(value)

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, value, grad in self.model.parameters():
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            value -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class PlateauScheduler:
    """Multiply the LR by factor after `patience` epochs without improvement"""

    def __init__(self, optimizer: Adam, factor: float = 0.8, patience: int = 5, min_delta: float = 0.0):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.best: Optional[float] = None
        self.counter = 0
        self.reductions = 0

    def step(self, val_loss: float) -> bool:
        """Returns True when the LR was reduced"""
        if self.best is None or self.best - val_loss > self.min_delta:
            self.best = val_loss
            self.counter = 0
            return False
        self.counter += 1
        if self.counter >= self.patience:
            old = self.optimizer.lr
            self.optimizer.lr = old * self.factor
            self.counter = 0
            self.reductions += 1
            logger.info("Learning rate %.3g -> %.3g", old, self.optimizer.lr)
            return True
        return False


class EarlyStopping:
    """
    Stop training when the validation loss does not improve for
    `patience` epochs
    """

    def __init__(self, patience: int = 10, min_delta: float = 0.0):
        self.patience = patience
        self.min_delta = min_delta
        self.counter = 0
        self.best_loss: Optional[float] = None
        self.early_stop = False

    def __call__(self, val_loss: float) -> None:
        if self.best_loss is None or self.best_loss - val_loss > self.min_delta:
            self.best_loss = val_loss
            self.counter = 0
            return
        self.counter += 1
        logger.debug("Early stopping counter %d of %d", self.counter, self.patience)
        if self.counter >= self.patience:
            logger.info("Early stopping")
            self.early_stop = True


class ConstantMeanBaseline:
    """Predicts the training-target mean everywhere"""

    def __init__(self, mean: float = 0.0):
        self.mean = mean

    def fit(self, targets: np.ndarray) -> "ConstantMeanBaseline":
        targets = np.asarray(targets, dtype=np.float64)
        if targets.size == 0:
            raise DegenerateInputError("Cannot fit a constant baseline to no targets")
        self.mean = float(targets.mean())
        return self

    def predict(self, n: int) -> np.ndarray:
        return np.full(n, self.mean)


def train(
    dataset: HismDataset,
    variant: Variant = Variant.TRAN_ENC_TASK,
    cfg: Optional[TrainConfig] = None,
    seed: int = 0,
    hism_cfg: Optional[HismConfig] = None,
    quiet: bool = False,
) -> TrainResult:
    """
    Fit a predictor with MSE, Adam, plateau LR decay and early stopping

    The output bias starts at the logit of the mean training target and the
    parameters of the best validation epoch are restored at the end.

    Args:
        dataset: Pairs with train/val/test labels
        variant: Temporal branch
        cfg: Training hyperparameters
        seed: Seeds initialization, shuffling and dropout
        hism_cfg: Architecture; image size is taken from the dataset
        quiet: Disable the progress bar

    Returns:
        TrainResult with the restored model and per-epoch history
    """
    cfg = cfg or TrainConfig()
    hism_cfg = (hism_cfg or HismConfig()).model_copy(
        update={"variant": variant, "image_size": int(dataset.images.shape[-1])}
    )
    train_set, val_set = dataset.subset("train"), dataset.subset("val")
    if train_set.n_pairs == 0 or val_set.n_pairs == 0:
        raise DegenerateInputError(
            f"Empty split partition: {train_set.n_pairs} train / {val_set.n_pairs} val pairs"
        )

    model = HismModel(hism_cfg, seed=seed)
    model.set_output_bias(float(train_set.targets.mean()))
    optimizer = Adam(model, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    scheduler = PlateauScheduler(optimizer, cfg.lr_factor, cfg.plateau_epochs, cfg.min_delta)
    stopper = EarlyStopping(cfg.early_stop_epochs, cfg.min_delta)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 131]))
    logger.info("Training %s with %d parameters on %d pairs", variant.value, model.parameter_count(), train_set.n_pairs)

    history: List[TrainHistoryRow] = []
    best_state = model.state_dict()
    best_val = float("inf")
    best_epoch = 0

    epochs = tqdm(range(1, cfg.max_epochs + 1), desc=f"train {variant.value}", disable=quiet, leave=False)
    for epoch in epochs:
        order = rng.permutation(train_set.n_pairs)
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            model.zero_grad()
            loss, dpred = model.mse_loss(
                train_set.images, train_set.image_index[batch], train_set.temporal[batch],
                train_set.targets[batch], train=True,
            )
            model.backward(dpred)
            optimizer.step()
            total += loss * len(batch)

        val_pred = model.predict(val_set.images, val_set.image_index, val_set.temporal)
        val_mse = float(np.mean((val_pred - val_set.targets) ** 2))
        history.append(TrainHistoryRow(
            epoch=epoch, train_mse=total / train_set.n_pairs, val_mse=val_mse, lr=optimizer.lr,
        ))
        epochs.set_postfix(val=f"{val_mse:.5f}")

        if val_mse < best_val:
            best_val, best_epoch = val_mse, epoch
            best_state = model.state_dict()

        scheduler.step(val_mse)
        stopper(val_mse)
        if stopper.early_stop:
            break

    model.load_state_dict(best_state)
    logger.info("Best validation MSE %.5f at epoch %d of %d", best_val, best_epoch, len(history))
    return TrainResult(model=model, history=history, best_epoch=best_epoch, best_val_mse=best_val)


def predict_series(
    model: HismModel,
    trace: ScenarioTrace,
    layout: Layout,
    interval: Interval,
    grid: Optional[TimeGrid] = None,
) -> NsSeries:
    """
    Predicted NS of the interval's critical element over the event window

    Each slice is predicted from the inputs available when it closes.
    """
    grid = grid or TimeGrid()
    element = layout.element_for(interval.drone_index, interval.kind)
    shown = drone_simulator.highlighted_ids(trace, layout, interval.onset_s)
    frame = drone_simulator.render_frame(layout, shown)
    image = stack_input(frame, layout, element, model.cfg.image_size).values[None]

    states, values = slice_states(trace, layout, element, interval.onset_s, grid)
    temporal = np.stack([
        np.stack([right_align(states, k + 1, grid.T), right_align(values, k + 1, grid.T)], axis=1)
        for k in range(grid.T)
    ])
    pred = model.predict(image, np.zeros(grid.T, dtype=np.int64), temporal)
    return NsSeries(
        element_id=element.id,
        t_rel_s=[round(float(t), 6) for t in grid.slice_starts()],
        ns=[float(p) for p in pred],
    )


def write_history_csv(history: List[TrainHistoryRow], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([h.model_dump() for h in history], columns=["epoch", "train_mse", "val_mse", "lr"]).to_csv(
        path, index=False, lineterminator="\n"
    )
    return path
