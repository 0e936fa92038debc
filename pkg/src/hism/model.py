"""
Dual-branch NS predictor: spatial encoder + temporal branch + fusion head
"""
import json
import logging
import struct
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from src.hism.layers import (
    LSTM,
    Conv2D,
    Dense,
    Dropout,
    GlobalAvgPool,
    Layer,
    MaxPool2,
    ReLU,
    Sigmoid,
    TransformerEncoderLayer,
    sinusoidal_positions,
)
from src.utils.errors import ShapeError
from src.utils.models import HismConfig, Variant

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"HISM"
CHECKPOINT_VERSION = 1
_U32 = struct.Struct("<I")


class HismModel:
    """
    Predicts NS(e, t) in (0, 1) from a stacked image and temporal vectors

    The spatial encoder runs once per unique image of a batch; samples
    reference their image by index.
    """

    def __init__(self, cfg: Optional[HismConfig] = None, seed: int = 0):
        self.cfg = cfg or HismConfig()
        self.seed = seed
        rng = np.random.default_rng(np.random.SeedSequence([seed, 4099]))
        self.dropout_rng = np.random.default_rng(np.random.SeedSequence([seed, 8191]))
        cfg = self.cfg

        in_c = cfg.color_channels + 1
        self.spatial: List[Tuple[str, Layer]] = []
        for i, out_c in enumerate(cfg.conv_channels):
            self.spatial += [
                (f"conv{i + 1}", Conv2D(in_c, out_c, rng)),
                (f"relu{i + 1}", ReLU()),
                (f"pool{i + 1}", MaxPool2()),
            ]
            in_c = out_c
        self.spatial.append(("gap", GlobalAvgPool()))
        spatial_dim = cfg.conv_channels[-1]

        self.temporal: List[Tuple[str, Layer]] = []
        if cfg.variant == Variant.LSTM:
            self.temporal.append(("lstm", LSTM(cfg.temporal_input_dim, cfg.lstm_hidden, rng)))
            temporal_dim = cfg.lstm_hidden
            self.positions = None
        else:
            self.temporal.append(("embed", Dense(cfg.temporal_input_dim, cfg.d_model, rng)))
            for i in range(cfg.n_layers):
                self.temporal.append(
                    (f"enc{i + 1}", TransformerEncoderLayer(cfg.d_model, cfg.n_heads, cfg.ffn_dim, rng))
                )
            temporal_dim = cfg.d_model
            self.positions = sinusoidal_positions(cfg.T, cfg.d_model)

        h1, h2 = cfg.fusion_hidden
        self.head: List[Tuple[str, Layer]] = [
            ("fc1", Dense(spatial_dim + temporal_dim, h1, rng, init="he")),
            ("fc1_relu", ReLU()),
            ("fc1_drop", Dropout(cfg.dropout, self.dropout_rng)),
            ("fc2", Dense(h1, h2, rng, init="he")),
            ("fc2_relu", ReLU()),
            ("fc2_drop", Dropout(cfg.dropout, self.dropout_rng)),
            ("out", Dense(h2, 1, rng)),
            ("sigmoid", Sigmoid()),
        ]
        self.spatial_dim = spatial_dim
        self._cache = None

    # ------------------------------------------------------------------
    # Parameters
    # ------------------------------------------------------------------

    def layers(self) -> Iterator[Tuple[str, Layer]]:
        yield from self.spatial
        yield from self.temporal
        yield from self.head

    def parameters(self) -> Iterator[Tuple[str, np.ndarray, np.ndarray]]:
        """(name, value, grad) in a fixed order"""
        for lname, layer in self.layers():
            for pname in layer.params:
                yield f"{lname}.{pname}", layer.params[pname], layer.grads[pname]

    def parameter_count(self) -> int:
        return int(sum(p.size for _, p, _ in self.parameters()))

    def zero_grad(self) -> None:
        for _, layer in self.layers():
            layer.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value, _ in self.parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for name, value, _ in self.parameters():
            if name not in state:
                raise ShapeError(f"Checkpoint lacks parameter {name}")
            if state[name].shape != value.shape:
                raise ShapeError(f"{name}: checkpoint shape {state[name].shape} != model shape {value.shape}")
            # in place: attention blocks share arrays with their sublayers
            value[...] = state[name]

    def set_output_bias(self, mean_target: float) -> None:
        """Start the logistic output at the target mean"""
        p = float(np.clip(mean_target, 1e-4, 1 - 1e-4))
        dict(self.head)["out"].params["b"][...] = np.log(p / (1.0 - p))

    # ------------------------------------------------------------------
    # Forward / backward
    # ------------------------------------------------------------------

    def _check_shapes(self, images: np.ndarray, image_index: np.ndarray, temporal: np.ndarray) -> None:
        cfg = self.cfg
        want = (cfg.color_channels + 1, cfg.image_size, cfg.image_size)
        if images.ndim != 4 or images.shape[1:] != want:
            raise ShapeError(f"Images must have shape (M, {want[0]}, {want[1]}, {want[2]}), got {images.shape}")
        if temporal.ndim != 3 or temporal.shape[1] != cfg.T or temporal.shape[2] < cfg.temporal_input_dim:
            raise ShapeError(
                f"Temporal input must have shape (N, {cfg.T}, >={cfg.temporal_input_dim}), got {temporal.shape}"
            )
        if image_index.shape != (temporal.shape[0],):
            raise ShapeError(f"image_index has shape {image_index.shape}, expected ({temporal.shape[0]},)")
        if image_index.size and (image_index.min() < 0 or image_index.max() >= images.shape[0]):
            raise ShapeError("image_index references a missing image")

    def forward(
        self,
        images: np.ndarray,
        image_index: np.ndarray,
        temporal: np.ndarray,
        train: bool = False,
    ) -> np.ndarray:
        """
        Batched prediction

        Args:
            images: (M, C+1, S, S) unique stacked inputs
            image_index: (N,) image of each sample
            temporal: (N, T, 2) with v in [..., 0] and c in [..., 1]
            train: Enables dropout

        Returns:
            (N,) predictions in (0, 1)
        """
        images = np.asarray(images, dtype=np.float64)
        image_index = np.asarray(image_index, dtype=np.int64)
        temporal = np.asarray(temporal, dtype=np.float64)
        self._check_shapes(images, image_index, temporal)

        s = images
        for _, layer in self.spatial:
            s = layer.forward(s, train)

        t = temporal[:, :, :self.cfg.temporal_input_dim]
        for name, layer in self.temporal:
            t = layer.forward(t, train)
            if name == "embed":
                t = t + self.positions
        if t.ndim == 3:
            t = t[:, -1]

        z = np.concatenate([s[image_index], t], axis=1)
        for _, layer in self.head:
            z = layer.forward(z, train)

        self._cache = (images.shape[0], image_index, temporal.shape)
        return z[:, 0]

    def backward(self, dpred: np.ndarray) -> None:
        """Accumulate parameter gradients for dL/dpred of the last forward"""
        n_images, image_index, t_shape = self._cache
        dz = np.asarray(dpred, dtype=np.float64)[:, None]
        for _, layer in reversed(self.head):
            dz = layer.backward(dz)

        ds_samples, dt = dz[:, :self.spatial_dim], dz[:, self.spatial_dim:]
        ds = np.zeros((n_images, self.spatial_dim))
        np.add.at(ds, image_index, ds_samples)
        for _, layer in reversed(self.spatial):
            ds = layer.backward(ds)

        if self.cfg.variant != Variant.LSTM:
            full = np.zeros((t_shape[0], self.cfg.T, self.cfg.d_model))
            full[:, -1] = dt
            dt = full
        for _, layer in reversed(self.temporal):
            dt = layer.backward(dt)

    def predict(self, images: np.ndarray, image_index: np.ndarray, temporal: np.ndarray,
                batch_size: int = 256) -> np.ndarray:
        """Eval-mode forward in chunks"""
        out = []
        for lo in range(0, len(image_index), batch_size):
            out.append(self.forward(images, image_index[lo:lo + batch_size], temporal[lo:lo + batch_size]))
        return np.concatenate(out) if out else np.zeros(0)

    def mse_loss(self, images, image_index, temporal, targets, train: bool = False) -> Tuple[float, np.ndarray]:
        """(loss, dL/dpred) of the mean squared error"""
        pred = self.forward(images, image_index, temporal, train)
        diff = pred - np.asarray(targets, dtype=np.float64)
        return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def grad_check(
    model: HismModel,
    images: np.ndarray,
    image_index: np.ndarray,
    temporal: np.ndarray,
    targets: np.ndarray,
    eps: float = 1e-5,
    n_coords: int = 200,
    seed: int = 0,
) -> float:
    """
    Compare analytic MSE gradients with central finite differences

    Coordinates are drawn from every parameter tensor so each layer type
    is covered, topped up at random to n_coords.

    Returns:
        Max relative error |a - n| / max(|a|, |n|, 1e-5)
    """
    model.zero_grad()
    _, dpred = model.mse_loss(images, image_index, temporal, targets)
    model.backward(dpred)

    params = list(model.parameters())
    rng = np.random.default_rng(seed)
    per_tensor = max(1, int(np.ceil(n_coords / len(params))))
    coords = []
    for t_idx, (_, value, _) in enumerate(params):
        k = min(value.size, per_tensor)
        coords += [(t_idx, int(i)) for i in rng.choice(value.size, size=k, replace=False)]
    while len(coords) < n_coords:
        t_idx = int(rng.integers(len(params)))
        coords.append((t_idx, int(rng.integers(params[t_idx][1].size))))

    worst = 0.0
    for t_idx, flat in coords:
        name, value, grad = params[t_idx]
        view = value.reshape(-1)
        old = view[flat]
        view[flat] = old + eps
        plus, _ = model.mse_loss(images, image_index, temporal, targets)
        view[flat] = old - eps
        minus, _ = model.mse_loss(images, image_index, temporal, targets)
        view[flat] = old

        numeric = (plus - minus) / (2.0 * eps)
        analytic = float(grad.reshape(-1)[flat])
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-5)
        if rel > worst:
            worst = rel
            logger.debug("grad_check %s[%d]: analytic %.3e numeric %.3e", name, flat, analytic, numeric)
    return worst


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def save_checkpoint(model: HismModel, path: Union[str, Path]) -> Path:
    """
    magic "HISM", u32 version, u32 tag length + variant tag,
    u32 manifest length + JSON manifest, then float32 LE blobs in manifest order
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    params = [(name, value) for name, value, _ in model.parameters()]
    manifest = {
        "config": model.cfg.model_dump(mode="json"),
        "seed": model.seed,
        "params": [{"name": n, "shape": list(v.shape)} for n, v in params],
    }
    tag = model.cfg.variant.value.encode("utf-8")
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(_U32.pack(CHECKPOINT_VERSION))
        f.write(_U32.pack(len(tag)))
        f.write(tag)
        f.write(_U32.pack(len(blob)))
        f.write(blob)
        for _, value in params:
            f.write(value.astype("<f4").tobytes(order="C"))
    return path


def load_checkpoint(path: Union[str, Path]) -> HismModel:
    with open(path, "rb") as f:
        if f.read(4) != CHECKPOINT_MAGIC:
            raise ValueError(f"{path} is not a HISM checkpoint")
        (version,) = _U32.unpack(f.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (tag_len,) = _U32.unpack(f.read(4))
        tag = f.read(tag_len).decode("utf-8")
        (man_len,) = _U32.unpack(f.read(4))
        manifest = json.loads(f.read(man_len).decode("utf-8"))
        payload = f.read()

    cfg = HismConfig(**manifest["config"])
    if cfg.variant.value != tag:
        raise ValueError(f"{path}: tag {tag} disagrees with manifest variant {cfg.variant.value}")
    model = HismModel(cfg, seed=manifest.get("seed", 0))

    state, offset = {}, 0
    for entry in manifest["params"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        chunk = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        state[entry["name"]] = chunk.astype(np.float64).reshape(entry["shape"])
        offset += 4 * count
    if offset != len(payload):
        raise ValueError(f"{path}: {len(payload) - offset} trailing bytes after parameters")
    model.load_state_dict(state)
    logger.info("Loaded %s checkpoint with %d parameters", tag, model.parameter_count())
    return model
