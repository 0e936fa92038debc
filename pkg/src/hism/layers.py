"""
Layers with hand-written reverse-mode gradients (float64 numpy)

Each layer caches what its backward pass needs during forward(),
accumulates parameter gradients into self.grads and returns the gradient
with respect to its input.
"""
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class Layer:
    """Base layer: named parameter arrays and matching gradient arrays"""

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}

    def _add(self, name: str, value: np.ndarray) -> None:
        self.params[name] = value.astype(np.float64)
        self.grads[name] = np.zeros_like(self.params[name])

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape: Tuple[int, ...]) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def he_normal(rng: np.random.Generator, fan_in: int, shape: Tuple[int, ...]) -> np.ndarray:
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


# ---------------------------------------------------------------------------
# Spatial layers
# ---------------------------------------------------------------------------

class Conv2D(Layer):
    """3x3 (or k x k) convolution, stride 1, zero padding k // 2, NCHW"""

    def __init__(self, in_channels: int, out_channels: int, rng: np.random.Generator, kernel: int = 3):
        super().__init__()
        self.k = kernel
        self.pad = kernel // 2
        self._add("W", he_normal(rng, in_channels * kernel * kernel, (out_channels, in_channels, kernel, kernel)))
        self._add("b", np.zeros(out_channels))
        self._cache: Optional[Tuple[np.ndarray, Tuple[int, ...]]] = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        n, c, h, w = x.shape
        p = self.pad
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        # (N, C, H, W, k, k) -> rows of receptive fields
        windows = sliding_window_view(xp, (self.k, self.k), axis=(2, 3))
        cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * self.k * self.k)
        w_mat = self.params["W"].reshape(self.params["W"].shape[0], -1)
        out = cols @ w_mat.T + self.params["b"]
        self._cache = (cols, x.shape)
        return out.reshape(n, h, w, -1).transpose(0, 3, 1, 2)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        cols, (n, c, h, w) = self._cache
        o = dout.shape[1]
        d2 = dout.transpose(0, 2, 3, 1).reshape(-1, o)
        w_mat = self.params["W"].reshape(o, -1)
        self.grads["W"] += (d2.T @ cols).reshape(self.params["W"].shape)
        self.grads["b"] += d2.sum(axis=0)

        dcols = (d2 @ w_mat).reshape(n, h, w, c, self.k, self.k)
        p = self.pad
        dxp = np.zeros((n, c, h + 2 * p, w + 2 * p))
        for i in range(self.k):
            for j in range(self.k):
                dxp[:, :, i:i + h, j:j + w] += dcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return dxp[:, :, p:p + h, p:p + w]


class MaxPool2(Layer):
    """2x2 max pooling, stride 2; odd trailing rows/cols are dropped"""

    def __init__(self):
        super().__init__()
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        n, c, h, w = x.shape
        ho, wo = h // 2, w // 2
        blocks = x[:, :, :2 * ho, :2 * wo].reshape(n, c, ho, 2, wo, 2)
        flat = blocks.transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, 4)
        idx = np.argmax(flat, axis=-1)
        self._cache = (x.shape, idx)
        return np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        (n, c, h, w), idx = self._cache
        ho, wo = h // 2, w // 2
        dflat = np.zeros((n, c, ho, wo, 4))
        np.put_along_axis(dflat, idx[..., None], dout[..., None], axis=-1)
        dx = np.zeros((n, c, h, w))
        dx[:, :, :2 * ho, :2 * wo] = dflat.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * ho, 2 * wo)
        return dx


class GlobalAvgPool(Layer):
    def __init__(self):
        super().__init__()
        self._shape = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, dout: np.ndarray) -> np.ndarray:
        n, c, h, w = self._shape
        return np.broadcast_to(dout[:, :, None, None] / (h * w), self._shape).copy()


# ---------------------------------------------------------------------------
# Elementwise and dense layers
# ---------------------------------------------------------------------------

class Dense(Layer):
    """Affine map over the last axis; any leading shape"""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, init: str = "glorot"):
        super().__init__()
        if init == "he":
            w = he_normal(rng, in_dim, (in_dim, out_dim))
        else:
            w = glorot(rng, in_dim, out_dim, (in_dim, out_dim))
        self._add("W", w)
        self._add("b", np.zeros(out_dim))
        self._x = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._x = x
        return x @ self.params["W"] + self.params["b"]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        in_dim, out_dim = self.params["W"].shape
        self.grads["W"] += self._x.reshape(-1, in_dim).T @ dout.reshape(-1, out_dim)
        self.grads["b"] += dout.reshape(-1, out_dim).sum(axis=0)
        return dout @ self.params["W"].T


class ReLU(Layer):
    def __init__(self):
        super().__init__()
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return np.where(self._mask, dout, 0.0)


class Sigmoid(Layer):
    def __init__(self):
        super().__init__()
        self._y = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        # split by sign so exp never overflows
        e = np.exp(-np.abs(x))
        self._y = np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
        return self._y

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout * self._y * (1.0 - self._y)


class Dropout(Layer):
    """Inverted dropout; identity outside training"""

    def __init__(self, rate: float, rng: np.random.Generator):
        super().__init__()
        self.rate = rate
        self.rng = rng
        self._mask = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        if not train or self.rate <= 0:
            self._mask = None
            return x
        self._mask = (self.rng.random(x.shape) >= self.rate) / (1.0 - self.rate)
        return x * self._mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout if self._mask is None else dout * self._mask


class LayerNorm(Layer):
    def __init__(self, dim: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self._add("gamma", np.ones(dim))
        self._add("beta", np.zeros(dim))
        self._cache = None

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu) * inv
        self._cache = (xhat, inv)
        return xhat * self.params["gamma"] + self.params["beta"]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        xhat, inv = self._cache
        d = xhat.shape[-1]
        self.grads["gamma"] += (dout * xhat).reshape(-1, d).sum(axis=0)
        self.grads["beta"] += dout.reshape(-1, d).sum(axis=0)
        dxhat = dout * self.params["gamma"]
        return inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                      - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))


# ---------------------------------------------------------------------------
# Sequence layers
# ---------------------------------------------------------------------------

class LSTM(Layer):
    """Single-layer LSTM over (N, T, D); returns the last hidden state (N, H)"""

    def __init__(self, input_dim: int, hidden: int, rng: np.random.Generator):
        super().__init__()
        self.hidden = hidden
        self._add("W", glorot(rng, input_dim + hidden, 4 * hidden, (input_dim + hidden, 4 * hidden)))
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0  # forget gate
        self._add("b", b)
        self._cache: List[Tuple[np.ndarray, ...]] = []

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        n, t_len, _ = x.shape
        hd = self.hidden
        h = np.zeros((n, hd))
        c = np.zeros((n, hd))
        self._cache = []
        for t in range(t_len):
            z = np.concatenate([x[:, t], h], axis=1)
            a = z @ self.params["W"] + self.params["b"]
            i = 1.0 / (1.0 + np.exp(-a[:, :hd]))
            f = 1.0 / (1.0 + np.exp(-a[:, hd:2 * hd]))
            o = 1.0 / (1.0 + np.exp(-a[:, 2 * hd:3 * hd]))
            g = np.tanh(a[:, 3 * hd:])
            c_prev = c
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            self._cache.append((z, i, f, o, g, c_prev, tc))
        return h

    def backward(self, dout: np.ndarray) -> np.ndarray:
        hd = self.hidden
        w = self.params["W"]
        d_in = w.shape[0] - hd
        n = dout.shape[0]
        dx = np.zeros((n, len(self._cache), d_in))
        dh = dout
        dc = np.zeros((n, hd))
        for t in range(len(self._cache) - 1, -1, -1):
            z, i, f, o, g, c_prev, tc = self._cache[t]
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc ** 2)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            da = np.concatenate([
                di * i * (1.0 - i),
                df * f * (1.0 - f),
                do * o * (1.0 - o),
                dg * (1.0 - g ** 2),
            ], axis=1)
            self.grads["W"] += z.T @ da
            self.grads["b"] += da.sum(axis=0)
            dz = da @ w.T
            dx[:, t] = dz[:, :d_in]
            dh = dz[:, d_in:]
            dc = dc * f
        return dx


def sinusoidal_positions(t_len: int, d_model: int) -> np.ndarray:
    """(T, d) sin/cos position table"""
    pos = np.arange(t_len)[:, None]
    i = np.arange(d_model)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d_model)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


class MultiHeadAttention(Layer):
    """Scaled dot-product self-attention over (N, T, d)"""

    def __init__(self, d_model: int, n_heads: int, rng: np.random.Generator):
        super().__init__()
        self.n_heads = n_heads
        self.dh = d_model // n_heads
        self.q = Dense(d_model, d_model, rng)
        self.k = Dense(d_model, d_model, rng)
        self.v = Dense(d_model, d_model, rng)
        self.o = Dense(d_model, d_model, rng)
        for name, layer in (("q", self.q), ("k", self.k), ("v", self.v), ("o", self.o)):
            for p in layer.params:
                self.params[f"{name}.{p}"] = layer.params[p]
                self.grads[f"{name}.{p}"] = layer.grads[p]
        self._cache = None

    def _split(self, x: np.ndarray) -> np.ndarray:
        n, t, _ = x.shape
        return x.reshape(n, t, self.n_heads, self.dh).transpose(0, 2, 1, 3)

    def _merge(self, x: np.ndarray) -> np.ndarray:
        n, _, t, _ = x.shape
        return x.transpose(0, 2, 1, 3).reshape(n, t, self.n_heads * self.dh)

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        q = self._split(self.q.forward(x))
        k = self._split(self.k.forward(x))
        v = self._split(self.v.forward(x))
        scores = q @ k.transpose(0, 1, 3, 2) / np.sqrt(self.dh)
        scores = scores - scores.max(axis=-1, keepdims=True)
        att = np.exp(scores)
        att /= att.sum(axis=-1, keepdims=True)
        ctx = att @ v
        self._cache = (q, k, v, att)
        return self.o.forward(self._merge(ctx))

    def backward(self, dout: np.ndarray) -> np.ndarray:
        q, k, v, att = self._cache
        dctx = self._split(self.o.backward(dout))
        datt = dctx @ v.transpose(0, 1, 3, 2)
        dv = att.transpose(0, 1, 3, 2) @ dctx
        dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True)) / np.sqrt(self.dh)
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q
        return (
            self.q.backward(self._merge(dq))
            + self.k.backward(self._merge(dk))
            + self.v.backward(self._merge(dv))
        )


class TransformerEncoderLayer(Layer):
    """Post-norm block: LN(x + MHA(x)) then LN(h + FFN(h))"""

    def __init__(self, d_model: int, n_heads: int, ffn_dim: int, rng: np.random.Generator):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads, rng)
        self.norm1 = LayerNorm(d_model)
        self.ff1 = Dense(d_model, ffn_dim, rng, init="he")
        self.act = ReLU()
        self.ff2 = Dense(ffn_dim, d_model, rng)
        self.norm2 = LayerNorm(d_model)
        for name, layer in self.sublayers():
            for p in layer.params:
                self.params[f"{name}.{p}"] = layer.params[p]
                self.grads[f"{name}.{p}"] = layer.grads[p]

    def sublayers(self) -> Iterator[Tuple[str, Layer]]:
        yield from (
            ("attn", self.attn), ("norm1", self.norm1), ("ff1", self.ff1),
            ("ff2", self.ff2), ("norm2", self.norm2),
        )

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        h = self.norm1.forward(x + self.attn.forward(x))
        return self.norm2.forward(h + self.ff2.forward(self.act.forward(self.ff1.forward(h))))

    def backward(self, dout: np.ndarray) -> np.ndarray:
        dh = self.norm2.backward(dout)
        dh = dh + self.ff1.backward(self.act.backward(self.ff2.backward(dh)))
        dx = self.norm1.backward(dh)
        return dx + self.attn.backward(dx)
