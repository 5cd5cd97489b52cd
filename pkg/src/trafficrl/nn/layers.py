"""Layer kernels with explicit forward caches and hand-written backward passes.

Parameters live in a flat ``dict[str, ndarray]`` owned by the network; each
layer only knows the names of its tensors, so the same layer object works on
any parameter set of the right shape (private worker copies, perturbed
copies during gradient checks, ...).
"""

from __future__ import annotations

import numpy as np

Params = dict[str, np.ndarray]


def sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def orthogonal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    return q if rows >= cols else q.T


class Linear:
    def __init__(self, name: str, n_in: int, n_out: int, activation: str | None = None) -> None:
        self.name = name
        self.n_in = n_in
        self.n_out = n_out
        self.activation = activation
        self.W = f"{name}.W"
        self.b = f"{name}.b"

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return {self.W: (self.n_out, self.n_in), self.b: (self.n_out,)}

    def init(self, rng: np.random.Generator, params: Params, gain: float = 1.0) -> None:
        bound = gain / np.sqrt(self.n_in)
        params[self.W] = rng.uniform(-bound, bound, (self.n_out, self.n_in))
        params[self.b] = np.zeros(self.n_out)

    def forward(self, p: Params, x: np.ndarray):
        y = p[self.W] @ x + p[self.b]
        if self.activation == "tanh":
            y = np.tanh(y)
        return y, (x, y)

    def backward(self, p: Params, dy: np.ndarray, cache, grads: Params) -> np.ndarray:
        x, y = cache
        if self.activation == "tanh":
            dy = dy * (1.0 - y * y)
        grads[self.W] += np.outer(dy, x)
        grads[self.b] += dy
        return p[self.W].T @ dy


class LSTMCell:
    """Standard LSTM step; gate blocks ordered input, forget, cell, output."""

    def __init__(self, name: str, n_in: int, hidden: int) -> None:
        self.name = name
        self.n_in = n_in
        self.hidden = hidden
        self.Wx = f"{name}.Wx"
        self.Wh = f"{name}.Wh"
        self.b = f"{name}.b"

    @property
    def state_shape(self) -> tuple[int, ...]:
        return (self.hidden,)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        H = self.hidden
        return {self.Wx: (4 * H, self.n_in), self.Wh: (4 * H, H), self.b: (4 * H,)}

    def init(self, rng: np.random.Generator, params: Params) -> None:
        H = self.hidden
        bound = 1.0 / np.sqrt(self.n_in)
        params[self.Wx] = rng.uniform(-bound, bound, (4 * H, self.n_in))
        params[self.Wh] = np.concatenate([orthogonal(rng, H, H) for _ in range(4)])
        b = np.zeros(4 * H)
        b[H:2 * H] = 1.0
        params[self.b] = b

    def forward(self, p: Params, x: np.ndarray, h: np.ndarray, c: np.ndarray):
        H = self.hidden
        z = p[self.Wx] @ x + p[self.Wh] @ h + p[self.b]
        i = sigmoid(z[:H])
        f = sigmoid(z[H:2 * H])
        g = np.tanh(z[2 * H:3 * H])
        o = sigmoid(z[3 * H:])
        c_new = f * c + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        return h_new, c_new, (x, h, c, i, f, g, o, tc)

    def backward(self, p: Params, dh_new, dc_new, cache, grads: Params):
        x, h, c, i, f, g, o, tc = cache
        do = dh_new * tc
        dc = dc_new + dh_new * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            do * o * (1.0 - o),
        ])
        grads[self.Wx] += np.outer(dz, x)
        grads[self.Wh] += np.outer(dz, h)
        grads[self.b] += dz
        return p[self.Wx].T @ dz, p[self.Wh].T @ dz, dc * f


class _Im2Col:
    """Index tables for a same-padded, stride-1 convolution on a fixed grid."""

    def __init__(self, channels: int, height: int, width: int, k: int) -> None:
        pad = k // 2
        self.channels, self.height, self.width, self.k, self.pad = channels, height, width, k, pad
        self.padded = (channels, height + 2 * pad, width + 2 * pad)
        ph, pw = self.padded[1], self.padded[2]
        c, ki, kj, r, col = np.meshgrid(
            np.arange(channels), np.arange(k), np.arange(k), np.arange(height), np.arange(width), indexing="ij"
        )
        flat = c * ph * pw + (r + ki) * pw + (col + kj)
        self.index = flat.reshape(channels * k * k, height * width)

    def cols(self, x: np.ndarray) -> np.ndarray:
        xp = np.pad(x, ((0, 0), (self.pad, self.pad), (self.pad, self.pad)))
        return xp.reshape(-1)[self.index]

    def fold(self, dcols: np.ndarray) -> np.ndarray:
        dxp = np.zeros(int(np.prod(self.padded)))
        np.add.at(dxp, self.index.reshape(-1), dcols.reshape(-1))
        dxp = dxp.reshape(self.padded)
        p = self.pad
        return dxp[:, p:p + self.height, p:p + self.width]


class ConvLSTMCell:
    """Convolutional LSTM over a small 2-D grid (same padding, stride 1)."""

    def __init__(self, name: str, in_channels: int, channels: int, grid: tuple[int, int], kernel: int = 3) -> None:
        if kernel % 2 != 1:
            raise ValueError("kernel size must be odd for same padding")
        self.name = name
        self.in_channels = in_channels
        self.channels = channels
        self.grid = grid
        self.kernel = kernel
        self.Wx = f"{name}.Wx"
        self.Wh = f"{name}.Wh"
        self.b = f"{name}.b"
        self._x_cols = _Im2Col(in_channels, grid[0], grid[1], kernel)
        self._h_cols = _Im2Col(channels, grid[0], grid[1], kernel)

    @property
    def state_shape(self) -> tuple[int, ...]:
        return (self.channels, *self.grid)

    def shapes(self) -> dict[str, tuple[int, ...]]:
        C, k = self.channels, self.kernel
        return {self.Wx: (4 * C, self.in_channels, k, k), self.Wh: (4 * C, C, k, k), self.b: (4 * C,)}

    def init(self, rng: np.random.Generator, params: Params) -> None:
        C, k = self.channels, self.kernel
        fan_in = self.in_channels * k * k
        bound = 1.0 / np.sqrt(fan_in)
        params[self.Wx] = rng.uniform(-bound, bound, (4 * C, self.in_channels, k, k))
        params[self.Wh] = np.concatenate(
            [orthogonal(rng, C, C * k * k).reshape(C, C, k, k) for _ in range(4)]
        )
        b = np.zeros(4 * C)
        b[C:2 * C] = 1.0
        params[self.b] = b

    def forward(self, p: Params, x: np.ndarray, h: np.ndarray, c: np.ndarray):
        C = self.channels
        n = self.grid[0] * self.grid[1]
        xc = self._x_cols.cols(x)
        hc = self._h_cols.cols(h)
        z = p[self.Wx].reshape(4 * C, -1) @ xc + p[self.Wh].reshape(4 * C, -1) @ hc + p[self.b][:, None]
        i = sigmoid(z[:C])
        f = sigmoid(z[C:2 * C])
        g = np.tanh(z[2 * C:3 * C])
        o = sigmoid(z[3 * C:])
        c_flat = c.reshape(C, n)
        c_new = f * c_flat + i * g
        tc = np.tanh(c_new)
        h_new = o * tc
        shape = (C, *self.grid)
        return h_new.reshape(shape), c_new.reshape(shape), (xc, hc, c_flat, i, f, g, o, tc)

    def backward(self, p: Params, dh_new, dc_new, cache, grads: Params):
        xc, hc, c_flat, i, f, g, o, tc = cache
        C = self.channels
        n = self.grid[0] * self.grid[1]
        dh_new = dh_new.reshape(C, n)
        dc_new = dc_new.reshape(C, n)
        do = dh_new * tc
        dc = dc_new + dh_new * o * (1.0 - tc * tc)
        dz = np.concatenate([
            dc * g * i * (1.0 - i),
            dc * c_flat * f * (1.0 - f),
            dc * i * (1.0 - g * g),
            do * o * (1.0 - o),
        ])
        Wx = p[self.Wx].reshape(4 * C, -1)
        Wh = p[self.Wh].reshape(4 * C, -1)
        grads[self.Wx] += (dz @ xc.T).reshape(grads[self.Wx].shape)
        grads[self.Wh] += (dz @ hc.T).reshape(grads[self.Wh].shape)
        grads[self.b] += dz.sum(axis=1)
        dx = self._x_cols.fold(Wx.T @ dz)
        dh = self._h_cols.fold(Wh.T @ dz)
        shape = (C, *self.grid)
        return dx, dh, (dc * f).reshape(shape)
