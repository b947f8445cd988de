"""From-scratch neural network layers with exact analytic gradients.

Parameters live in one flat vector with named slices so the optimizer,
serialization, and finite-difference checks all see the same memory. Two
flat vectors exist per network: ``theta`` (trainable, touched by the
optimizer) and ``state`` (batch-norm running statistics, updated only in
training-mode forward passes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatch

BN_EPS = 1e-5
BN_MOMENTUM = 0.1


class ParamStore:
    """Named views into flat parameter/gradient/state vectors."""

    def __init__(self, dtype=np.float64):
        self.dtype = dtype
        self._specs = []          # (name, shape, trainable)
        self.theta = None
        self.grad = None
        self.state = None
        self.params = {}
        self.grads = {}
        self.slices = {}          # name -> (offset, shape, trainable)

    def add(self, name, shape, trainable=True):
        self._specs.append((name, tuple(shape), trainable))

    def allocate(self):
        n_theta = sum(int(np.prod(s)) for _, s, tr in self._specs if tr)
        n_state = sum(int(np.prod(s)) for _, s, tr in self._specs if not tr)
        self.theta = np.zeros(n_theta, dtype=self.dtype)
        self.grad = np.zeros(n_theta, dtype=self.dtype)
        self.state = np.zeros(n_state, dtype=self.dtype)
        ot = os = 0
        for name, shape, trainable in self._specs:
            size = int(np.prod(shape))
            if trainable:
                self.params[name] = self.theta[ot:ot + size].reshape(shape)
                self.grads[name] = self.grad[ot:ot + size].reshape(shape)
                self.slices[name] = (ot, shape, True)
                ot += size
            else:
                self.params[name] = self.state[os:os + size].reshape(shape)
                self.slices[name] = (os, shape, False)
                os += size

    def zero_grad(self):
        self.grad[:] = 0


class Dense:
    def __init__(self, name, n_in, n_out, store):
        self.name, self.n_in, self.n_out, self.store = name, n_in, n_out, store
        store.add(f"{name}.W", (n_in, n_out))
        store.add(f"{name}.b", (n_out,))

    def init(self, rng):
        bound = 1.0 / np.sqrt(self.n_in)
        p = self.store.params
        p[f"{self.name}.W"][:] = rng.uniform(-bound, bound, (self.n_in, self.n_out))
        p[f"{self.name}.b"][:] = 0.0

    def forward(self, x, training=False):
        self._x = x
        p = self.store.params
        return x @ p[f"{self.name}.W"] + p[f"{self.name}.b"]

    def backward(self, dy):
        p, g = self.store.params, self.store.grads
        g[f"{self.name}.W"] += self._x.T @ dy
        g[f"{self.name}.b"] += dy.sum(axis=0)
        return dy @ p[f"{self.name}.W"].T


class ReLU:
    def init(self, rng):
        pass

    def forward(self, x, training=False):
        self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, dy):
        return dy * self._mask


class Conv2D:
    """'Same' convolution (stride 1) via im2col, channels-last layout.

    Activations flow through the conv stack as (batch, H, W, C); this keeps
    every reduction and the im2col gather contiguous, which is what makes
    the from-scratch implementation fast enough on CPU.
    """

    def __init__(self, name, c_in, c_out, store, kernel=3):
        if kernel % 2 != 1:
            raise ValueError("odd kernels only")
        self.name, self.c_in, self.c_out, self.k = name, c_in, c_out, kernel
        self.pad = kernel // 2
        self.store = store
        store.add(f"{name}.W", (kernel, kernel, c_in, c_out))
        store.add(f"{name}.b", (c_out,))

    def init(self, rng):
        fan_in = self.c_in * self.k * self.k
        bound = 1.0 / np.sqrt(fan_in)
        p = self.store.params
        p[f"{self.name}.W"][:] = rng.uniform(-bound, bound, p[f"{self.name}.W"].shape)
        p[f"{self.name}.b"][:] = 0.0

    def forward(self, x, training=False):
        B, H, W, C = x.shape
        if C != self.c_in:
            raise ShapeMismatch(f"{self.name}: expected {self.c_in} input channels, got {C}")
        p = self.store.params
        xp = np.pad(x, ((0, 0), (self.pad, self.pad), (self.pad, self.pad), (0, 0)))
        if C == 1:
            # single-channel gather has one-element contiguous runs, so build
            # the transposed column matrix from whole-row block copies instead
            colT = np.empty((self.k * self.k, B, H, W), dtype=x.dtype)
            for u in range(self.k):
                for v in range(self.k):
                    colT[u * self.k + v] = xp[:, u:u + H, v:v + W, 0]
            col = colT.reshape(self.k * self.k, B * H * W).T
        else:
            sB, sH, sW, sC = xp.strides
            view = np.lib.stride_tricks.as_strided(
                xp, shape=(B, H, W, self.k, self.k, C),
                strides=(sB, sH, sW, sH, sW, sC), writeable=False)
            col = view.reshape(B * H * W, self.k * self.k * C)
        self._col, self._xshape = col, x.shape
        wmat = p[f"{self.name}.W"].reshape(-1, self.c_out)
        y = col @ wmat
        y += p[f"{self.name}.b"]
        return y.reshape(B, H, W, self.c_out)

    def backward(self, dy):
        B, H, W, C = self._xshape
        p, g = self.store.params, self.store.grads
        dym = dy.reshape(-1, self.c_out)
        g[f"{self.name}.W"] += (self._col.T @ dym).reshape(p[f"{self.name}.W"].shape)
        g[f"{self.name}.b"] += np.ones(len(dym), dtype=dy.dtype) @ dym
        Wk = p[f"{self.name}.W"]
        if C == 1:
            # dx via one small GEMM per kernel offset, accumulated into the
            # padded gradient (single-channel gathers are slow)
            dxp = np.zeros((B, H + 2 * self.pad, W + 2 * self.pad, C), dtype=dy.dtype)
            for u in range(self.k):
                for v in range(self.k):
                    dxp[:, u:u + H, v:v + W, :] += (dym @ Wk[u, v].T).reshape(B, H, W, C)
            return dxp[:, self.pad:self.pad + H, self.pad:self.pad + W, :]
        # dx = correlation of dy with the spatially flipped kernel, as im2col
        # over dy followed by one GEMM
        dyp = np.pad(dy, ((0, 0), (self.pad, self.pad), (self.pad, self.pad), (0, 0)))
        sB, sH, sW, sC = dyp.strides
        view = np.lib.stride_tricks.as_strided(
            dyp, shape=(B, H, W, self.k, self.k, self.c_out),
            strides=(sB, sH, sW, sH, sW, sC), writeable=False)
        wflip = Wk[::-1, ::-1].transpose(0, 1, 3, 2).reshape(-1, C)
        dcol = view.reshape(B * H * W, self.k * self.k * self.c_out)
        return (dcol @ np.ascontiguousarray(wflip)).reshape(B, H, W, C)


class BatchNorm2D:
    """Per-channel batch norm over (batch, H, W), channels-last.

    Training mode normalizes with batch statistics and updates running
    statistics; inference mode uses the stored running statistics.
    """

    def __init__(self, name, channels, store):
        self.name, self.c, self.store = name, channels, store
        store.add(f"{name}.gamma", (channels,))
        store.add(f"{name}.beta", (channels,))
        store.add(f"{name}.running_mean", (channels,), trainable=False)
        store.add(f"{name}.running_var", (channels,), trainable=False)

    def init(self, rng):
        p = self.store.params
        p[f"{self.name}.gamma"][:] = 1.0
        p[f"{self.name}.beta"][:] = 0.0
        p[f"{self.name}.running_mean"][:] = 0.0
        p[f"{self.name}.running_var"][:] = 1.0

    def forward(self, x, training=False):
        p = self.store.params
        self._training = training
        flat = x.reshape(-1, x.shape[-1])
        if training:
            ones = np.ones(len(flat), dtype=x.dtype)
            mean = (ones @ flat) / len(flat)          # GEMV column sums
            var = (ones @ (flat * flat)) / len(flat) - mean * mean
            np.maximum(var, 0.0, out=var)
            rm, rv = p[f"{self.name}.running_mean"], p[f"{self.name}.running_var"]
            rm *= 1 - BN_MOMENTUM
            rm += BN_MOMENTUM * mean
            rv *= 1 - BN_MOMENTUM
            rv += BN_MOMENTUM * var
        else:
            mean = p[f"{self.name}.running_mean"]
            var = p[f"{self.name}.running_var"]
        ivar = (1.0 / np.sqrt(var + BN_EPS)).astype(x.dtype)
        self._x, self._mean, self._ivar = x, mean.astype(x.dtype), ivar
        self._n = len(flat)
        # fused affine: y = x * a + b with a = gamma/std, b = beta - mean*a
        a = p[f"{self.name}.gamma"].astype(x.dtype) * ivar
        b = p[f"{self.name}.beta"].astype(x.dtype) - self._mean * a
        y = x * a
        y += b
        return y

    def backward(self, dy):
        p, g = self.store.params, self.store.grads
        C = dy.shape[-1]
        dym = dy.reshape(-1, C)
        xm = self._x.reshape(-1, C)
        ones = np.ones(len(dym), dtype=dy.dtype)
        s1 = ones @ dym                       # sum(dy)
        s2 = self._ivar * (ones @ (dym * xm) - self._mean * s1)  # sum(dy*xhat)
        g[f"{self.name}.gamma"] += s2
        g[f"{self.name}.beta"] += s1
        gamma = p[f"{self.name}.gamma"].astype(dy.dtype)
        if not self._training:
            return dy * (gamma * self._ivar)
        n = self._n
        scale = gamma * self._ivar / n
        c = scale * s2 * self._ivar
        # dx = n*scale*dy - scale*s1 - c*(x - mean), expanded so each term is
        # a single elementwise pass
        dx = dy * (n * scale)
        dx -= self._x * c
        dx += c * self._mean - scale * s1
        return dx


class MaxPool2x2:
    """2x2 max pooling (stride 2), channels-last. Ties route the gradient to
    the first maximal position."""

    def init(self, rng):
        pass

    def forward(self, x, training=False):
        B, H, W, C = x.shape
        if H % 2 or W % 2:
            raise ShapeMismatch(f"2x2 pooling needs even dims, got {H}x{W}")
        a = x[:, 0::2, 0::2, :]
        b = x[:, 0::2, 1::2, :]
        c = x[:, 1::2, 0::2, :]
        d = x[:, 1::2, 1::2, :]
        self._k1 = a >= b
        m1 = np.maximum(a, b)
        self._k2 = c >= d
        m2 = np.maximum(c, d)
        self._k3 = m1 >= m2
        self._inshape = x.shape
        return np.maximum(m1, m2)

    def backward(self, dy):
        B, H, W, C = self._inshape
        dx = np.zeros((B, H, W, C), dtype=dy.dtype)
        dm1 = dy * self._k3
        dm2 = dy - dm1
        da = dm1 * self._k1
        dc = dm2 * self._k2
        dx[:, 0::2, 0::2, :] = da
        dx[:, 0::2, 1::2, :] = dm1 - da
        dx[:, 1::2, 0::2, :] = dc
        dx[:, 1::2, 1::2, :] = dm2 - dc
        return dx


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class LSTM:
    """Single-layer LSTM returning the last hidden state.

    Gate order in the fused weight matrices is (input, forget, cell, output).
    The forget-gate bias initializes to 1.
    """

    def __init__(self, name, n_in, n_hidden, store):
        self.name, self.n_in, self.h = name, n_in, n_hidden
        self.store = store
        store.add(f"{name}.Wx", (n_in, 4 * n_hidden))
        store.add(f"{name}.Wh", (n_hidden, 4 * n_hidden))
        store.add(f"{name}.b", (4 * n_hidden,))

    def init(self, rng):
        p = self.store.params
        p[f"{self.name}.Wx"][:] = rng.uniform(-1, 1, (self.n_in, 4 * self.h)) / np.sqrt(self.n_in)
        p[f"{self.name}.Wh"][:] = rng.uniform(-1, 1, (self.h, 4 * self.h)) / np.sqrt(self.h)
        b = p[f"{self.name}.b"]
        b[:] = 0.0
        b[self.h:2 * self.h] = 1.0

    def forward(self, x, training=False):
        B, T, D = x.shape
        if D != self.n_in:
            raise ShapeMismatch(f"{self.name}: expected {self.n_in} inputs, got {D}")
        p = self.store.params
        Wx, Wh, b = p[f"{self.name}.Wx"], p[f"{self.name}.Wh"], p[f"{self.name}.b"]
        h = np.zeros((B, self.h), dtype=x.dtype)
        c = np.zeros((B, self.h), dtype=x.dtype)
        self._x = x
        self._cache = []
        H = self.h
        for t in range(T):
            z = x[:, t] @ Wx + h @ Wh + b
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            g = np.tanh(z[:, 2 * H:3 * H])
            o = _sigmoid(z[:, 3 * H:])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            h = o * np.tanh(c)
            self._cache.append((i, f, g, o, c_prev, h_prev, c))
        return h

    def backward(self, dh):
        p, gr = self.store.params, self.store.grads
        Wx, Wh = p[f"{self.name}.Wx"], p[f"{self.name}.Wh"]
        x = self._x
        B, T, D = x.shape
        dWx = np.zeros_like(Wx)
        dWh = np.zeros_like(Wh)
        db = np.zeros(4 * self.h, dtype=x.dtype)
        dx = np.zeros_like(x)
        dc = np.zeros((B, self.h), dtype=x.dtype)
        for t in reversed(range(T)):
            i, f, g, o, c_prev, h_prev, c = self._cache[t]
            tc = np.tanh(c)
            do = dh * tc
            dc = dc + dh * o * (1 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            dz = np.concatenate([
                di * i * (1 - i),
                df * f * (1 - f),
                dg * (1 - g * g),
                do * o * (1 - o),
            ], axis=1)
            dWx += x[:, t].T @ dz
            dWh += h_prev.T @ dz
            db += dz.sum(axis=0)
            dx[:, t] = dz @ Wx.T
            dh = dz @ Wh.T
            dc = dc * f
        gr[f"{self.name}.Wx"] += dWx
        gr[f"{self.name}.Wh"] += dWh
        gr[f"{self.name}.b"] += db
        return dx


@dataclass
class ModelConfig:
    architecture: str = "hybrid"           # "hybrid" | "mlp"
    input_shape: tuple = (40, 64)          # (time, channels)
    conv_channels: tuple = (8, 16)
    kernel: int = 3
    lstm_hidden: int = 32
    dense_widths: tuple = (32,)
    mlp_widths: tuple = (64, 32)
    seed: int = 0

    def __post_init__(self):
        T, F = self.input_shape
        if self.architecture == "hybrid":
            div = 2 ** len(self.conv_channels)
            if T % div or F % div:
                raise ValueError(
                    f"hybrid input {T}x{F} must be divisible by {div} for pooling")
        elif self.architecture != "mlp":
            raise ValueError(f"unknown architecture {self.architecture!r}")

    def as_dict(self):
        return {
            "architecture": self.architecture,
            "input_shape": list(self.input_shape),
            "conv_channels": list(self.conv_channels),
            "kernel": self.kernel,
            "lstm_hidden": self.lstm_hidden,
            "dense_widths": list(self.dense_widths),
            "mlp_widths": list(self.mlp_widths),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(architecture=d["architecture"],
                   input_shape=tuple(d["input_shape"]),
                   conv_channels=tuple(d["conv_channels"]),
                   kernel=d["kernel"], lstm_hidden=d["lstm_hidden"],
                   dense_widths=tuple(d["dense_widths"]),
                   mlp_widths=tuple(d["mlp_widths"]), seed=d["seed"])


class Network:
    """A scalar regressor over (batch, time, channels) windows."""

    def __init__(self, config, dtype=np.float64):
        self.config = config
        self.store = ParamStore(dtype=dtype)
        self.layers = []
        T, F = config.input_shape
        if config.architecture == "hybrid":
            c_prev = 1
            h, w = T, F
            for bi, c in enumerate(config.conv_channels, start=1):
                self.layers += [
                    Conv2D(f"conv{bi}", c_prev, c, self.store, kernel=config.kernel),
                    ReLU(),
                    BatchNorm2D(f"bn{bi}", c, self.store),
                    MaxPool2x2(),
                ]
                c_prev = c
                h, w = h // 2, w // 2
            self._seq_shape = (h, c_prev * w)  # (timesteps, features per step)
            self.lstm = LSTM("lstm", c_prev * w, config.lstm_hidden, self.store)
            dims = [config.lstm_hidden, *config.dense_widths, 1]
            self.head = []
            for di in range(len(dims) - 1):
                self.head.append(Dense(f"fc{di + 1}", dims[di], dims[di + 1], self.store))
                if di < len(dims) - 2:
                    self.head.append(ReLU())
        else:
            dims = [T * F, *config.mlp_widths, 1]
            self.head = []
            for di in range(len(dims) - 1):
                self.head.append(Dense(f"fc{di + 1}", dims[di], dims[di + 1], self.store))
                if di < len(dims) - 2:
                    self.head.append(ReLU())
        self.store.allocate()
        self.init_params()

    def init_params(self, seed=None):
        rng = np.random.default_rng(self.config.seed if seed is None else seed)
        for layer in self.layers:
            layer.init(rng)
        if self.config.architecture == "hybrid":
            self.lstm.init(rng)
        for layer in self.head:
            layer.init(rng)

    @property
    def theta(self):
        return self.store.theta

    @property
    def n_params(self):
        return len(self.store.theta)

    def zero_grad(self):
        self.store.zero_grad()

    def forward(self, x, training=False):
        x = np.asarray(x, dtype=self.store.dtype)
        if x.ndim != 3 or x.shape[1:] != tuple(self.config.input_shape):
            raise ShapeMismatch(
                f"expected (batch, {self.config.input_shape[0]}, "
                f"{self.config.input_shape[1]}), got {x.shape}")
        B = x.shape[0]
        if self.config.architecture == "hybrid":
            z = x[:, :, :, None]  # channels-last (B, T, F, 1)
            for layer in self.layers:
                z = layer.forward(z, training)
            h, d = self._seq_shape
            # conv output (B, T', W', C) -> time-major sequence (B, T', W'*C)
            self._conv_out_shape = z.shape
            z = z.reshape(B, h, d)
            z = self.lstm.forward(z, training)
        else:
            z = x.reshape(B, -1)
        for layer in self.head:
            z = layer.forward(z, training)
        return z[:, 0]

    def backward(self, dpred):
        dz = np.asarray(dpred, dtype=self.store.dtype)[:, None]
        for layer in reversed(self.head):
            dz = layer.backward(dz)
        B = dz.shape[0]
        if self.config.architecture == "hybrid":
            dz = self.lstm.backward(dz)
            dz = dz.reshape(self._conv_out_shape)
            for layer in reversed(self.layers):
                dz = layer.backward(dz)
            return dz[:, :, :, 0]
        return dz.reshape(B, *self.config.input_shape)
