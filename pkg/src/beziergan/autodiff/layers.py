"""Parameterised layers built on the tensor primitives."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor


class Module:
    training = True

    def children(self):
        return [v for v in vars(self).values() if isinstance(v, Module)] + [
            m for v in vars(self).values() if isinstance(v, (list, tuple)) for m in v if isinstance(m, Module)
        ]

    def named_parameters(self, prefix=""):
        out = []
        for key, val in vars(self).items():
            if isinstance(val, Tensor) and val.requires_grad:
                out.append((prefix + key, val))
            elif isinstance(val, Module):
                out.extend(val.named_parameters(prefix + key + "."))
            elif isinstance(val, (list, tuple)):
                for i, m in enumerate(val):
                    if isinstance(m, Module):
                        out.extend(m.named_parameters(f"{prefix}{key}.{i}."))
        return out

    def named_buffers(self, prefix=""):
        out = []
        for key, val in vars(self).items():
            if isinstance(val, np.ndarray):
                out.append((prefix + key, val))
            elif isinstance(val, Module):
                out.extend(val.named_buffers(prefix + key + "."))
            elif isinstance(val, (list, tuple)):
                for i, m in enumerate(val):
                    if isinstance(m, Module):
                        out.extend(m.named_buffers(f"{prefix}{key}.{i}."))
        return out

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def state_dict(self):
        state = {k: p.data for k, p in self.named_parameters()}
        state.update(dict(self.named_buffers()))
        return state

    def load_state_dict(self, state):
        for k, p in self.named_parameters():
            p.data = np.array(state[k], dtype=p.data.dtype).reshape(p.shape)
        for k, buf in self.named_buffers():
            buf[...] = np.asarray(state[k]).reshape(buf.shape)

    def train(self, mode=True):
        self.training = mode
        for child in self.children():
            child.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def astype(self, dtype):
        """Cast parameters and buffers in place (used for 64-bit gradient checks)."""
        for _, p in self.named_parameters():
            p.data = p.data.astype(dtype)
            p.zero_grad()
        for mod in [self] + self._all_modules():
            for key, val in list(vars(mod).items()):
                if isinstance(val, np.ndarray):
                    setattr(mod, key, val.astype(dtype))
        return self

    def _all_modules(self):
        out = []
        for child in self.children():
            out.append(child)
            out.extend(child._all_modules())
        return out

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _param(data, name):
    return Tensor(data.astype(T.default_dtype()), requires_grad=True, name=name)


class Dense(Module):
    def __init__(self, fan_in, fan_out, rng):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        self.weight = _param(rng.uniform(-bound, bound, size=(fan_in, fan_out)), "weight")
        self.bias = _param(np.zeros(fan_out), "bias")

    def forward(self, x):
        if x.shape[-1] != self.weight.shape[0]:
            raise T.ShapeError(f"dense: input {x.shape} does not match weight {self.weight.shape}")
        return x @ self.weight + self.bias


class BatchNorm(Module):
    def __init__(self, features, momentum=0.1, eps=1e-5):
        self.gamma = _param(np.ones(features), "gamma")
        self.beta = _param(np.zeros(features), "beta")
        self.running_mean = np.zeros(features, dtype=T.default_dtype())
        self.running_var = np.ones(features, dtype=T.default_dtype())
        self.momentum = momentum
        self.eps = eps

    def forward(self, x):
        return T.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                            self.training, self.momentum, self.eps)


class Conv1d(Module):
    def __init__(self, cin, cout, kernel, stride=1, padding=0, rng=None):
        bound = np.sqrt(6.0 / ((cin + cout) * kernel))
        self.weight = _param(rng.uniform(-bound, bound, size=(cout, cin, kernel)), "weight")
        self.bias = _param(np.zeros(cout), "bias")
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        return T.conv1d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose1d(Module):
    def __init__(self, cin, cout, kernel, stride=1, padding=0, rng=None):
        bound = np.sqrt(6.0 / ((cin + cout) * kernel))
        self.weight = _param(rng.uniform(-bound, bound, size=(cin, cout, kernel)), "weight")
        self.bias = _param(np.zeros(cout), "bias")
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        return T.conv1d_transpose(x, self.weight, self.bias, self.stride, self.padding)
