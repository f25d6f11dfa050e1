"""Parameter registry and the plain (non-equivariant) layers."""
from __future__ import annotations

import math
from typing import Dict, Iterator, List, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import Tensor


class Module:
    """Holds named parameters, buffers and child modules in insertion order."""

    def __init__(self):
        self._params: Dict[str, Tensor] = {}
        self._buffers: Dict[str, np.ndarray] = {}
        self._children: Dict[str, "Module"] = {}
        self.training = True

    def add_param(self, name: str, value) -> Tensor:
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = t
        return t

    def add_buffer(self, name: str, value) -> np.ndarray:
        self._buffers[name] = np.array(value, dtype=np.float64)
        return self._buffers[name]

    def add_child(self, name: str, module: "Module") -> "Module":
        self._children[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        out = [(prefix + k, v) for k, v in self._params.items()]
        for cname, child in self._children.items():
            out.extend(child.named_parameters(f"{prefix}{cname}."))
        return out

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def named_buffers(self, prefix: str = "") -> List[Tuple[str, np.ndarray]]:
        out = [(prefix + k, v) for k, v in self._buffers.items()]
        for cname, child in self._children.items():
            out.extend(child.named_buffers(f"{prefix}{cname}."))
        return out

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: p.data for name, p in self.named_parameters()}
        state.update(dict(self.named_buffers()))
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        bufs = self._buffer_owners()
        missing = (set(own) | set(bufs)) - set(state)
        if missing:
            raise KeyError(f"missing entries: {sorted(missing)}")
        for name, arr in state.items():
            if name in own:
                if own[name].shape != arr.shape:
                    raise ValueError(f"{name}: shape {arr.shape} != {own[name].shape}")
                own[name].data[...] = arr
            elif name in bufs:
                owner, key = bufs[name]
                owner._buffers[key][...] = arr
            else:
                raise KeyError(f"unexpected entry {name}")

    def _buffer_owners(self, prefix: str = ""):
        out = {prefix + k: (self, k) for k in self._buffers}
        for cname, child in self._children.items():
            out.update(child._buffer_owners(f"{prefix}{cname}."))
        return out

    def modules(self) -> Iterator["Module"]:
        yield self
        for child in self._children.values():
            yield from child.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


def he_normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) * math.sqrt(2.0 / fan_in)


class Linear(Module):
    def __init__(self, rng, n_in: int, n_out: int):
        super().__init__()
        self.weight = self.add_param("weight", he_normal(rng, (n_in, n_out), n_in))
        self.bias = self.add_param("bias", np.zeros(n_out))

    def forward(self, x):
        return ops.matmul(x, self.weight) + self.bias


class Conv2d(Module):
    def __init__(self, rng, c_in: int, c_out: int, k: int = 3, padding: int = None):
        super().__init__()
        self.padding = k // 2 if padding is None else padding
        self.weight = self.add_param("weight", he_normal(rng, (c_out, c_in, k, k), c_in * k * k))
        self.bias = self.add_param("bias", np.zeros(c_out))

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.padding, bias=self.bias)
