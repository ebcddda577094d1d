"""Tiny inference-graph IR shared by the torch interpreter and the ONNX
emitter, so the exported file and the recorded fixtures come from one
definition of the network.

Weights live in ``Graph.weights`` (they become ONNX initializers);
non-weight constants (anchors, strides, reshape targets) live in
``Graph.constants`` and are emitted as Constant nodes, keeping the
initializer element count equal to the model's parameter count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np


@dataclass
class Node:
    op: str
    inputs: Tuple[str, ...]
    outputs: Tuple[str, ...]
    attrs: Dict = field(default_factory=dict)


class Graph:
    def __init__(self, input_name: str, input_shape: Tuple[int, int, int, int], seed: int = 0):
        self.input_name = input_name
        self.input_shape = input_shape
        self.nodes: List[Node] = []
        self.weights: Dict[str, np.ndarray] = {}
        self.constants: Dict[str, np.ndarray] = {}
        self.outputs: List[Tuple[str, Tuple[int, ...]]] = []
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self._counter = 0

    # -- naming ------------------------------------------------------------

    def fresh(self, stem: str) -> str:
        self._counter += 1
        return f"{stem}_{self._counter}"

    def parameter_count(self) -> int:
        return int(sum(w.size for w in self.weights.values()))

    # -- primitive emitters --------------------------------------------------

    def _add(self, op: str, inputs: Sequence[str], outputs: Sequence[str], **attrs) -> None:
        self.nodes.append(Node(op, tuple(inputs), tuple(outputs), attrs))

    def constant(self, stem: str, value: np.ndarray) -> str:
        name = self.fresh(stem)
        self.constants[name] = np.ascontiguousarray(value)
        return name

    def conv(
        self,
        x: str,
        stem: str,
        c_in: int,
        c_out: int,
        k: int,
        stride: int = 1,
        groups: int = 1,
        act: Optional[str] = "silu",
        pad: Optional[int] = None,
    ) -> str:
        """Conv2d with bias (inference form: any BN is pre-folded), plus the
        standard SiLU activation unless disabled."""
        w_name = self.fresh(f"{stem}_w")
        b_name = self.fresh(f"{stem}_b")
        fan_in = c_in // groups * k * k
        scale = float(np.sqrt(2.0 / fan_in))
        self.weights[w_name] = (
            self.rng.standard_normal((c_out, c_in // groups, k, k)).astype(np.float32) * scale
        )
        self.weights[b_name] = np.zeros(c_out, dtype=np.float32)
        out = self.fresh(stem)
        if pad is None:
            pad = k // 2
        self._add(
            "conv", [x, w_name, b_name], [out],
            stride=stride, pad=pad, groups=groups, kernel=k,
        )
        if act == "silu":
            sig = self.fresh(f"{stem}_sig")
            self._add("sigmoid", [out], [sig])
            act_out = self.fresh(f"{stem}_silu")
            self._add("mul", [out, sig], [act_out])
            return act_out
        if act is None:
            return out
        raise ValueError(f"unknown activation {act!r}")

    def sigmoid(self, x: str, stem: str = "sigmoid") -> str:
        out = self.fresh(stem)
        self._add("sigmoid", [x], [out])
        return out

    def binop(self, op: str, a: str, b: str, stem: str) -> str:
        out = self.fresh(stem)
        self._add(op, [a, b], [out])
        return out

    def add(self, a: str, b: str, stem: str = "add") -> str:
        return self.binop("add", a, b, stem)

    def mul(self, a: str, b: str, stem: str = "mul") -> str:
        return self.binop("mul", a, b, stem)

    def sub(self, a: str, b: str, stem: str = "sub") -> str:
        return self.binop("sub", a, b, stem)

    def div(self, a: str, b: str, stem: str = "div") -> str:
        return self.binop("div", a, b, stem)

    def maxpool(self, x: str, k: int, stride: int, pad: int, stem: str = "pool") -> str:
        out = self.fresh(stem)
        self._add("maxpool", [x], [out], kernel=k, stride=stride, pad=pad)
        return out

    def upsample2x(self, x: str, stem: str = "up") -> str:
        out = self.fresh(stem)
        self._add("upsample2x", [x], [out])
        return out

    def conv_transpose2x(self, x: str, stem: str, c_in: int, c_out: int) -> str:
        """2x2 stride-2 transposed conv (the prototype upsampler)."""
        w_name = self.fresh(f"{stem}_w")
        b_name = self.fresh(f"{stem}_b")
        scale = float(np.sqrt(2.0 / (c_in * 4)))
        self.weights[w_name] = (
            self.rng.standard_normal((c_in, c_out, 2, 2)).astype(np.float32) * scale
        )
        self.weights[b_name] = np.zeros(c_out, dtype=np.float32)
        out = self.fresh(stem)
        self._add("conv_transpose2x", [x, w_name, b_name], [out])
        return out

    def concat(self, xs: Sequence[str], axis: int, stem: str = "cat") -> str:
        out = self.fresh(stem)
        self._add("concat", list(xs), [out], axis=axis)
        return out

    def split(self, x: str, axis: int, sizes: Sequence[int], stem: str = "split") -> List[str]:
        outs = [self.fresh(f"{stem}_{i}") for i in range(len(sizes))]
        self._add("split", [x], outs, axis=axis, sizes=list(sizes))
        return outs

    def reshape(self, x: str, shape: Sequence[int], stem: str = "reshape") -> str:
        shape_name = self.constant(f"{stem}_shape", np.asarray(shape, dtype=np.int64))
        out = self.fresh(stem)
        self._add("reshape", [x, shape_name], [out])
        return out

    def transpose(self, x: str, perm: Sequence[int], stem: str = "perm") -> str:
        out = self.fresh(stem)
        self._add("transpose", [x], [out], perm=list(perm))
        return out

    def softmax_last(self, x: str, stem: str = "softmax") -> str:
        out = self.fresh(stem)
        self._add("softmax_last", [x], [out])
        return out

    def matmul(self, a: str, b: str, stem: str = "matmul") -> str:
        out = self.fresh(stem)
        self._add("matmul", [a, b], [out])
        return out

    def mul_const(self, x: str, value: np.ndarray, stem: str) -> str:
        c = self.constant(f"{stem}_c", value.astype(np.float32))
        return self.mul(x, c, stem)

    def mark_output(self, name: str, shape: Tuple[int, ...]) -> None:
        self.outputs.append((name, shape))
