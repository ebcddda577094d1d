"""Torch interpreter for the export IR: runs the exact graph that gets
serialized to ONNX, so recorded fixtures replay what the file computes."""

from __future__ import annotations

from typing import Dict, Mapping, Optional

import numpy as np
import torch
import torch.nn.functional as F

from .ir import Graph


class TorchModel:
    def __init__(self, graph: Graph, weights: Optional[Mapping[str, np.ndarray]] = None):
        self.graph = graph
        source = dict(graph.weights)
        if weights is not None:
            unknown = set(weights) - set(source)
            if unknown:
                raise KeyError(f"unknown weight names: {sorted(unknown)[:5]}")
            for name, value in weights.items():
                if tuple(value.shape) != tuple(source[name].shape):
                    raise ValueError(
                        f"weight {name}: shape {value.shape} != {source[name].shape}"
                    )
                source[name] = np.asarray(value, dtype=np.float32)
        self._tensors: Dict[str, torch.Tensor] = {
            name: torch.from_numpy(np.ascontiguousarray(value))
            for name, value in source.items()
        }
        for name, value in graph.constants.items():
            self._tensors[name] = torch.from_numpy(np.ascontiguousarray(value))

    @torch.no_grad()
    def forward(self, x: np.ndarray) -> list:
        if tuple(x.shape) != self.graph.input_shape:
            raise ValueError(f"input shape {x.shape} != {self.graph.input_shape}")
        env: Dict[str, torch.Tensor] = dict(self._tensors)
        env[self.graph.input_name] = torch.from_numpy(np.ascontiguousarray(x, dtype=np.float32))
        for node in self.graph.nodes:
            args = [env[name] for name in node.inputs]
            a = node.attrs
            if node.op == "conv":
                out = F.conv2d(
                    args[0], args[1], args[2],
                    stride=a["stride"], padding=a["pad"], groups=a["groups"],
                )
            elif node.op == "conv_transpose2x":
                out = F.conv_transpose2d(args[0], args[1], args[2], stride=2)
            elif node.op == "sigmoid":
                out = torch.sigmoid(args[0])
            elif node.op == "add":
                out = args[0] + args[1]
            elif node.op == "sub":
                out = args[0] - args[1]
            elif node.op == "mul":
                out = args[0] * args[1]
            elif node.op == "div":
                out = args[0] / args[1]
            elif node.op == "maxpool":
                out = F.max_pool2d(args[0], a["kernel"], a["stride"], a["pad"])
            elif node.op == "upsample2x":
                out = F.interpolate(args[0], scale_factor=2.0, mode="nearest")
            elif node.op == "concat":
                out = torch.cat(args, dim=a["axis"])
            elif node.op == "split":
                parts = torch.split(args[0], a["sizes"], dim=a["axis"])
                for name, part in zip(node.outputs, parts):
                    env[name] = part
                continue
            elif node.op == "reshape":
                shape = [int(v) for v in args[1].tolist()]
                out = args[0].reshape(shape)
            elif node.op == "transpose":
                out = args[0].permute(a["perm"])
            elif node.op == "softmax_last":
                out = torch.softmax(args[0], dim=-1)
            elif node.op == "matmul":
                out = args[0] @ args[1]
            else:
                raise ValueError(f"unknown IR op {node.op!r}")
            env[node.outputs[0]] = out
        return [env[name].numpy().astype(np.float32) for name, _ in self.graph.outputs]
