"""Serialize the export IR to an ONNX (opset 12) file.

Writes the protobuf wire format directly against the public onnx.proto3
schema, so the exporter has no dependency beyond numpy. Weights become
initializers; anchors, strides and reshape targets become Constant nodes,
keeping the initializer element count equal to the parameter count.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .ir import Graph, Node

_OPSET = 12


def _varint(value: int) -> bytes:
    if value < 0:
        value += 1 << 64
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _tag(field_no: int, wire: int) -> bytes:
    return _varint((field_no << 3) | wire)


def _f_varint(field_no: int, value: int) -> bytes:
    return _tag(field_no, 0) + _varint(value)


def _f_bytes(field_no: int, value: bytes) -> bytes:
    return _tag(field_no, 2) + _varint(len(value)) + value


def _f_str(field_no: int, value: str) -> bytes:
    return _f_bytes(field_no, value.encode("utf-8"))


def _tensor(name: str, array: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(array)
    if arr.dtype == np.float32:
        code = 1
    elif arr.dtype == np.int64:
        code = 7
    else:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    out = b"".join(_f_varint(1, int(d)) for d in arr.shape)
    out += _f_varint(2, code)
    out += _f_str(8, name)
    out += _f_bytes(9, arr.astype(arr.dtype.newbyteorder("<")).tobytes())
    return out


def _attr(name: str, value) -> bytes:
    body = _f_str(1, name)
    if isinstance(value, int):
        body += _f_varint(3, value) + _f_varint(20, 2)
    elif isinstance(value, float):
        body += _tag(2, 5) + struct.pack("<f", value) + _f_varint(20, 1)
    elif isinstance(value, str):
        body += _f_bytes(4, value.encode("utf-8")) + _f_varint(20, 3)
    elif isinstance(value, np.ndarray):
        body += _f_bytes(5, _tensor(name + "_v", value)) + _f_varint(20, 4)
    elif isinstance(value, (list, tuple)):
        body += _f_bytes(8, b"".join(_varint(int(v)) for v in value)) + _f_varint(20, 7)
    else:
        raise ValueError(f"unsupported attribute {value!r}")
    return body


def _node(op_type: str, inputs: Sequence[str], outputs: Sequence[str], **attrs) -> bytes:
    body = b"".join(_f_str(1, s) for s in inputs)
    body += b"".join(_f_str(2, s) for s in outputs)
    body += _f_str(4, op_type)
    for attr_name, value in attrs.items():
        body += _f_bytes(5, _attr(attr_name, value))
    return body


def _value_info(name: str, shape: Sequence[int]) -> bytes:
    dims = b"".join(_f_bytes(1, _f_varint(1, int(d))) for d in shape)
    tensor_type = _f_varint(1, 1) + _f_bytes(2, dims)  # elem_type FLOAT
    return _f_str(1, name) + _f_bytes(2, _f_bytes(1, tensor_type))


def _emit_node(node: Node, extra_nodes: list) -> bytes:
    a = node.attrs
    if node.op == "conv":
        k = a["kernel"]
        p = a["pad"]
        return _node(
            "Conv", node.inputs, node.outputs,
            kernel_shape=[k, k], strides=[a["stride"], a["stride"]],
            pads=[p, p, p, p], dilations=[1, 1], group=a["groups"],
        )
    if node.op == "conv_transpose2x":
        return _node(
            "ConvTranspose", node.inputs, node.outputs,
            kernel_shape=[2, 2], strides=[2, 2], pads=[0, 0, 0, 0], group=1,
        )
    if node.op == "sigmoid":
        return _node("Sigmoid", node.inputs, node.outputs)
    if node.op in ("add", "sub", "mul", "div"):
        return _node(node.op.capitalize(), node.inputs, node.outputs)
    if node.op == "maxpool":
        k = a["kernel"]
        p = a["pad"]
        return _node(
            "MaxPool", node.inputs, node.outputs,
            kernel_shape=[k, k], strides=[a["stride"], a["stride"]], pads=[p, p, p, p],
        )
    if node.op == "upsample2x":
        # Resize-12 wants roi and scales inputs; emit them as Constants.
        roi = node.outputs[0] + "_roi"
        scales = node.outputs[0] + "_scales"
        extra_nodes.append(
            _node("Constant", [], [roi], value=np.zeros(0, dtype=np.float32))
        )
        extra_nodes.append(
            _node(
                "Constant", [], [scales],
                value=np.array([1.0, 1.0, 2.0, 2.0], dtype=np.float32),
            )
        )
        return _node(
            "Resize", [node.inputs[0], roi, scales], node.outputs,
            mode="nearest",
            coordinate_transformation_mode="asymmetric",
            nearest_mode="floor",
        )
    if node.op == "concat":
        return _node("Concat", node.inputs, node.outputs, axis=a["axis"])
    if node.op == "split":
        return _node("Split", node.inputs, node.outputs, axis=a["axis"], split=a["sizes"])
    if node.op == "reshape":
        return _node("Reshape", node.inputs, node.outputs)
    if node.op == "transpose":
        return _node("Transpose", node.inputs, node.outputs, perm=a["perm"])
    if node.op == "softmax_last":
        return _node("Softmax", node.inputs, node.outputs, axis=-1)
    if node.op == "matmul":
        return _node("MatMul", node.inputs, node.outputs)
    raise ValueError(f"unknown IR op {node.op!r}")


def write_onnx(graph: Graph, path: Union[str, Path], producer: str = "yolo11-export") -> None:
    node_blobs = []
    for name, value in graph.constants.items():
        node_blobs.append(_node("Constant", [], [name], value=value))
    for node in graph.nodes:
        extra: list = []
        blob = _emit_node(node, extra)
        node_blobs.extend(extra)
        node_blobs.append(blob)

    graph_body = b"".join(_f_bytes(1, n) for n in node_blobs)
    graph_body += _f_str(2, "yolo11")
    for name, value in graph.weights.items():
        graph_body += _f_bytes(5, _tensor(name, value))
    graph_body += _f_bytes(11, _value_info(graph.input_name, graph.input_shape))
    for name, shape in graph.outputs:
        graph_body += _f_bytes(12, _value_info(name, shape))

    opset = _f_str(1, "") + _f_varint(2, _OPSET)
    model = (
        _f_varint(1, 7)  # ir_version
        + _f_str(2, producer)
        + _f_bytes(7, graph_body)
        + _f_bytes(8, opset)
    )
    Path(path).write_bytes(model)
