"""YOLO11 architecture expressed in the export IR.

Follows the public layer recipe: CBS conv stem, C3k2 stages (C2f-style
split/concat with C3k or plain bottleneck inners), SPPF, C2PSA attention,
PAN-style head, and the decoupled detect head with DFL box regression.
Convolutions are built in inference form (bias, BN pre-folded), matching
deployed exports; parameter counts therefore match the fused network.

Scales (depth multiple, width multiple, max channels):
n 0.50/0.25/1024, s 0.50/0.50/1024, m 0.50/1.00/512,
l 1.00/1.00/512, x 1.00/1.50/512.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .ir import Graph

SCALES: Dict[str, Tuple[float, float, int]] = {
    "n": (0.50, 0.25, 1024),
    "s": (0.50, 0.50, 1024),
    "m": (0.50, 1.00, 512),
    "l": (1.00, 1.00, 512),
    "x": (1.00, 1.50, 512),
}

REG_MAX = 16
MASK_COEFFS = 32
PROTO_BASE_CHANNELS = 256
STRIDES = (8, 16, 32)


@dataclass(frozen=True)
class BuildSpec:
    variant: str = "s"
    task: str = "detect"  # or "segment"
    classes: int = 80
    input_size: int = 640
    seed: int = 0

    def __post_init__(self) -> None:
        if self.variant not in SCALES:
            raise ValueError(f"variant must be one of {sorted(SCALES)}, got {self.variant!r}")
        if self.task not in ("detect", "segment"):
            raise ValueError(f"task must be detect or segment, got {self.task!r}")
        if self.classes < 1:
            raise ValueError("classes must be >= 1")
        if self.input_size % 32 != 0:
            raise ValueError("input_size must be a multiple of 32")


def _make_divisible(value: float, divisor: int = 8) -> int:
    return max(divisor, int(value + divisor / 2) // divisor * divisor)


class _Builder:
    def __init__(self, spec: BuildSpec):
        self.spec = spec
        depth, width, max_channels = SCALES[spec.variant]
        self.depth = depth
        self.width = width
        self.max_channels = max_channels
        self.g = Graph("images", (1, 3, spec.input_size, spec.input_size), seed=spec.seed)

    def ch(self, base: int) -> int:
        return _make_divisible(min(base, self.max_channels) * self.width)

    def reps(self, n: int) -> int:
        return max(round(n * self.depth), 1)

    # -- blocks --------------------------------------------------------------

    def bottleneck(self, x: str, c: int, stem: str, shortcut: bool = True, e: float = 0.5) -> str:
        mid = int(c * e)
        y = self.g.conv(x, f"{stem}_cv1", c, mid, 3)
        y = self.g.conv(y, f"{stem}_cv2", mid, c, 3)
        return self.g.add(x, y, f"{stem}_add") if shortcut else y

    def c3k(self, x: str, c: int, stem: str) -> str:
        c_ = c // 2
        a = self.g.conv(x, f"{stem}_cv1", c, c_, 1)
        b = self.g.conv(x, f"{stem}_cv2", c, c_, 1)
        for i in range(2):
            a = self.bottleneck(a, c_, f"{stem}_m{i}", e=1.0)
        merged = self.g.concat([a, b], axis=1, stem=f"{stem}_cat")
        return self.g.conv(merged, f"{stem}_cv3", 2 * c_, c, 1)

    def c3k2(self, x: str, c_in: int, c_out: int, n: int, c3k: bool, stem: str, e: float = 0.5) -> str:
        if self.spec.variant in ("m", "l", "x"):
            c3k = True  # larger scales use the C3k inner everywhere
        c = int(c_out * e)
        y = self.g.conv(x, f"{stem}_cv1", c_in, 2 * c, 1)
        parts = self.g.split(y, axis=1, sizes=[c, c], stem=f"{stem}_split")
        chunks: List[str] = list(parts)
        for i in range(n):
            inner = (
                self.c3k(chunks[-1], c, f"{stem}_c3k{i}")
                if c3k
                else self.bottleneck(chunks[-1], c, f"{stem}_b{i}")
            )
            chunks.append(inner)
        merged = self.g.concat(chunks, axis=1, stem=f"{stem}_cat")
        return self.g.conv(merged, f"{stem}_cv2", (2 + n) * c, c_out, 1)

    def sppf(self, x: str, c: int, stem: str) -> str:
        c_ = c // 2
        y = self.g.conv(x, f"{stem}_cv1", c, c_, 1)
        p1 = self.g.maxpool(y, 5, 1, 2, f"{stem}_p1")
        p2 = self.g.maxpool(p1, 5, 1, 2, f"{stem}_p2")
        p3 = self.g.maxpool(p2, 5, 1, 2, f"{stem}_p3")
        merged = self.g.concat([y, p1, p2, p3], axis=1, stem=f"{stem}_cat")
        return self.g.conv(merged, f"{stem}_cv2", 4 * c_, c, 1)

    def attention(self, x: str, dim: int, spatial: int, stem: str) -> str:
        num_heads = max(dim // 64, 1)
        head_dim = dim // num_heads
        key_dim = head_dim // 2
        n = spatial * spatial
        h = dim + 2 * key_dim * num_heads
        qkv = self.g.conv(x, f"{stem}_qkv", dim, h, 1, act=None)
        qkv = self.g.reshape(qkv, (1, num_heads, 2 * key_dim + head_dim, n), f"{stem}_qkv_r")
        q, k, v = self.g.split(
            qkv, axis=2, sizes=[key_dim, key_dim, head_dim], stem=f"{stem}_qkv_s"
        )
        q_t = self.g.transpose(q, (0, 1, 3, 2), f"{stem}_qT")
        attn = self.g.matmul(q_t, k, f"{stem}_scores")
        attn = self.g.mul_const(
            attn, np.asarray(key_dim ** -0.5, dtype=np.float32), f"{stem}_scale"
        )
        attn = self.g.softmax_last(attn, f"{stem}_softmax")
        attn_t = self.g.transpose(attn, (0, 1, 3, 2), f"{stem}_attnT")
        mixed = self.g.matmul(v, attn_t, f"{stem}_mix")
        mixed = self.g.reshape(mixed, (1, dim, spatial, spatial), f"{stem}_mix_r")
        v_sp = self.g.reshape(v, (1, dim, spatial, spatial), f"{stem}_v_r")
        pe = self.g.conv(v_sp, f"{stem}_pe", dim, dim, 3, groups=dim, act=None)
        combined = self.g.add(mixed, pe, f"{stem}_pe_add")
        return self.g.conv(combined, f"{stem}_proj", dim, dim, 1, act=None)

    def psa_block(self, x: str, c: int, spatial: int, stem: str) -> str:
        attn_out = self.attention(x, c, spatial, f"{stem}_attn")
        x = self.g.add(x, attn_out, f"{stem}_attn_res")
        ffn = self.g.conv(x, f"{stem}_ffn1", c, 2 * c, 1)
        ffn = self.g.conv(ffn, f"{stem}_ffn2", 2 * c, c, 1, act=None)
        return self.g.add(x, ffn, f"{stem}_ffn_res")

    def c2psa(self, x: str, c: int, n: int, spatial: int, stem: str) -> str:
        half = c // 2
        y = self.g.conv(x, f"{stem}_cv1", c, 2 * half, 1)
        a, b = self.g.split(y, axis=1, sizes=[half, half], stem=f"{stem}_split")
        for i in range(n):
            b = self.psa_block(b, half, spatial, f"{stem}_psa{i}")
        merged = self.g.concat([a, b], axis=1, stem=f"{stem}_cat")
        return self.g.conv(merged, f"{stem}_cv2", 2 * half, c, 1)

    # -- heads ---------------------------------------------------------------

    def detect_branches(self, levels: Sequence[str], chans: Sequence[int]) -> Tuple[List[str], List[str]]:
        nc = self.spec.classes
        c2 = max(16, chans[0] // 4, 4 * REG_MAX)
        c3 = max(chans[0], min(nc, 100))
        boxes: List[str] = []
        scores: List[str] = []
        for i, (x, ch) in enumerate(zip(levels, chans)):
            b = self.g.conv(x, f"det_cv2_{i}_0", ch, c2, 3)
            b = self.g.conv(b, f"det_cv2_{i}_1", c2, c2, 3)
            b = self.g.conv(b, f"det_cv2_{i}_2", c2, 4 * REG_MAX, 1, act=None)
            boxes.append(b)
            s = self.g.conv(x, f"det_cv3_{i}_0a", ch, ch, 3, groups=ch)  # depthwise
            s = self.g.conv(s, f"det_cv3_{i}_0b", ch, c3, 1)
            s = self.g.conv(s, f"det_cv3_{i}_1a", c3, c3, 3, groups=c3)
            s = self.g.conv(s, f"det_cv3_{i}_1b", c3, c3, 1)
            s = self.g.conv(s, f"det_cv3_{i}_2", c3, nc, 1, act=None)
            scores.append(s)
        return boxes, scores

    def decode_detect(
        self,
        boxes: Sequence[str],
        scores: Sequence[str],
        extra: Sequence[str] = (),
    ) -> str:
        """Flatten levels, apply DFL + anchor decoding and score sigmoid,
        concatenate into the (1, 4+nc[+extra], N) export head."""
        nc = self.spec.classes
        size = self.spec.input_size
        level_hw = [size // s for s in STRIDES]
        n_total = sum(hw * hw for hw in level_hw)

        flat_parts = []
        per_level_channels = 4 * REG_MAX + nc + (MASK_COEFFS if extra else 0)
        for i, hw in enumerate(level_hw):
            parts = [boxes[i], scores[i]] + ([extra[i]] if extra else [])
            level = self.g.concat(parts, axis=1, stem=f"head_lvl{i}")
            flat_parts.append(
                self.g.reshape(level, (1, per_level_channels, hw * hw), f"head_flat{i}")
            )
        merged = self.g.concat(flat_parts, axis=2, stem="head_all")
        sizes = [4 * REG_MAX, nc] + ([MASK_COEFFS] if extra else [])
        split_parts = self.g.split(merged, axis=1, sizes=sizes, stem="head_split")
        box_logits, cls_logits = split_parts[0], split_parts[1]

        # DFL: softmax over the 16 bins, expectation via matmul with 0..15.
        b = self.g.reshape(box_logits, (1, 4, REG_MAX, n_total), "dfl_r1")
        b = self.g.transpose(b, (0, 1, 3, 2), "dfl_t")
        b = self.g.softmax_last(b, "dfl_softmax")
        bins = self.g.constant(
            "dfl_bins", np.arange(REG_MAX, dtype=np.float32).reshape(REG_MAX, 1)
        )
        b = self.g.matmul(b, bins, "dfl_expect")  # (1, 4, N, 1)
        dist = self.g.reshape(b, (1, 4, n_total), "dfl_r2")

        # Anchor decode in feature units, then scale by per-column stride.
        anchors = []
        strides_col = []
        for stride, hw in zip(STRIDES, level_hw):
            xs, ys = np.meshgrid(np.arange(hw) + 0.5, np.arange(hw) + 0.5)
            anchors.append(np.stack([xs.reshape(-1), ys.reshape(-1)]))
            strides_col.append(np.full(hw * hw, stride, dtype=np.float32))
        anchor_const = self.g.constant(
            "anchors", np.concatenate(anchors, axis=1)[None].astype(np.float32)
        )
        stride_const = self.g.constant(
            "strides", np.concatenate(strides_col)[None, None].astype(np.float32)
        )
        lt, rb = self.g.split(dist, axis=1, sizes=[2, 2], stem="dist_split")
        x1y1 = self.g.sub(anchor_const, lt, "x1y1")
        x2y2 = self.g.add(anchor_const, rb, "x2y2")
        center = self.g.add(x1y1, x2y2, "center_sum")
        center = self.g.mul_const(center, np.asarray(0.5, dtype=np.float32), "center")
        wh = self.g.sub(x2y2, x1y1, "wh")
        box = self.g.concat([center, wh], axis=1, stem="box_feat")
        box = self.g.mul(box, stride_const, "box_px")

        cls = self.g.sigmoid(cls_logits, "cls_sigmoid")
        outs = [box, cls] + ([split_parts[2]] if extra else [])
        head = self.g.concat(outs, axis=1, stem="head_out")
        self.g.mark_output(head, (1, 4 + nc + (MASK_COEFFS if extra else 0), n_total))
        return head

    def proto(self, p3: str, ch_p3: int) -> Tuple[str, int]:
        c_ = self.ch(PROTO_BASE_CHANNELS)
        size = self.spec.input_size
        y = self.g.conv(p3, "proto_cv1", ch_p3, c_, 3)
        y = self.g.conv_transpose2x(y, "proto_up", c_, c_)
        y = self.g.conv(y, "proto_cv2", c_, c_, 3)
        y = self.g.conv(y, "proto_cv3", c_, MASK_COEFFS, 1)
        self.g.mark_output(y, (1, MASK_COEFFS, size // 4, size // 4))
        return y, c_

    def mask_branches(self, levels: Sequence[str], chans: Sequence[int]) -> List[str]:
        c4 = max(chans[0] // 4, MASK_COEFFS)
        outs = []
        for i, (x, ch) in enumerate(zip(levels, chans)):
            m = self.g.conv(x, f"seg_cv4_{i}_0", ch, c4, 3)
            m = self.g.conv(m, f"seg_cv4_{i}_1", c4, c4, 3)
            m = self.g.conv(m, f"seg_cv4_{i}_2", c4, MASK_COEFFS, 1, act=None)
            outs.append(m)
        return outs

    # -- whole network ---------------------------------------------------------

    def build(self) -> Graph:
        g = self.g
        ch64, ch128, ch256, ch512, ch1024 = (self.ch(c) for c in (64, 128, 256, 512, 1024))
        n2 = self.reps(2)
        size = self.spec.input_size

        x = g.conv(g.input_name, "stem0", 3, ch64, 3, stride=2)  # P1/2
        x = g.conv(x, "stem1", ch64, ch128, 3, stride=2)  # P2/4
        x = self.c3k2(x, ch128, ch256, n2, False, "b2", e=0.25)
        x = g.conv(x, "down3", ch256, ch256, 3, stride=2)  # P3/8
        p3_backbone = self.c3k2(x, ch256, ch512, n2, False, "b4", e=0.25)
        x = g.conv(p3_backbone, "down5", ch512, ch512, 3, stride=2)  # P4/16
        p4_backbone = self.c3k2(x, ch512, ch512, n2, True, "b6")
        x = g.conv(p4_backbone, "down7", ch512, ch1024, 3, stride=2)  # P5/32
        x = self.c3k2(x, ch1024, ch1024, n2, True, "b8")
        x = self.sppf(x, ch1024, "sppf")
        p5_backbone = self.c2psa(x, ch1024, n2, size // 32, "c2psa")

        up4 = g.upsample2x(p5_backbone, "up_p4")
        cat4 = g.concat([up4, p4_backbone], axis=1, stem="cat_p4")
        h13 = self.c3k2(cat4, ch1024 + ch512, ch512, n2, False, "h13")
        up3 = g.upsample2x(h13, "up_p3")
        cat3 = g.concat([up3, p3_backbone], axis=1, stem="cat_p3")
        p3 = self.c3k2(cat3, ch512 + ch512, ch256, n2, False, "h16")
        d3 = g.conv(p3, "h17", ch256, ch256, 3, stride=2)
        cat17 = g.concat([d3, h13], axis=1, stem="cat_h17")
        p4 = self.c3k2(cat17, ch256 + ch512, ch512, n2, False, "h19")
        d4 = g.conv(p4, "h20", ch512, ch512, 3, stride=2)
        cat20 = g.concat([d4, p5_backbone], axis=1, stem="cat_h20")
        p5 = self.c3k2(cat20, ch512 + ch1024, ch1024, n2, True, "h22")

        levels = (p3, p4, p5)
        chans = (ch256, ch512, ch1024)
        boxes, scores = self.detect_branches(levels, chans)
        if self.spec.task == "segment":
            self.proto(p3, ch256)
            masks = self.mask_branches(levels, chans)
            self.decode_detect(boxes, scores, extra=masks)
            # Output order must match the engine contract: head first.
            self.g.outputs.reverse()
        else:
            self.decode_detect(boxes, scores)
        return g


def build_graph(spec: BuildSpec) -> Graph:
    """The full inference graph for one variant/task."""
    return _Builder(spec).build()
