"""逐元素循环写成的参考实现

只依赖 numpy 与 math，按定义逐像素、逐通道计算，与 src/ 中的向量化实现相互独立。
所有函数处理单个样本（无 batch 维），张量布局为 (C, H, W)。
"""

import math

import numpy as np
import torch
from torch import nn


def as_np(t: torch.Tensor) -> np.ndarray:
    return t.detach().double().cpu().numpy()


def sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def activation(name: str, x: float) -> float:
    if name == "silu":
        return x * sigmoid(x)
    if name == "relu":
        return max(x, 0.0)
    raise ValueError(name)


def apply_activation(name: str, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    for idx in np.ndindex(*x.shape):
        out[idx] = activation(name, float(x[idx]))
    return out


# ----------------------------------------------------------------------
# 卷积与缩放
# ----------------------------------------------------------------------
def conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray, padding: int = 0, dilation: int = 1) -> np.ndarray:
    """步长 1 的二维卷积（互相关），零填充。"""
    c_in, h, w = x.shape
    c_out, _, kh, kw = weight.shape
    out_h = h + 2 * padding - dilation * (kh - 1)
    out_w = w + 2 * padding - dilation * (kw - 1)
    out = np.zeros((c_out, out_h, out_w))
    for o in range(c_out):
        for i in range(out_h):
            for j in range(out_w):
                acc = float(bias[o])
                for c in range(c_in):
                    for u in range(kh):
                        for v in range(kw):
                            y = i - padding + u * dilation
                            z = j - padding + v * dilation
                            if 0 <= y < h and 0 <= z < w:
                                acc += weight[o, c, u, v] * x[c, y, z]
                out[o, i, j] = acc
    return out


def conv_module(x: np.ndarray, conv: nn.Conv2d) -> np.ndarray:
    return conv2d(
        x,
        as_np(conv.weight),
        as_np(conv.bias),
        padding=conv.padding[0],
        dilation=conv.dilation[0],
    )


def _source_index(i: int, in_size: int, out_size: int) -> tuple[int, int, float]:
    scale = in_size / out_size
    real = max(scale * (i + 0.5) - 0.5, 0.0)
    i0 = int(real)
    i1 = i0 + 1 if i0 < in_size - 1 else i0
    return i0, i1, real - i0


def bilinear(x: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """align_corners=False 的双线性缩放。"""
    c, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return x.copy()
    out = np.zeros((c, out_h, out_w))
    for i in range(out_h):
        y0, y1, ly = _source_index(i, h, out_h)
        for j in range(out_w):
            x0, x1, lx = _source_index(j, w, out_w)
            for k in range(c):
                out[k, i, j] = (
                    (1 - ly) * ((1 - lx) * x[k, y0, x0] + lx * x[k, y0, x1])
                    + ly * ((1 - lx) * x[k, y1, x0] + lx * x[k, y1, x1])
                )
    return out


# ----------------------------------------------------------------------
# 时间调制器
# ----------------------------------------------------------------------
def channel_attention(x: np.ndarray, fc1: nn.Linear, fc2: nn.Linear) -> np.ndarray:
    c, h, w = x.shape
    w1, b1 = as_np(fc1.weight), as_np(fc1.bias)
    w2, b2 = as_np(fc2.weight), as_np(fc2.bias)
    pooled = [max(float(x[k, i, j]) for i in range(h) for j in range(w)) for k in range(c)]
    hidden = []
    for m in range(w1.shape[0]):
        acc = float(b1[m]) + sum(w1[m, k] * pooled[k] for k in range(c))
        hidden.append(max(acc, 0.0))
    out = np.zeros_like(x)
    for k in range(c):
        gate = sigmoid(float(b2[k]) + sum(w2[k, m] * hidden[m] for m in range(len(hidden))))
        for i in range(h):
            for j in range(w):
                out[k, i, j] = gate * x[k, i, j]
    return out


def spatial_attention(x: np.ndarray, conv: nn.Conv2d, pool: str = "max_mean") -> np.ndarray:
    c, h, w = x.shape
    channels = 2 if pool == "max_mean" else 1
    desc = np.zeros((channels, h, w))
    for i in range(h):
        for j in range(w):
            values = [float(x[k, i, j]) for k in range(c)]
            desc[0, i, j] = max(values)
            if pool == "max_mean":
                desc[1, i, j] = sum(values) / c
    logits = conv_module(desc, conv)
    out = np.zeros_like(x)
    for i in range(h):
        for j in range(w):
            gate = sigmoid(float(logits[0, i, j]))
            for k in range(c):
                out[k, i, j] = gate * x[k, i, j]
    return out


def temporal_modulate(f_m: np.ndarray, module) -> np.ndarray:
    x = f_m
    if module.channel_attention is not None:
        x = channel_attention(x, module.channel_attention.fc1, module.channel_attention.fc2)
    if module.spatial_attention is not None:
        x = spatial_attention(x, module.spatial_attention.conv, module.spatial_attention.pool)
    return x


def implicit_guidance_fuse(f_a: np.ndarray, f_m: np.ndarray, module) -> np.ndarray:
    modulated = temporal_modulate(f_m, module)
    out = np.zeros_like(f_a)
    for idx in np.ndindex(*f_a.shape):
        out[idx] = f_a[idx] + modulated[idx]
    return out


# ----------------------------------------------------------------------
# 解码器
# ----------------------------------------------------------------------
def conv_act(x: np.ndarray, module: nn.Sequential, act: str) -> np.ndarray:
    return apply_activation(act, conv_module(x, module[0]))


def rf_block(x: np.ndarray, block, act: str) -> np.ndarray:
    branches = [conv_module(x, block.branch0)]
    for seq in block.dilated:
        branches.append(conv_module(conv_module(x, seq[0]), seq[1]))
    stacked = np.concatenate(branches, axis=0)
    fused = conv_module(stacked, block.fuse)
    shortcut = conv_module(x, block.shortcut)
    return apply_activation(act, fused + shortcut)


def feature_broadcast(r3: np.ndarray, r4: np.ndarray, r5: np.ndarray, broadcast, act: str):
    def g(k: int, i: int, r_i: np.ndarray, target: np.ndarray) -> np.ndarray:
        up = bilinear(r_i, target.shape[1], target.shape[2])
        module = broadcast.transforms[f"{k}_{i}"]
        if isinstance(module, nn.Identity):
            return up
        return conv_act(up, module, act)

    g45 = g(4, 5, r5, r4)
    g34 = g(3, 4, r4, r3)
    g35 = g(3, 5, r5, r3)
    p4 = np.zeros_like(r4)
    for idx in np.ndindex(*r4.shape):
        p4[idx] = r4[idx] * g45[idx]
    p3 = np.zeros_like(r3)
    for idx in np.ndindex(*r3.shape):
        p3[idx] = r3[idx] * g34[idx] * g35[idx]
    return p3, p4, r5.copy()


def unet_aggregate(p3: np.ndarray, p4: np.ndarray, p5: np.ndarray, aggregate, act: str) -> np.ndarray:
    x = bilinear(p5, p4.shape[1], p4.shape[2]) + p4
    x = conv_act(x, aggregate.conv4, act)
    x = bilinear(x, p3.shape[1], p3.shape[2]) + p3
    x = conv_act(x, aggregate.conv3, act)
    return conv_module(x, aggregate.head)


# ----------------------------------------------------------------------
# 显式教学与损失
# ----------------------------------------------------------------------
def explicit_teach(f: np.ndarray, m: np.ndarray) -> np.ndarray:
    """f·(1+m)，m 为 (1, H, W) 且与 f 同分辨率。"""
    out = np.zeros_like(f)
    for k, i, j in np.ndindex(*f.shape):
        out[k, i, j] = f[k, i, j] * (1.0 + m[0, i, j])
    return out


def bce(logits: np.ndarray, gt: np.ndarray) -> float:
    total = 0.0
    for z, y in zip(logits.ravel(), gt.ravel(), strict=True):
        z, y = float(z), float(y)
        total += max(z, 0.0) - z * y + math.log1p(math.exp(-abs(z)))
    return total / logits.size


# ----------------------------------------------------------------------
# 评价指标
# ----------------------------------------------------------------------
def mae(pred: np.ndarray, gt: np.ndarray) -> float:
    total = 0.0
    for p, g in zip(pred.ravel(), gt.ravel(), strict=True):
        total += abs(float(p) - (1.0 if g >= 0.5 else 0.0))
    return total / pred.size


def f_beta_max(pred: np.ndarray, gt: np.ndarray, beta2: float = 0.3) -> float:
    """对 255 个阈值 i/255 逐一二值化，取最大 F。"""
    flat_p = [float(p) for p in pred.ravel()]
    flat_g = [bool(g >= 0.5) for g in gt.ravel()]
    positives = sum(flat_g)
    if positives == 0:
        return 0.0
    best = 0.0
    for i in range(1, 256):
        thr = i / 255.0
        tp = predicted = 0
        for p, g in zip(flat_p, flat_g, strict=True):
            if p >= thr:
                predicted += 1
                tp += g
        precision = tp / predicted if predicted > 0 else 0.0
        recall = tp / positives
        denominator = beta2 * precision + recall
        f = (1 + beta2) * precision * recall / denominator if denominator > 0 else 0.0
        best = max(best, f)
    return best


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _std1(values: list[float]) -> float:
    if len(values) < 2:
        return 0.0
    m = _mean(values)
    return math.sqrt(sum((v - m) ** 2 for v in values) / (len(values) - 1))


def _object_score(values: list[float]) -> float:
    x = _mean(values)
    return 2.0 * x / (x * x + 1.0 + _std1(values) + np.spacing(1.0))


def _block_ssim(pred: list[list[float]], gt: list[list[float]]) -> float:
    p = [v for row in pred for v in row]
    g = [v for row in gt for v in row]
    n = len(p)
    x, y = _mean(p), _mean(g)
    dof = max(n - 1, 1)
    sx = sum((a - x) ** 2 for a in p) / dof
    sy = sum((b - y) ** 2 for b in g) / dof
    sxy = sum((a - x) * (b - y) for a, b in zip(p, g, strict=True)) / dof
    alpha = 4 * x * y * sxy
    beta = (x * x + y * y) * (sx + sy)
    if alpha != 0:
        return alpha / (beta + np.spacing(1.0))
    return 1.0 if beta == 0 else 0.0


def s_measure(pred: np.ndarray, gt: np.ndarray, alpha: float = 0.5) -> float:
    h, w = pred.shape
    mask = [[bool(gt[i, j] >= 0.5) for j in range(w)] for i in range(h)]
    p = [[float(pred[i, j]) for j in range(w)] for i in range(h)]
    fg_count = sum(v for row in mask for v in row)
    if fg_count == 0:
        return min(max(1.0 - _mean([v for row in p for v in row]), 0.0), 1.0)
    if fg_count == h * w:
        return min(max(_mean([v for row in p for v in row]), 0.0), 1.0)

    u = fg_count / (h * w)
    fg = [p[i][j] for i in range(h) for j in range(w) if mask[i][j]]
    bg = [1.0 - p[i][j] for i in range(h) for j in range(w) if not mask[i][j]]
    s_obj = u * _object_score(fg) + (1 - u) * _object_score(bg)

    ys = [i for i in range(h) for j in range(w) if mask[i][j]]
    xs = [j for i in range(h) for j in range(w) if mask[i][j]]
    cx = round(sum(xs) / len(xs)) + 1
    cy = round(sum(ys) / len(ys)) + 1
    g = [[1.0 if mask[i][j] else 0.0 for j in range(w)] for i in range(h)]
    s_reg = 0.0
    for r0, r1, c0, c1 in ((0, cy, 0, cx), (0, cy, cx, w), (cy, h, 0, cx), (cy, h, cx, w)):
        r1, c1 = min(r1, h), min(c1, w)
        if r1 <= r0 or c1 <= c0:
            continue
        block_p = [row[c0:c1] for row in p[r0:r1]]
        block_g = [row[c0:c1] for row in g[r0:r1]]
        area = (r1 - r0) * (c1 - c0)
        s_reg += area / (h * w) * _block_ssim(block_p, block_g)
    score = alpha * s_obj + (1 - alpha) * s_reg
    return min(max(score, 0.0), 1.0)
