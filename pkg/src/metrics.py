"""视频显著性评价指标：MAE、F-beta、S-measure

约定（写入报告头）：
    F-beta   β² = 0.3；默认对 255 个均匀阈值 i/255 (i = 1..255) 取最大值，
             二值化规则为 pred ≥ thr；真值为空时 F = 0
    S-measure α = 0.5；目标级项用前景 / 背景的均值与标准差，区域级项按真值质心
             把图像分为四块，逐块计算 SSIM 式相似度；真值全空时 S = 1 - mean(pred)，
             真值全满时 S = mean(pred)
所有指标取值 [0,1]。
"""

from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from src.data.image_io import read_mask, read_prob
from src.errors import DomainError, IngestionError, ShapeError
from src.my_dtypes import MetricReport

EPS = np.spacing(1.0)
BETA2 = 0.3
ALPHA = 0.5
UNIFORM_THRESHOLDS: NDArray[np.float64] = np.arange(1, 256) / 255.0

FMode = Literal["max", "mean", "adaptive"]
Sweep = Literal["uniform", "exact"]


def _prepare(pred: ArrayLike, gt: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ShapeError(f"预测 {pred.shape} 与真值 {gt.shape} 形状不一致")
    if pred.size == 0:
        raise ShapeError("预测图为空")
    if not np.isfinite(pred).all() or pred.min() < 0 or pred.max() > 1:
        raise DomainError("预测图必须为 [0,1] 内的有限值")
    return pred, gt >= 0.5


def mae(pred: ArrayLike, gt: ArrayLike) -> float:
    """逐像素平均绝对误差。

    Examples:
        >>> mae([[0.5, 0.0], [1.0, 1.0]], [[1, 0], [1, 0]])
        0.375
    """
    pred, mask = _prepare(pred, gt)
    return float(np.mean(np.abs(pred - mask)))


def _f_from_counts(
    tp: NDArray[np.float64], predicted: NDArray[np.float64], positives: float, beta2: float
) -> NDArray[np.float64]:
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = tp / positives
    numerator = (1 + beta2) * precision * recall
    denominator = beta2 * precision + recall
    return np.divide(numerator, denominator, out=np.zeros_like(tp), where=denominator > 0)


def f_curve(
    pred: ArrayLike, gt: ArrayLike, beta2: float = BETA2, sweep: Sweep = "uniform"
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """阈值扫描下的 F 曲线，返回 (阈值, F_t)。

    uniform 使用 255 个固定阈值 i/255；exact 使用预测图中出现过的全部取值，
    后者对预测值的任意严格单调变换保持不变。
    """
    pred, mask = _prepare(pred, gt)
    positives = float(mask.sum())
    if sweep == "uniform":
        thresholds = UNIFORM_THRESHOLDS
        # 像素通过的阈值个数；第 i 个阈值下为正当且仅当 i ≤ level
        level = np.searchsorted(thresholds, pred.ravel(), side="right")
        bins = len(thresholds) + 1
        hist_all = np.bincount(level, minlength=bins)
        hist_fg = np.bincount(level[mask.ravel()], minlength=bins)
        predicted = np.cumsum(hist_all[::-1])[::-1][1:].astype(np.float64)
        tp = np.cumsum(hist_fg[::-1])[::-1][1:].astype(np.float64)
    elif sweep == "exact":
        thresholds, inverse = np.unique(pred.ravel(), return_inverse=True)
        hist_all = np.bincount(inverse, minlength=len(thresholds))
        hist_fg = np.bincount(inverse[mask.ravel()], minlength=len(thresholds))
        predicted = np.cumsum(hist_all[::-1])[::-1].astype(np.float64)
        tp = np.cumsum(hist_fg[::-1])[::-1].astype(np.float64)
    else:
        raise ValueError(f"未知的阈值扫描方式: {sweep}")
    if positives == 0:
        return thresholds, np.zeros(len(thresholds))
    return thresholds, _f_from_counts(tp, predicted, positives, beta2)


def f_beta(
    pred: ArrayLike,
    gt: ArrayLike,
    beta2: float = BETA2,
    mode: FMode = "max",
    sweep: Sweep = "uniform",
) -> float:
    """F-beta 指标。

    Args:
        pred: [0,1] 概率图。
        gt: 二值真值（≥ 0.5 视为前景）。
        beta2: β²。
        mode: max 取阈值扫描的最大值，mean 取平均值，adaptive 使用单一自适应
            阈值 min(2·mean(pred), 1)。
        sweep: 阈值扫描方式，见 f_curve。

    Returns:
        F 值；真值为空或任何阈值下都没有正例时为 0。
    """
    if mode == "adaptive":
        pred_arr, mask = _prepare(pred, gt)
        positives = float(mask.sum())
        if positives == 0:
            return 0.0
        thr = min(2.0 * float(pred_arr.mean()), 1.0)
        binary = pred_arr >= thr
        tp = np.array([float((binary & mask).sum())])
        f = _f_from_counts(tp, np.array([float(binary.sum())]), positives, beta2)
        return float(f[0])
    _, curve = f_curve(pred, gt, beta2, sweep)
    if mode == "max":
        return float(curve.max())
    if mode == "mean":
        return float(curve.mean())
    raise ValueError(f"未知的 F 统计方式: {mode}")


def _object_similarity(values: NDArray[np.float64]) -> float:
    x = float(values.mean())
    sigma = float(values.std(ddof=1)) if values.size > 1 else 0.0
    return 2.0 * x / (x * x + 1.0 + sigma + EPS)


def s_object(pred: NDArray[np.float64], mask: NDArray[np.bool_]) -> float:
    """目标级结构相似度：前景与背景分别比较，按前景占比加权。"""
    u = float(mask.mean())
    fg = _object_similarity(pred[mask])
    bg = _object_similarity(1.0 - pred[~mask])
    return u * fg + (1.0 - u) * bg


def centroid(mask: NDArray[np.bool_]) -> tuple[int, int]:
    """真值质心 (x, y)，四舍五入后加 1，作为四分块的切分位置。"""
    h, w = mask.shape
    if not mask.any():
        return int(np.round(w / 2)) + 1, int(np.round(h / 2)) + 1
    y, x = np.argwhere(mask).mean(axis=0).round()
    return int(x) + 1, int(y) + 1


def block_ssim(pred: NDArray[np.float64], gt: NDArray[np.float64]) -> float:
    """单块的 SSIM 式相似度（不含亮度以外的常数项）。单像素块按方差为 0 处理。"""
    n = pred.size
    x, y = pred.mean(), gt.mean()
    dof = max(n - 1, 1)
    sigma_x = np.sum((pred - x) ** 2) / dof
    sigma_y = np.sum((gt - y) ** 2) / dof
    sigma_xy = np.sum((pred - x) * (gt - y)) / dof
    alpha = 4.0 * x * y * sigma_xy
    beta = (x * x + y * y) * (sigma_x + sigma_y)
    if alpha != 0:
        return float(alpha / (beta + EPS))
    return 1.0 if beta == 0 else 0.0


def s_region(pred: NDArray[np.float64], mask: NDArray[np.bool_]) -> float:
    """区域级结构相似度：按质心切成四块，按面积加权；空块权重为 0，直接跳过。"""
    h, w = mask.shape
    x, y = centroid(mask)
    gt = mask.astype(np.float64)
    score = 0.0
    for rows, cols in (
        (slice(0, y), slice(0, x)),
        (slice(0, y), slice(x, w)),
        (slice(y, h), slice(0, x)),
        (slice(y, h), slice(x, w)),
    ):
        block = pred[rows, cols]
        if block.size == 0:
            continue
        score += block.size / (h * w) * block_ssim(block, gt[rows, cols])
    return score


def s_measure(pred: ArrayLike, gt: ArrayLike, alpha: float = ALPHA) -> float:
    """S-measure = α·S_object + (1-α)·S_region，截断到 [0,1]。

    Examples:
        >>> s_measure(np.zeros((4, 4)), np.zeros((4, 4)))
        1.0
    """
    pred, mask = _prepare(pred, gt)
    coverage = mask.mean()
    if coverage == 0:
        score = 1.0 - float(pred.mean())
    elif coverage == 1:
        score = float(pred.mean())
    else:
        score = alpha * s_object(pred, mask) + (1.0 - alpha) * s_region(pred, mask)
    return float(np.clip(score, 0.0, 1.0))


def conventions(
    beta2: float = BETA2, alpha: float = ALPHA, f_mode: FMode = "max", sweep: Sweep = "uniform"
) -> dict[str, object]:
    return {
        "beta2": beta2,
        "f_mode": f_mode,
        "f_sweep": sweep,
        "f_thresholds": len(UNIFORM_THRESHOLDS) if sweep == "uniform" else "unique",
        "alpha": alpha,
        "gt_threshold": 128,
        "aggregate": "frame-weighted mean",
    }


def frame_metrics(
    pred: ArrayLike,
    gt: ArrayLike,
    beta2: float = BETA2,
    alpha: float = ALPHA,
    f_mode: FMode = "max",
    sweep: Sweep = "uniform",
) -> dict[str, float]:
    return {
        "mae": mae(pred, gt),
        "f_beta": f_beta(pred, gt, beta2, f_mode, sweep),
        "s_measure": s_measure(pred, gt, alpha),
    }


def _prediction_names(pred_dir: Path) -> set[str]:
    return {
        f"{seq.name}/{p.stem}"
        for seq in sorted(Path(pred_dir).iterdir())
        if seq.is_dir()
        for p in seq.glob("*.png")
    }


def _gt_names(gt_root: Path) -> set[str]:
    names = set()
    for seq in sorted(Path(gt_root).iterdir()):
        gt_dir = seq / "gt"
        if not gt_dir.is_dir():
            continue
        files = sorted(gt_dir.glob("*.png"))
        # 首帧被丢弃，没有对应的预测
        names.update(f"{seq.name}/{p.stem}" for p in files[1:])
    return names


def evaluate_dataset(
    pred_dir: Path,
    gt_root: Path,
    dataset: str | None = None,
    beta2: float = BETA2,
    alpha: float = ALPHA,
    f_mode: FMode = "max",
    sweep: Sweep = "uniform",
) -> MetricReport:
    """逐帧评价预测目录，并按序列与整体汇总。

    Args:
        pred_dir: 预测目录，布局 <sequence>/NNNN.png。
        gt_root: 数据目录，布局 <sequence>/gt/NNNN.png（t ≥ 2 参与评价）。
        dataset: 报告中的数据集标识，默认取 gt_root 的目录名。

    Returns:
        MetricReport。

    Raises:
        IngestionError: 目录缺失，或预测与真值的文件集合不一致（列出差异）。
    """
    pred_dir, gt_root = Path(pred_dir), Path(gt_root)
    for d in (pred_dir, gt_root):
        if not d.is_dir():
            raise IngestionError(f"目录不存在: {d}")
    predicted = _prediction_names(pred_dir)
    expected = _gt_names(gt_root)
    if not expected:
        raise IngestionError(f"{gt_root} 下没有任何真值帧")
    missing = sorted(expected - predicted)
    extra = sorted(predicted - expected)
    if missing or extra:
        lines = []
        if missing:
            lines.append(f"缺少预测 {len(missing)} 帧: {', '.join(missing[:10])}")
        if extra:
            lines.append(f"多余预测 {len(extra)} 帧: {', '.join(extra[:10])}")
        raise IngestionError("预测与真值文件不匹配；" + "；".join(lines))

    rows = []
    for key in sorted(expected):
        seq, name = key.split("/")
        pred = read_prob(pred_dir / seq / f"{name}.png")
        gt = read_mask(gt_root / seq / "gt" / f"{name}.png")
        rows.append({"sequence": seq, "frame": name, **frame_metrics(pred, gt, beta2, alpha, f_mode, sweep)})
    return MetricReport(
        dataset=dataset or gt_root.name,
        per_frame=pd.DataFrame(rows),
        conventions=conventions(beta2, alpha, f_mode, sweep),
    )
