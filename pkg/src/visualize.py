"""静态可视化：逐帧对比图与损失曲线

对比图每帧一行：帧 | 光流 | 真值 | 每个预测来源一列。
"""

from pathlib import Path

import matplotlib.pyplot as plt
import pandas as pd

from config.matplotlib_config import PNG_METADATA, setup_matplotlib
from src.data.image_io import read_gray, read_rgb
from src.errors import IngestionError


def _frame_keys(pred_dir: Path) -> set[str]:
    if not pred_dir.is_dir():
        raise IngestionError(f"预测目录不存在: {pred_dir}")
    return {
        f"{seq.name}/{p.stem}"
        for seq in pred_dir.iterdir()
        if seq.is_dir()
        for p in seq.glob("*.png")
    }


def aligned_frames(sources: dict[str, Path], data_root: Path) -> list[str]:
    """所有预测来源共有且真值齐全的帧，形如 "seq000/0002"。

    Raises:
        IngestionError: 各来源的帧集合不一致，或某帧缺少帧 / 光流 / 真值文件。
    """
    if not sources:
        raise IngestionError("至少需要一个预测来源")
    key_sets = {label: _frame_keys(Path(d)) for label, d in sources.items()}
    reference_label, reference = next(iter(key_sets.items()))
    for label, keys in key_sets.items():
        if keys != reference:
            diff = sorted(keys ^ reference)
            raise IngestionError(
                f"预测来源 {label} 与 {reference_label} 的帧集合不一致: {', '.join(diff[:10])}"
            )
    if not reference:
        raise IngestionError(f"预测来源 {reference_label} 中没有任何帧")
    for key in sorted(reference):
        seq, name = key.split("/")
        for sub in ("frames", "flow", "gt"):
            path = Path(data_root) / seq / sub / f"{name}.png"
            if not path.exists():
                raise IngestionError(f"帧 {key} 缺少文件: {path}")
    return sorted(reference)


def comparison_figure(key: str, sources: dict[str, Path], data_root: Path) -> plt.Figure:
    """单帧的横向对比图。"""
    seq, name = key.split("/")
    data_root = Path(data_root)
    panels = [
        ("frame", read_rgb(data_root / seq / "frames" / f"{name}.png"), None),
        ("flow", read_rgb(data_root / seq / "flow" / f"{name}.png"), None),
        ("gt", read_gray(data_root / seq / "gt" / f"{name}.png"), "gray"),
    ]
    for label, pred_dir in sources.items():
        panels.append((label, read_gray(Path(pred_dir) / seq / f"{name}.png"), "gray"))

    fig, axes = plt.subplots(1, len(panels), figsize=(2.0 * len(panels), 2.2))
    for ax, (title, image, cmap) in zip(axes, panels, strict=True):
        ax.imshow(image, cmap=cmap, vmin=0, vmax=255 if cmap else None, interpolation="nearest")
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    fig.suptitle(key, fontsize=9)
    fig.tight_layout()
    return fig


def run_viz(
    sources: dict[str, Path], data_root: Path, out: Path, verbose: bool = True
) -> list[Path]:
    """为每个对齐的帧导出一张对比图。

    Args:
        sources: 预测来源标签 → 预测目录（<sequence>/NNNN.png 布局）。
        data_root: 数据目录，提供帧、光流与真值。
        out: 输出目录，写入 <sequence>/NNNN.png。
        verbose: 是否打印汇总。

    Returns:
        写出的 PNG 路径列表，每帧一张。
    """
    setup_matplotlib()
    keys = aligned_frames(sources, data_root)
    written = []
    for key in keys:
        seq, name = key.split("/")
        path = Path(out) / seq / f"{name}.png"
        path.parent.mkdir(parents=True, exist_ok=True)
        fig = comparison_figure(key, sources, data_root)
        fig.savefig(path, format="png", metadata=PNG_METADATA)
        plt.close(fig)
        written.append(path)
    if verbose:
        print(f"✓ 已导出 {len(written)} 张对比图（{3 + len(sources)} 列）→ {out}")
    return written


def plot_loss_traces(traces: dict[str, pd.DataFrame], out: Path) -> Path:
    """把若干阶段的损失轨迹画在同一张图上。"""
    setup_matplotlib()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for label, trace in traces.items():
        ax.plot(trace["step"], trace["loss"], label=label, linewidth=1)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="png", metadata=PNG_METADATA)
    plt.close(fig)
    return out
