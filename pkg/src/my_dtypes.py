"""自定义数据类型"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
import torch
from numpy.typing import NDArray

from src.errors import ConfigError

Branch = Literal["appearance", "motion"]


@dataclass(frozen=True)
class FeaturePyramid:
    """单个分支的五级特征金字塔。

    Attributes:
        levels: f_1 ~ f_5，每个形状为 (B, C_k, H/stride_k, W/stride_k)。
        branch: 产生该金字塔的分支。
    """

    levels: tuple[torch.Tensor, ...]
    branch: Branch

    def __post_init__(self):
        if len(self.levels) != 5:
            raise ConfigError(f"特征金字塔必须恰好 5 级，收到 {len(self.levels)} 级")

    def __getitem__(self, level: int) -> torch.Tensor:
        """按 1 起始的层号取特征，与公式中的 f_k 对应。"""
        if not 1 <= level <= 5:
            raise ConfigError(f"层号必须在 1~5 之间，收到 {level}")
        return self.levels[level - 1]

    @property
    def shapes(self) -> list[tuple[int, int, int]]:
        """各级特征去掉 batch 维后的 (C, H, W)。"""
        return [tuple(f.shape[1:]) for f in self.levels]


@dataclass(frozen=True)
class SaliencyMap:
    """单通道显著图，显式标注取值域。

    Attributes:
        values: 形状 (B, 1, H, W) 的张量。
        domain: prob 表示已经过 sigmoid 的概率，logit 表示未激活的原始输出。
    """

    values: torch.Tensor
    domain: Literal["prob", "logit"]

    def prob(self) -> torch.Tensor:
        return self.values if self.domain == "prob" else torch.sigmoid(self.values)

    def to_uint8(self) -> NDArray[np.uint8]:
        """第一个样本的概率图，量化为 8 位灰度。"""
        p = self.prob()[0, 0].detach().cpu().double().numpy()
        return np.floor(np.clip(p, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


@dataclass(frozen=True)
class ModelOutput:
    """GTNet 的前向输出。

    概率图与 logits 都已上采样到输入分辨率；单分支变体缺失的那一路为 None。

    Attributes:
        z_a: 学生分支（外观）的最终预测。
        z_m: 教师分支（运动）的运动引导掩码。
        z_a_logits: z_a 的原始 logits，供损失使用。
        z_m_logits: z_m 的原始 logits，供深度监督使用。
    """

    z_a: SaliencyMap | None
    z_m: SaliencyMap | None
    z_a_logits: torch.Tensor | None
    z_m_logits: torch.Tensor | None

    @property
    def prediction(self) -> SaliencyMap:
        """最终预测：有学生分支时为 Z^A，否则为 Z^M（+M 变体）。"""
        result = self.z_a if self.z_a is not None else self.z_m
        assert result is not None
        return result


@dataclass(frozen=True)
class VideoSample:
    """单个时间步的样本（t ≥ 2，首帧被丢弃）。

    Attributes:
        frame: 外观帧，(H, W, 3)，float32，取值 [0,1]。
        flow: 光流图像，(H, W, 3)，float32，取值 [0,1]；单帧静态数据为 None。
        gt: 二值真值掩码，(H, W)，float32，取值 {0,1}。
        t: 帧序号，从 2 开始。
        sequence_id: 所属序列名。
        name: 帧文件名（不含扩展名），预测图按此命名。
    """

    frame: NDArray[np.float32]
    flow: NDArray[np.float32] | None
    gt: NDArray[np.float32]
    t: int
    sequence_id: str
    name: str

    def __post_init__(self):
        if self.t < 2:
            raise ConfigError(f"样本序号必须从 2 开始，收到 t={self.t}")
        shapes = {self.frame.shape[:2], self.gt.shape[:2]}
        if self.flow is not None:
            shapes.add(self.flow.shape[:2])
        if len(shapes) != 1:
            raise ConfigError(f"{self.sequence_id}/{self.name}: 帧、光流、真值分辨率不一致 {shapes}")


METRIC_COLUMNS: tuple[str, ...] = ("mae", "f_beta", "s_measure")


@dataclass
class MetricReport:
    """按序列与整体汇总的 MAE / F-beta / S-measure。

    整体指标为按帧加权的平均，即所有帧指标的算术平均。

    Attributes:
        dataset: 数据集标识。
        per_frame: 逐帧指标表，列为 sequence, frame, mae, f_beta, s_measure。
        conventions: 指标约定（β²、α、F 的统计方式），写入报告头。
    """

    dataset: str
    per_frame: pd.DataFrame
    conventions: dict[str, object] = field(default_factory=dict)

    @property
    def per_sequence(self) -> pd.DataFrame:
        grouped = self.per_frame.groupby("sequence", sort=True)
        table = grouped[list(METRIC_COLUMNS)].mean()
        table.insert(0, "frames", grouped.size())
        table = table.reset_index()
        table.insert(0, "dataset", self.dataset)
        return table

    @property
    def aggregate(self) -> dict[str, float]:
        row = {m: float(self.per_frame[m].mean()) for m in METRIC_COLUMNS}
        row["frames"] = int(len(self.per_frame))
        return row

    def to_frame(self) -> pd.DataFrame:
        """CSV 布局：dataset, sequence, frames, mae, f_beta, s_measure，末行为 ALL。"""
        table = self.per_sequence
        total = {"dataset": self.dataset, "sequence": "ALL", **self.aggregate}
        return pd.concat([table, pd.DataFrame([total])], ignore_index=True)[
            ["dataset", "sequence", "frames", *METRIC_COLUMNS]
        ]

    def write(self, out_dir: Path, stem: str = "report") -> tuple[Path, Path]:
        """写出 CSV 与对应的 JSON 镜像。"""
        out_dir.mkdir(parents=True, exist_ok=True)
        csv_path = out_dir / f"{stem}.csv"
        json_path = out_dir / f"{stem}.json"
        self.to_frame().to_csv(csv_path, index=False, float_format="%.6f")
        payload = {
            "dataset": self.dataset,
            "conventions": self.conventions,
            "aggregate": self.aggregate,
            "sequences": json.loads(self.per_sequence.to_json(orient="records")),
        }
        json_path.write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
        return csv_path, json_path
