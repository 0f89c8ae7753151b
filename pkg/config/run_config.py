"""运行配置：训练阶段、学习率调度、合成数据生成规格

RunConfig 把 model / train / synth 三段打包成一个 JSON 文档，供命令行的
--config 参数读取。
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from config.model_config import ModelConfig
from src.errors import ConfigError

Stage = Literal["teacher", "student", "joint"]


class TrainConfig(BaseModel):
    """单个训练阶段的超参数。

    学习率按 base_lr · lr_decay^⌊epoch / decay_period⌋ 分段衰减。

    Attributes:
        stage: teacher 只训练运动分支（光流 + 真值），student 只训练外观分支
            （单帧 + 真值，不融合不教学），joint 训练完整双分支。
        epochs: 训练轮数。
        batch_size: 批大小。
        base_lr: 初始学习率。
        lr_decay: 衰减因子，取值 (0, 1)。
        decay_period: 每隔多少轮衰减一次。
        lambda_teacher: joint 阶段 Z^M 深度监督损失的权重。
        betas: Adam 的一、二阶矩系数。
        max_steps: 可选的总步数上限（冒烟测试用），None 表示不限制。
        seed: 数据打乱与初始化的随机种子。
        device: torch 设备名。
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    stage: Stage = "joint"
    epochs: int = Field(default=20, ge=1)
    batch_size: int = Field(default=8, ge=1)
    base_lr: float = Field(default=1e-4, gt=0)
    lr_decay: float = Field(default=0.1, gt=0, lt=1)
    decay_period: int = Field(default=25, ge=1)
    lambda_teacher: float = Field(default=1.0, ge=0)
    betas: tuple[float, float] = (0.9, 0.999)
    max_steps: int | None = Field(default=None, ge=1)
    seed: int = 0
    device: str = "cpu"


class SynthSpec(BaseModel):
    """合成运动目标视频的生成规格。

    速度与面积都以画布边长为单位给出，保证不同画布尺寸下行为一致。

    Attributes:
        num_sequences: 序列数。
        frames_per_sequence: 每个序列的帧数，至少 2。
        canvas_size: 画布边长（像素）。
        object_count: 运动显著目标的个数。
        object_area_range: 运动目标（并集）面积占画布的比例范围，须落在 [0.02, 0.30]。
        speed_range: 运动目标每帧位移的范围（画布边长的比例），上限不超过 1/8。
        static_distractor: 是否放置一个静止的高对比度干扰目标。
        background_clutter: 是否加入缓慢移动的背景杂斑。
        clutter_count: 背景杂斑个数。
        clutter_speed: 背景杂斑每帧位移（画布边长的比例），必须小于运动目标的最小速度。
        seed: 随机种子。
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    num_sequences: int = Field(default=8, ge=1)
    frames_per_sequence: int = Field(default=16, ge=2)
    canvas_size: int = Field(default=64, ge=32)
    object_count: int = Field(default=1, ge=1, le=3)
    object_area_range: tuple[float, float] = (0.04, 0.20)
    speed_range: tuple[float, float] = (1 / 32, 1 / 8)
    static_distractor: bool = True
    background_clutter: bool = True
    clutter_count: int = Field(default=4, ge=0)
    clutter_speed: float = Field(default=1 / 96, ge=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_ranges(self) -> "SynthSpec":
        lo, hi = self.object_area_range
        if not 0.02 <= lo <= hi <= 0.30:
            raise ValueError(f"object_area_range 必须满足 0.02 ≤ lo ≤ hi ≤ 0.30，收到 {self.object_area_range}")
        v_lo, v_hi = self.speed_range
        if not 0 < v_lo <= v_hi <= 1 / 8:
            raise ValueError(f"speed_range 必须满足 0 < lo ≤ hi ≤ 1/8，收到 {self.speed_range}")
        if self.background_clutter and self.clutter_speed >= v_lo:
            raise ValueError("clutter_speed 必须小于运动目标的最小速度，否则运动线索失去区分度")
        return self

    @property
    def flow_max_mag(self) -> float:
        """光流编码的归一化幅值：速度上界 canvas/8。"""
        return self.canvas_size / 8


class RunConfig(BaseModel):
    """命令行读取的完整运行配置。"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: ModelConfig = Field(default_factory=ModelConfig.toy)
    train: TrainConfig = Field(default_factory=TrainConfig)
    synth: SynthSpec = Field(default_factory=SynthSpec)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"运行配置不合法: {e}") from e

    @classmethod
    def from_json(cls, path: Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"配置文件不存在: {path}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigError(f"配置文件不是合法的 JSON: {path}: {e}") from e
        return cls.from_dict(data)

    def to_json(self, path: Path | None = None) -> str:
        text = json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def with_seed(self, seed: int) -> "RunConfig":
        """把同一个种子下发到模型、训练与合成三段配置。"""
        return self.model_copy(
            update={
                "model": self.model.model_copy(update={"seed": seed}),
                "train": self.train.model_copy(update={"seed": seed}),
                "synth": self.synth.model_copy(update={"seed": seed}),
            }
        )

    def config_hash(self) -> str:
        """规范化 JSON 的 SHA-256，写入运行清单。"""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
