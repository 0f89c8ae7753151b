"""模型配置：规模档位、各层通道宽度、注意力超参数与消融开关

ModelConfig 以 JSON 文档序列化，未知字段一律拒绝；检查点清单中记录
config_hash() 用于加载时校验。
"""

import hashlib
import json
from pathlib import Path
from typing import Any, Literal

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from src.errors import ConfigError

# 五级金字塔的下采样步长固定不变
STRIDES: tuple[int, ...] = (2, 4, 8, 16, 32)

# 解码器只使用顶部三层
DECODED_LEVELS: tuple[int, ...] = (3, 4, 5)

Mode = Literal["M", "A", "MA"]


class AblationSpec(BaseModel):
    """消融开关。

    mode 决定使用哪些分支：M 只用运动（教师）分支，A 只用外观（学生）分支，
    MA 为完整双分支。mode 为 A 时 teaching 与 t_pd 不起作用；mode 为 M 时
    ca / sa / s_pd / teaching 不起作用。

    Attributes:
        dual_branch: 是否为双分支结构，必须与 mode == "MA" 一致。
        ca: 时间调制器中的通道注意力。
        sa: 时间调制器中的空间注意力。
        t_pd: 教师部分解码器；关闭时以 r_5 上的 1×1 卷积头代替。
        s_pd: 学生部分解码器；关闭时以朴素的上采样相加头代替。
        teaching: 运动引导掩码的显式教学。
        mode: 分支模式。
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    dual_branch: bool = True
    ca: bool = True
    sa: bool = True
    t_pd: bool = True
    s_pd: bool = True
    teaching: bool = True
    mode: Mode = "MA"

    @model_validator(mode="after")
    def _check_consistency(self) -> "AblationSpec":
        if self.mode == "MA" and not self.dual_branch:
            # 没有运动分支就没有 Z^M 来源，隐式引导和显式教学都无从谈起
            raise ValueError("mode=MA 需要 dual_branch=True：缺少运动分支时没有 Z^M 来源")
        if self.mode != "MA" and self.dual_branch:
            raise ValueError(f"mode={self.mode} 是单分支变体，不能同时设置 dual_branch=True")
        return self

    @property
    def uses_motion(self) -> bool:
        return self.mode in ("M", "MA")

    @property
    def uses_appearance(self) -> bool:
        return self.mode in ("A", "MA")

    @property
    def uses_modulator(self) -> bool:
        """是否存在时间调制器参数（#1 中 CA、SA 都关闭，F_TM 退化为恒等映射）。"""
        return self.mode == "MA" and (self.ca or self.sa)

    @property
    def uses_teaching(self) -> bool:
        return self.mode == "MA" and self.teaching

    @classmethod
    def from_variant(cls, variant: str) -> "AblationSpec":
        """按消融表中的编号构造开关组合。

        Args:
            variant: "1"~"6"、"OUR"、"MA"、"M" 或 "A"（大小写不敏感）。

        Returns:
            对应的 AblationSpec。

        Raises:
            ConfigError: 未知的变体编号。

        Examples:
            >>> AblationSpec.from_variant("1").ca
            False
        """
        key = str(variant).strip().upper().lstrip("#")
        if key not in VARIANTS:
            raise ConfigError(f"未知的消融变体: {variant!r}，可选: {', '.join(VARIANTS)}")
        return cls(**VARIANTS[key])

    def checkmarks(self) -> dict[str, bool]:
        """消融表中的勾选列（按实际生效的组件给出）。"""
        return {
            "DB": self.dual_branch,
            "CA": self.mode == "MA" and self.ca,
            "SA": self.mode == "MA" and self.sa,
            "T-PD": self.uses_motion and self.t_pd,
            "S-PD": self.uses_appearance and self.s_pd,
            "Teaching": self.uses_teaching,
        }


VARIANTS: dict[str, dict[str, Any]] = {
    "1": {"ca": False, "sa": False},
    "2": {"sa": False},
    "3": {"ca": False},
    "4": {"t_pd": False},
    "5": {"s_pd": False},
    "6": {"teaching": False},
    "OUR": {},
    "MA": {},
    "M": {"mode": "M", "dual_branch": False},
    "A": {"mode": "A", "dual_branch": False},
}


class ModelConfig(BaseModel):
    """GTNet 模型配置。

    Attributes:
        profile: 规模档位，toy 为桌面级窄网络，full 对齐 ResNet50 的各级宽度。
        input_size: 输入边长（正方形），必须能被 32 整除。
        widths: 五级特征的通道数。
        strides: 五级特征的步长，固定为 (2, 4, 8, 16, 32)。
        ca_reduction: 通道注意力双全连接层的压缩比 r，必须整除每一级宽度。
        decoder_width: 感受野块输出及部分解码器内部的通道数。
        spatial_pool: 空间注意力的通道池化描述子，max_mean 为最大值+均值两通道，
            max 为只用最大值的单通道模式。
        activation: 编码器与解码器卷积后的非线性。
        ablation: 消融开关。
        seed: 参数初始化的随机种子。
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    profile: Literal["toy", "full"] = "toy"
    input_size: int = 64
    widths: tuple[int, int, int, int, int] = (8, 16, 32, 64, 128)
    strides: tuple[int, int, int, int, int] = STRIDES  # type: ignore[assignment]
    ca_reduction: int = 4
    decoder_width: int = 16
    spatial_pool: Literal["max_mean", "max"] = "max_mean"
    activation: Literal["silu", "relu"] = "silu"
    ablation: AblationSpec = Field(default_factory=AblationSpec)
    seed: int = 0

    @field_validator("strides")
    @classmethod
    def _check_strides(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if tuple(value) != STRIDES:
            raise ValueError(f"strides 固定为 {STRIDES}，收到 {value}")
        return value

    @field_validator("input_size")
    @classmethod
    def _check_input_size(cls, value: int) -> int:
        if value <= 0 or value % 32 != 0:
            raise ValueError(f"input_size 必须为 32 的正整数倍，收到 {value}")
        return value

    @field_validator("widths")
    @classmethod
    def _check_widths(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(w <= 0 for w in value):
            raise ValueError(f"widths 必须全部为正，收到 {value}")
        return value

    @model_validator(mode="after")
    def _check_reduction(self) -> "ModelConfig":
        if self.ca_reduction <= 0 or self.decoder_width <= 0:
            raise ValueError("ca_reduction 与 decoder_width 必须为正")
        bad = [w for w in self.widths if w % self.ca_reduction != 0]
        if bad:
            raise ValueError(f"ca_reduction={self.ca_reduction} 不能整除宽度 {bad}")
        return self

    # ------------------------------------------------------------------
    # 档位
    # ------------------------------------------------------------------
    @classmethod
    def toy(cls, **overrides: Any) -> "ModelConfig":
        """toy 档位：64² 输入，宽度 (8,16,32,64,128)，r=4，解码宽度 16。"""
        return cls.from_dict({**PROFILES["toy"], **overrides})

    @classmethod
    def full(cls, **overrides: Any) -> "ModelConfig":
        """full 档位：352² 输入，ResNet50 各级宽度，r=16，解码宽度 32。"""
        return cls.from_dict({**PROFILES["full"], **overrides})

    def with_ablation(self, ablation: AblationSpec | str) -> "ModelConfig":
        """返回替换了消融开关的新配置。"""
        if isinstance(ablation, str):
            ablation = AblationSpec.from_variant(ablation)
        return self.model_copy(update={"ablation": ablation})

    # ------------------------------------------------------------------
    # 派生量
    # ------------------------------------------------------------------
    def level_shape(self, level: int, size: int | None = None) -> tuple[int, int, int]:
        """第 level 级（1~5）特征的 (C, H, W)。"""
        size = self.input_size if size is None else size
        side = size // self.strides[level - 1]
        return self.widths[level - 1], side, side

    def pyramid_shapes(self, size: int | None = None) -> list[tuple[int, int, int]]:
        return [self.level_shape(k, size) for k in range(1, 6)]

    # ------------------------------------------------------------------
    # 序列化
    # ------------------------------------------------------------------
    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelConfig":
        """从字典构造配置，校验失败统一转换为 ConfigError。"""
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"模型配置不合法: {e}") from e

    @classmethod
    def from_json(cls, source: str | Path) -> "ModelConfig":
        """从 JSON 文件路径或 JSON 字符串读取配置。"""
        text = Path(source).read_text(encoding="utf-8") if _is_path(source) else str(source)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"模型配置不是合法的 JSON: {e}") from e
        return cls.from_dict(data)

    def to_json(self, path: Path | None = None) -> str:
        text = json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def config_hash(self) -> str:
        """规范化 JSON 的 SHA-256，用于检查点与运行清单。"""
        canonical = json.dumps(
            self.model_dump(mode="json"), sort_keys=True, separators=(",", ":")
        )
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


PROFILES: dict[str, dict[str, Any]] = {
    "toy": {
        "profile": "toy",
        "input_size": 64,
        "widths": (8, 16, 32, 64, 128),
        "ca_reduction": 4,
        "decoder_width": 16,
    },
    "full": {
        "profile": "full",
        "input_size": 352,
        "widths": (64, 256, 512, 1024, 2048),
        "ca_reduction": 16,
        "decoder_width": 32,
    },
}


def _is_path(source: str | Path) -> bool:
    if isinstance(source, Path):
        return True
    return not source.lstrip().startswith("{")
