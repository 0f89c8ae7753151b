"""GTNet 整体装配

运动金字塔 → 教师部分解码 → Z^M；外观金字塔在每一级融合调制后的运动特征
（融合结果作为下一级输入），第 3~5 级再用 sigmoid(Z^M) 做显式教学，最后经
学生部分解码得到 Z^A。两路输出都双线性上采样到输入分辨率。

消融开关由 AblationSpec 给出，apply_ablation 按开关构造实际生效的网络。
"""

import torch
from torch import nn

from config.model_config import DECODED_LEVELS, AblationSpec, ModelConfig
from src.errors import ConfigError, DomainError, InputError
from src.gtnet.backbone import Encoder
from src.gtnet.decoder import CoarseHead, NaiveAggregator, PartialDecoder
from src.gtnet.layers import resize_to
from src.gtnet.modulator import TemporalModulator, implicit_guidance_fuse
from src.my_dtypes import Branch, FeaturePyramid, ModelOutput, SaliencyMap

# 各阶段训练时更新的子模块
TEACHER_MODULES: tuple[str, ...] = ("motion_encoder", "teacher_decoder")
STUDENT_MODULES: tuple[str, ...] = ("appearance_encoder", "student_decoder")


def explicit_teach(f_tm: torch.Tensor, z_m_prob: torch.Tensor, level: int) -> torch.Tensor:
    """显式教学：f^et = f^tm ⊕ (f^tm ⊗ resize(Z^M))，掩码在通道维广播。

    Args:
        f_tm: 第 level 级的融合特征 (B, C, H_k, W_k)。
        z_m_prob: 运动引导掩码概率 (B, 1, h, w)，取值 [0,1]。
        level: 层号，只能是 3、4、5。

    Returns:
        教学后的特征 f^et。

    Raises:
        ConfigError: 层号不在 3~5。
        DomainError: 掩码取值超出 [0,1]。
    """
    if level not in DECODED_LEVELS:
        raise ConfigError(f"显式教学只作用于第 3~5 级，收到第 {level} 级")
    if z_m_prob.numel() and (z_m_prob.min() < 0 or z_m_prob.max() > 1):
        raise DomainError(
            f"教学掩码必须在 [0,1] 内，收到 [{z_m_prob.min().item():.4g}, {z_m_prob.max().item():.4g}]"
        )
    mask = resize_to(z_m_prob, f_tm.shape[-2:])
    return f_tm + f_tm * mask


class GTNet(nn.Module):
    """双分支视频显著性检测网络。

    子模块按消融开关创建，未使用的分支不持有任何参数：
        motion_encoder / teacher_decoder      运动（教师）分支
        appearance_encoder / student_decoder  外观（学生）分支
        modulators                            每级一个时间调制器（#1 中不存在）

    Attributes:
        config: 模型配置。
        ablation: 生效的消融开关。
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.ablation: AblationSpec = config.ablation
        ab = self.ablation
        widths = config.widths
        top = (widths[2], widths[3], widths[4])
        act = config.activation

        self.motion_encoder: Encoder | None = None
        self.teacher_decoder: nn.Module | None = None
        self.appearance_encoder: Encoder | None = None
        self.student_decoder: nn.Module | None = None
        self.modulators: nn.ModuleList | None = None

        # 创建顺序固定，保证同一种子下各变体共有的子模块初始化一致
        if ab.uses_motion:
            self.motion_encoder = Encoder(widths, act, branch="motion")
            if ab.t_pd:
                self.teacher_decoder = PartialDecoder(top, config.decoder_width, act)
            else:
                self.teacher_decoder = CoarseHead(widths[4], config.decoder_width, act)
        if ab.uses_appearance:
            self.appearance_encoder = Encoder(widths, act, branch="appearance")
            if ab.s_pd:
                self.student_decoder = PartialDecoder(top, config.decoder_width, act)
            else:
                self.student_decoder = NaiveAggregator(top, config.decoder_width, act)
        if ab.uses_modulator:
            self.modulators = nn.ModuleList(
                TemporalModulator(w, config.ca_reduction, config.spatial_pool, ca=ab.ca, sa=ab.sa)
                for w in widths
            )

    # ------------------------------------------------------------------
    # 编码
    # ------------------------------------------------------------------
    def encoder(self, branch: Branch) -> Encoder:
        enc = self.motion_encoder if branch == "motion" else self.appearance_encoder
        if enc is None:
            raise ConfigError(f"当前变体 mode={self.ablation.mode} 不包含 {branch} 分支")
        return enc

    def extract_pyramid(
        self,
        image: torch.Tensor,
        branch: Branch,
        stage_inputs: dict[int, torch.Tensor] | None = None,
    ) -> FeaturePyramid:
        """用指定分支的编码器提取五级金字塔，可在任意级替换下一级的输入。"""
        return self.encoder(branch)(image, stage_inputs=stage_inputs)

    def modulator(self, level: int) -> TemporalModulator | None:
        return None if self.modulators is None else self.modulators[level - 1]

    def guided_pyramid(
        self, frame: torch.Tensor, motion: FeaturePyramid
    ) -> tuple[FeaturePyramid, dict[int, torch.Tensor]]:
        """外观编码，每一级用隐式引导融合后的特征替换下一级输入。

        Returns:
            (外观金字塔 {f_k^A}, 融合特征 {k: f_k^tm})。
        """
        fused: dict[int, torch.Tensor] = {}

        def hook(level: int, f_a: torch.Tensor) -> torch.Tensor:
            fused[level] = implicit_guidance_fuse(f_a, motion[level], self.modulator(level))
            return fused[level]

        pyramid = self.encoder("appearance")(frame, stage_hook=hook)
        return pyramid, fused

    # ------------------------------------------------------------------
    # 分支级前向（分阶段训练也直接调用）
    # ------------------------------------------------------------------
    def teacher_logits(self, flow: torch.Tensor) -> tuple[torch.Tensor, FeaturePyramid]:
        """运动分支：返回步长 8 的 Z^M logits 与运动金字塔。"""
        motion = self.encoder("motion")(flow)
        assert self.teacher_decoder is not None
        return self.teacher_decoder(motion[3], motion[4], motion[5]), motion

    def student_logits(self, frame: torch.Tensor) -> torch.Tensor:
        """外观分支单独前向（+A 语义）：不融合，教学掩码恒为 0。"""
        appearance = self.encoder("appearance")(frame)
        assert self.student_decoder is not None
        return self.student_decoder(appearance[3], appearance[4], appearance[5])

    # ------------------------------------------------------------------
    # 完整前向
    # ------------------------------------------------------------------
    def forward(
        self,
        frame: torch.Tensor | None,
        flow: torch.Tensor | None = None,
        teaching_mask: torch.Tensor | None = None,
    ) -> ModelOutput:
        """按消融模式前向。

        Args:
            frame: (B, 3, S, S) 外观帧；mode 为 M 时可为 None。
            flow: (B, 3, S, S) 光流图像；mode 为 M / MA 时必需。
            teaching_mask: 可选，替换 sigmoid(Z^M) 作为教学掩码（步长 8 分辨率或可
                广播的形状），用于验证教学通路。

        Returns:
            ModelOutput，概率图与 logits 均为输入分辨率。

        Raises:
            InputError: 缺少所需输入，或帧与光流尺寸不一致。
        """
        ab = self.ablation
        if ab.uses_motion and flow is None:
            raise InputError(f"mode={ab.mode} 需要光流输入")
        if ab.uses_appearance and frame is None:
            raise InputError(f"mode={ab.mode} 需要外观帧输入")
        if frame is not None and flow is not None and frame.shape != flow.shape:
            raise InputError(
                f"外观帧 {tuple(frame.shape)} 与光流 {tuple(flow.shape)} 尺寸不一致"
            )
        reference = frame if frame is not None else flow
        assert reference is not None
        size = reference.shape[-2:]

        z_m: torch.Tensor | None = None
        z_a: torch.Tensor | None = None
        if ab.mode == "M":
            z_m, _ = self.teacher_logits(flow)
        elif ab.mode == "A":
            z_a = self.student_logits(frame)
        else:
            z_m, motion = self.teacher_logits(flow)
            _, fused = self.guided_pyramid(frame, motion)
            taught = [fused[k] for k in DECODED_LEVELS]
            if ab.teaching:
                mask = torch.sigmoid(z_m) if teaching_mask is None else teaching_mask
                taught = [explicit_teach(f, mask, k) for f, k in zip(taught, DECODED_LEVELS, strict=True)]
            assert self.student_decoder is not None
            z_a = self.student_decoder(*taught)

        z_a_full = None if z_a is None else resize_to(z_a, size)
        z_m_full = None if z_m is None else resize_to(z_m, size)
        return ModelOutput(
            z_a=None if z_a_full is None else SaliencyMap(torch.sigmoid(z_a_full), "prob"),
            z_m=None if z_m_full is None else SaliencyMap(torch.sigmoid(z_m_full), "prob"),
            z_a_logits=z_a_full,
            z_m_logits=z_m_full,
        )

    # ------------------------------------------------------------------
    # 参数分组
    # ------------------------------------------------------------------
    def submodule_parameters(self, names: tuple[str, ...]) -> list[nn.Parameter]:
        params: list[nn.Parameter] = []
        for name in names:
            module = getattr(self, name)
            if module is not None:
                params.extend(module.parameters())
        return params

    def graph_summary(self) -> dict[str, str]:
        """实际生效的计算图组件，用于消融表与运行清单。"""
        ab = self.ablation
        summary = {"mode": ab.mode}
        for name in ("motion_encoder", "teacher_decoder", "appearance_encoder", "student_decoder"):
            module = getattr(self, name)
            summary[name] = type(module).__name__ if module is not None else "-"
        if ab.mode == "MA":
            summary["fusion"] = "F_TM" if self.modulators is not None else "identity"
            summary["teaching"] = "on" if ab.teaching else "off"
        return summary


def init_parameters(config: ModelConfig, seed: int | None = None) -> GTNet:
    """按配置分配全部可学习参数，给定种子时结果确定。

    使用独立的随机数上下文，不改变调用方的全局随机状态。

    Args:
        config: 模型配置。
        seed: 随机种子，None 时使用 config.seed。

    Returns:
        初始化完成的 GTNet。
    """
    seed = config.seed if seed is None else seed
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return GTNet(config)


def apply_ablation(
    config: ModelConfig, ablation: AblationSpec | str, seed: int | None = None
) -> GTNet:
    """按消融开关（或变体编号）构造实际生效的网络。

    Examples:
        >>> model = apply_ablation(ModelConfig.toy(), "1")
        >>> model.modulators is None
        True
    """
    return init_parameters(config.with_ablation(ablation), seed)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
