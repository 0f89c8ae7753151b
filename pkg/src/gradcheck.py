"""有限差分梯度检验（toy 档位，双精度）

四个参数组各随机抽取若干个参数元素，比较自动微分梯度与数值梯度：
    backbone   外观编码器，L = Σ_k Σ(f_k ⊙ R_k)
    modulator  五级时间调制器 + 隐式融合，L = Σ_k Σ(f_k^tm ⊙ R_k)
    decoder    教师部分解码器，L = Σ(Z ⊙ R)
    gtnet      完整网络，L = Σ Z^A logits + Σ Z^M logits
R 为固定的随机投影，避免求和后梯度相互抵消。

抽样在各子模块之间轮转，小模块也能被抽到。扰动区间跨过 max / ReLU 切换点的样本会被
重新抽取，其数量记录在报告中。数值导数默认用 Richardson 外推，也可以改用普通中心差分。
"""

from collections.abc import Callable, Hashable
from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd
import torch
import torch.nn.functional as F
from torch import nn

from config.model_config import ModelConfig
from src.errors import ConfigError
from src.gtnet.gtnet import GTNet, init_parameters
from src.gtnet.modulator import ChannelAttention, SpatialAttention, implicit_guidance_fuse
from src.numerical import kink_aware_difference, relative_error

GROUPS: tuple[str, ...] = ("backbone", "modulator", "decoder", "gtnet")

# 相对误差分母的下限，量级低于它的梯度按绝对误差比较
GRAD_FLOOR = 1e-5

# richardson: (4·D(h/2) - D(h)) / 3；central: 直接取 D(h)
Estimator = Literal["richardson", "central"]
ESTIMATORS: tuple[str, ...] = ("richardson", "central")

# (参数组名, {参数名: 梯度}) -> 替换后的梯度字典；测试中用于注入错误梯度
GradHook = Callable[[str, dict[str, torch.Tensor]], dict[str, torch.Tensor] | None]


@dataclass
class GradcheckReport:
    """梯度检验报告。

    Attributes:
        table: 每组一行，列为 module, samples, resampled, submodules,
            max_rel_error, worst_parameter, passed。
        tolerance: 相对误差阈值。
        step: 差分步长。
    """

    table: pd.DataFrame
    tolerance: float
    step: float

    @property
    def passed(self) -> bool:
        return bool(self.table["passed"].all())

    def failed_groups(self) -> list[str]:
        return self.table.loc[~self.table["passed"], "module"].tolist()


class SwitchProbe:
    """记录 max / ReLU 选择模式的前向钩子。

    每次前向开始前调用 reset()，前向后 pattern() 返回所有钩子记录的模式。
    """

    def __init__(self, model: nn.Module):
        self._records: list[bytes] = []
        self._handles = []
        for module in model.modules():
            if isinstance(module, ChannelAttention):
                self._handles.append(module.register_forward_hook(self._channel_hook))
            elif isinstance(module, SpatialAttention):
                self._handles.append(module.register_forward_hook(self._spatial_hook))
            elif isinstance(module, nn.ReLU):
                self._handles.append(module.register_forward_hook(self._relu_hook))

    def _channel_hook(self, module: ChannelAttention, inputs, output) -> None:
        x = inputs[0]
        pooled, indices = F.adaptive_max_pool2d(x, 1, return_indices=True)
        hidden = module.fc1(pooled.flatten(1)) > 0
        self._records += [indices.cpu().numpy().tobytes(), hidden.cpu().numpy().tobytes()]

    def _spatial_hook(self, module: SpatialAttention, inputs, output) -> None:
        self._records.append(inputs[0].argmax(dim=1).cpu().numpy().tobytes())

    def _relu_hook(self, module: nn.ReLU, inputs, output) -> None:
        self._records.append((inputs[0] > 0).cpu().numpy().tobytes())

    def reset(self) -> None:
        self._records = []

    def pattern(self) -> Hashable:
        return tuple(self._records)

    def remove(self) -> None:
        for handle in self._handles:
            handle.remove()


def _projections(tensors: list[torch.Tensor], generator: torch.Generator) -> list[torch.Tensor]:
    return [torch.randn(t.shape, generator=generator, dtype=torch.float64) for t in tensors]


def _group_losses(
    model: GTNet, config: ModelConfig, generator: torch.Generator
) -> dict[str, tuple[nn.Module, Callable[[], torch.Tensor]]]:
    """每个参数组的 (被检验模块, 无参损失函数)。"""
    size = config.input_size
    def rand(*shape: int) -> torch.Tensor:
        return torch.rand(*shape, generator=generator, dtype=torch.float64)

    frame, flow = rand(1, 3, size, size), rand(1, 3, size, size)
    shapes = config.pyramid_shapes()

    encoder = model.appearance_encoder
    assert encoder is not None
    with torch.no_grad():
        enc_proj = _projections(list(encoder(frame).levels), generator)

    def backbone_loss() -> torch.Tensor:
        levels = encoder(frame).levels
        return sum((f * r).sum() for f, r in zip(levels, enc_proj, strict=True))

    feats_a = [rand(1, *s) - 0.5 for s in shapes]
    feats_m = [rand(1, *s) - 0.5 for s in shapes]
    mod_proj = _projections(feats_a, generator)
    modulators = model.modulators
    assert modulators is not None

    def modulator_loss() -> torch.Tensor:
        total = torch.zeros((), dtype=torch.float64)
        for k in range(5):
            fused = implicit_guidance_fuse(feats_a[k], feats_m[k], modulators[k])
            total = total + (fused * mod_proj[k]).sum()
        return total

    decoder = model.teacher_decoder
    assert decoder is not None
    top = [rand(1, *shapes[k - 1]) - 0.5 for k in (3, 4, 5)]
    with torch.no_grad():
        dec_proj = _projections([decoder(*top)], generator)[0]

    def decoder_loss() -> torch.Tensor:
        return (decoder(*top) * dec_proj).sum()

    def gtnet_loss() -> torch.Tensor:
        out = model(frame, flow)
        return out.z_a_logits.sum() + out.z_m_logits.sum()

    return {
        "backbone": (encoder, backbone_loss),
        "modulator": (modulators, modulator_loss),
        "decoder": (decoder, decoder_loss),
        "gtnet": (model, gtnet_loss),
    }


def submodule_strata(module: nn.Module) -> dict[str, list[tuple[str, nn.Parameter]]]:
    """按子模块把可训练参数分层。

    层为 module 的直接子模块；ModuleList / ModuleDict 再展开一级，
    如 stages.0、modulators.3、rfb.5。module 自身的参数单独成层。没有可训练参数的层被略去。
    """
    children: list[tuple[str, nn.Module]] = []
    for name, child in module.named_children():
        if isinstance(child, (nn.ModuleList, nn.ModuleDict)):
            children += [(f"{name}.{sub}", grandchild) for sub, grandchild in child.named_children()]
        else:
            children.append((name, child))

    strata: dict[str, list[tuple[str, nn.Parameter]]] = {}
    own = [(n, p) for n, p in module.named_parameters(recurse=False) if p.requires_grad]
    if own:
        strata[""] = own
    for name, child in children:
        members = [(f"{name}.{n}", p) for n, p in child.named_parameters() if p.requires_grad]
        if members:
            strata[name] = members
    return strata


def _draw(
    named: list[tuple[str, nn.Parameter]], generator: torch.Generator
) -> tuple[str, nn.Parameter, tuple[int, ...]]:
    """在一层之内按元素个数加权抽取一个参数元素。"""
    offsets = np.cumsum([p.numel() for _, p in named])
    flat = int(torch.randint(int(offsets[-1]), (1,), generator=generator))
    which = int(np.searchsorted(offsets, flat, side="right"))
    name, param = named[which]
    local = flat - (int(offsets[which - 1]) if which > 0 else 0)
    index = tuple(int(i) for i in np.unravel_index(local, tuple(param.shape)))
    return name, param, index


def check_group(
    name: str,
    module: nn.Module,
    loss_fn: Callable[[], torch.Tensor],
    samples: int,
    step: float,
    tolerance: float,
    generator: torch.Generator,
    grad_hook: GradHook | None = None,
    estimator: Estimator = "richardson",
    floor: float = GRAD_FLOOR,
) -> dict[str, object]:
    """检验单个参数组，返回报告中的一行。

    抽样在顶层子模块之间轮转，每层都会被抽到（samples 不少于层数时）；
    跨过切换点的样本在同一层内重新抽取。
    """
    named = [(n, p) for n, p in module.named_parameters() if p.requires_grad]
    params = [p for _, p in named]
    loss = loss_fn()
    grads = dict(zip((n for n, _ in named), torch.autograd.grad(loss, params), strict=True))
    if grad_hook is not None:
        grads = grad_hook(name, grads) or grads

    probe = SwitchProbe(module)

    def probed_loss() -> torch.Tensor:
        probe.reset()
        return loss_fn()

    strata = list(submodule_strata(module).items())
    covered: set[str] = set()
    worst, worst_param, checked, resampled = 0.0, "", 0, 0
    try:
        for _ in range(20 * samples):
            if checked == samples:
                break
            stratum, members = strata[checked % len(strata)]
            pname, param, index = _draw(members, generator)
            numeric, smooth = kink_aware_difference(
                probed_loss, param, index, step, probe.pattern, extrapolate=estimator == "richardson"
            )
            if not smooth:
                resampled += 1
                continue
            err = relative_error(grads[pname][index].item(), numeric, floor=floor)
            checked += 1
            covered.add(stratum)
            if err > worst:
                worst, worst_param = err, f"{pname}{list(index)}"
    finally:
        probe.remove()
    return {
        "module": name,
        "samples": checked,
        "resampled": resampled,
        "submodules": len(covered),
        "max_rel_error": worst,
        "worst_parameter": worst_param,
        "passed": checked == samples and worst < tolerance,
    }


def run_gradcheck(
    config: ModelConfig | None = None,
    samples: int = 32,
    step: float = 1e-3,
    tolerance: float = 1e-4,
    seed: int = 0,
    groups: tuple[str, ...] = GROUPS,
    grad_hook: GradHook | None = None,
    estimator: Estimator = "richardson",
    floor: float = GRAD_FLOOR,
    verbose: bool = True,
) -> GradcheckReport:
    """对 toy 档位的完整 GTNet 做有限差分梯度检验。

    Args:
        config: 模型配置，必须为 toy 档位且为完整 MA 模型；None 时使用 ModelConfig.toy()。
        samples: 每组抽样的参数元素个数。
        step: 差分步长 h。
        tolerance: 通过阈值（最大相对误差）。
        seed: 参数初始化与抽样的种子。
        groups: 需要检验的参数组。
        grad_hook: 可选，篡改自动微分梯度（故障注入）。
        estimator: 数值导数的估计方式；central 为不外推的普通中心差分。
        floor: 相对误差分母的下限。
        verbose: 是否打印报告。

    Returns:
        GradcheckReport，每组一行。

    Raises:
        ConfigError: 非 toy 档位，或消融变体缺少被检验的子模块。
    """
    config = ModelConfig.toy() if config is None else config
    if config.profile != "toy":
        raise ConfigError(f"梯度检验只在 toy 档位上运行，收到 profile={config.profile}")
    if config.ablation.mode != "MA" or not config.ablation.uses_modulator:
        raise ConfigError("梯度检验需要包含时间调制器的完整双分支模型")
    unknown = sorted(set(groups) - set(GROUPS))
    if unknown:
        raise ConfigError(f"未知的参数组: {unknown}")
    if estimator not in ESTIMATORS:
        raise ConfigError(f"未知的数值导数估计方式: {estimator}")

    model = init_parameters(config, seed).double()
    model.eval()
    generator = torch.Generator().manual_seed(seed)
    losses = _group_losses(model, config, generator)
    rows = []
    for name in groups:
        module, loss_fn = losses[name]
        rows.append(
            check_group(
                name, module, loss_fn, samples, step, tolerance, generator, grad_hook, estimator, floor
            )
        )
        if verbose:
            row = rows[-1]
            mark = "✓" if row["passed"] else "✗"
            print(
                f"{mark} {name:<10} max_rel_error={row['max_rel_error']:.3e}  "
                f"samples={row['samples']}  resampled={row['resampled']}  "
                f"submodules={row['submodules']}"
            )
    report = GradcheckReport(table=pd.DataFrame(rows), tolerance=tolerance, step=step)
    if verbose:
        print("✓ 梯度检验通过" if report.passed else f"✗ 梯度检验失败: {report.failed_groups()}")
    return report
