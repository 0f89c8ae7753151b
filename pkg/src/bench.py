"""推理速度测量

只计时网络前向（光流图像作为已知输入给出，不计光流估计时间），
预热迭代不计入统计。结果仅作记录，不作为通过条件。
"""

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from src.gtnet.gtnet import GTNet, count_parameters


@dataclass
class BenchReport:
    """吞吐量报告。

    Attributes:
        size: 输入边长。
        warmup: 预热迭代次数（不计入）。
        latencies: 每次计时迭代的耗时（秒）。
        parameters: 模型参数量。
        device: 设备名。
    """

    size: int
    warmup: int
    latencies: list[float] = field(default_factory=list)
    parameters: int = 0
    device: str = "cpu"

    @property
    def mean(self) -> float:
        return float(np.mean(self.latencies))

    @property
    def std(self) -> float:
        return float(np.std(self.latencies))

    @property
    def fps(self) -> float:
        return 1.0 / self.mean

    def to_dict(self) -> dict[str, object]:
        return {
            "size": self.size,
            "iterations": len(self.latencies),
            "warmup": self.warmup,
            "mean_latency_s": self.mean,
            "std_latency_s": self.std,
            "fps": self.fps,
            "parameters": self.parameters,
            "device": self.device,
            "latencies_s": self.latencies,
        }


def run_bench(
    model: GTNet,
    size: int | None = None,
    iterations: int = 10,
    warmup: int = 3,
    device: str = "cpu",
    seed: int = 0,
    verbose: bool = True,
) -> BenchReport:
    """测量单帧推理延迟。

    Args:
        model: 待测模型。
        size: 输入边长，None 时使用模型配置的 input_size。
        iterations: 计时迭代次数。
        warmup: 预热迭代次数。
        device: torch 设备名。
        seed: 随机输入的种子。
        verbose: 是否打印结果。

    Returns:
        BenchReport，latencies 恰有 iterations 个样本。
    """
    size = model.config.input_size if size is None else size
    generator = torch.Generator().manual_seed(seed)
    frame = torch.rand(1, 3, size, size, generator=generator).to(device)
    flow = torch.rand(1, 3, size, size, generator=generator).to(device)
    model = model.to(device).eval()
    report = BenchReport(size=size, warmup=warmup, parameters=count_parameters(model), device=device)

    with torch.inference_mode():
        for i in range(warmup + iterations):
            if device.startswith("cuda"):
                torch.cuda.synchronize()
            start = time.perf_counter()
            model(frame, flow)
            if device.startswith("cuda"):
                torch.cuda.synchronize()
            elapsed = time.perf_counter() - start
            if i >= warmup:
                report.latencies.append(elapsed)

    if verbose:
        print(
            f"✓ {size}×{size}  平均延迟 {report.mean * 1e3:.2f} ms ± {report.std * 1e3:.2f} ms  "
            f"({report.fps:.1f} fps, {report.parameters} 参数)"
        )
    return report
