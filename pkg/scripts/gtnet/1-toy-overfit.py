"""
toy GTNet 过拟合冒烟实验。

8 个合成序列（每个 16 帧）上依次训练教师、学生、联合三个阶段，联合阶段不超过
500 步，随后在训练集上评价，期望 MAE < 0.05。损失曲线导出到 outputs/。
tests/test_acceptance.py 以 slow 标记断言同一判据。
"""

import sys
from pathlib import Path

# 添加项目根目录到sys.path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.acceptance import OVERFIT_MAE, toy_overfit
from src.visualize import plot_loss_traces

OUT = project_root / "outputs" / "toy-overfit"

# %%
# ============================================================================
# 1. 合成数据 + 三阶段训练 + 训练集评价
# ============================================================================

result = toy_overfit(OUT)
print(result.report.to_frame().to_string(index=False))

# %%
# ============================================================================
# 2. 损失曲线与判据
# ============================================================================

plot_loss_traces({stage: r.trace for stage, r in result.stages.items()}, OUT / "loss.png")

if result.passed:
    print(f"✓ 训练集 MAE = {result.mae:.4f} < {OVERFIT_MAE}")
else:
    print(f"✗ 训练集 MAE = {result.mae:.4f}，未达到 {OVERFIT_MAE}")
