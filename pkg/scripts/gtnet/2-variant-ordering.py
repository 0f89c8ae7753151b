"""
+M / +A / +M+A 三种分支模式的排序检查。

在含静止干扰目标与移动背景杂斑的合成数据上，用同一个种子分别训练三种模式，
在独立的测试划分上比较。期望 F(+M+A) > max(F(+M), F(+A)) 且
MAE(+M+A) < min(MAE(+M), MAE(+A))。单次运行，种子固定。
tests/test_acceptance.py 以 slow 标记断言同一判据。
"""

import sys
from pathlib import Path

# 添加项目根目录到sys.path
project_root = Path(__file__).parent.parent.parent
sys.path.insert(0, str(project_root))

from src.acceptance import variant_ordering

OUT = project_root / "outputs" / "variant-ordering"

# %%
# ============================================================================
# 1. 含干扰的合成数据上分别训练三种模式并评价
# ============================================================================

result = variant_ordering(OUT)

# %%
# ============================================================================
# 2. 排序检查
# ============================================================================

rows = result.table.set_index(result.table["variant"].astype(str))
f, mae = rows["test_f_beta"], rows["test_mae"]
print(f"{'✓' if result.f_ordered else '⚠'} F:   +M={f['M']:.4f}  +A={f['A']:.4f}  +M+A={f['MA']:.4f}")
print(f"{'✓' if result.mae_ordered else '⚠'} MAE: +M={mae['M']:.4f}  +A={mae['A']:.4f}  +M+A={mae['MA']:.4f}")
