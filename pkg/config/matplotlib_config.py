"""matplotlib 配置：无界面后端、中文字体、可复现的 PNG 导出"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

# 去掉 PNG 元数据中的版本信息，保证相同输入导出逐字节一致
PNG_METADATA = {"Software": None}


def setup_chinese_fonts():
    """配置matplotlib支持中文显示"""
    plt.rcParams["font.sans-serif"] = [
        "Microsoft JhengHei",
        "Microsoft YaHei",
        "SimHei",
        "SimSun",
        "DejaVu Sans",
    ]
    plt.rcParams["axes.unicode_minus"] = False


def setup_matplotlib():
    """对比图导出前调用：中文字体 + 固定的导出参数，避免输出随进程变化。"""
    setup_chinese_fonts()
    plt.rcParams["svg.hashsalt"] = "gtnet"
    plt.rcParams["path.simplify"] = False
    plt.rcParams["savefig.dpi"] = 100
