"""双分支视频显著性目标检测（GTNet 结构）的参考实现"""

__version__ = "0.1.0"
