"""数据：光流图像编解码、数据集目录读取、合成运动目标视频生成"""
