"""训练：深度监督损失、学习率调度、三阶段训练流程"""
