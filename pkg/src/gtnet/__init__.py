"""GTNet 网络结构：双分支编码器、时间调制器、部分解码器与整体装配"""
