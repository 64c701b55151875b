"""Layers, optimizer and schedules."""
from cife.nn.layers import LinearLayer, Mlp, init_parameters
from cife.nn.optim import SgdMomentum, sgd_step
from cife.nn.schedules import lambda_d_schedule, lr_schedule, progress

__all__ = [
    "LinearLayer",
    "Mlp",
    "init_parameters",
    "SgdMomentum",
    "sgd_step",
    "lambda_d_schedule",
    "lr_schedule",
    "progress",
]
