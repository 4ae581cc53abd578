"""Differentiable fitting of light parameters to rendered or observed targets."""

from .adam import Adam, DescentTracker, DivergenceError, OptimConfig
from .fit import fit_window
from .gradients import (
    PARAM_KEYS,
    NonFiniteGradientError,
    direct_l1_loss_fn,
    flatten,
    grad,
    light_param_values,
    render_direct_torch,
    render_plans,
)
from .losses import (
    LossWeights,
    chamfer_rmse,
    loss_geo,
    loss_geo_terms,
    loss_render_direct,
    loss_src,
    sig_loss,
    surface_point_cloud,
)
from .refine import refine_lights

__all__ = [
    "Adam",
    "DescentTracker",
    "DivergenceError",
    "LossWeights",
    "NonFiniteGradientError",
    "OptimConfig",
    "PARAM_KEYS",
    "chamfer_rmse",
    "direct_l1_loss_fn",
    "fit_window",
    "flatten",
    "grad",
    "light_param_values",
    "loss_geo",
    "loss_geo_terms",
    "loss_render_direct",
    "loss_src",
    "refine_lights",
    "render_direct_torch",
    "render_plans",
    "sig_loss",
    "surface_point_cloud",
]
