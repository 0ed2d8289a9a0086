"""Python bindings for the SSFormer C++ core."""

from ._core import (
    Element,
    Error,
    Model,
    combined_loss,
    dice_iou,
    dilate,
    erode,
    gradcheck,
    render_config,
    synth_dataset,
    train,
)

__all__ = [
    "Element",
    "Error",
    "Model",
    "combined_loss",
    "dice_iou",
    "dilate",
    "erode",
    "gradcheck",
    "render_config",
    "synth_dataset",
    "train",
]
