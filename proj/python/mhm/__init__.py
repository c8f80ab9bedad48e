"""Attentive one-dimensional heatmap regression for landmark detection."""

from ._mhm import (
    ConfigError,
    Detector,
    ShapeError,
    TrainingError,
    analyze_quant,
    decode_argmax,
    encode1d,
    encode2d,
    generate_clip,
    generate_scene,
    marginalize,
    nrmse,
    output_size,
    quantization_error,
    quantize,
    recover,
)

__all__ = [
    "ConfigError",
    "Detector",
    "ShapeError",
    "TrainingError",
    "analyze_quant",
    "decode_argmax",
    "encode1d",
    "encode2d",
    "generate_clip",
    "generate_scene",
    "marginalize",
    "nrmse",
    "output_size",
    "quantization_error",
    "quantize",
    "recover",
]
