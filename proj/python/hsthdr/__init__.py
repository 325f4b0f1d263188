"""Ghost-free HDR fusion toolkit: radiometric lifting, structure-tensor
maps, the hybrid conv/window-attention model, metrics and the sequential
fusion pipeline, backed by the C++ core."""

from hsthdr._core import (
    HstError,
    NetConfig,
    Params,
    build_stack,
    expected_param_count,
    forward,
    fuse_pair,
    fuse_sequence,
    grad_check,
    gradient_magnitude_map,
    init_params,
    ldr_to_hdr,
    load_hdr,
    load_ldr,
    load_params,
    loss,
    luminance,
    psnr_l,
    psnr_mu,
    save_hdr,
    select_reference,
    st_map,
    synth_scene,
    tiny_config,
    tonemap_mu,
    train_toy,
)

__version__ = "0.1.0"

__all__ = [
    "HstError",
    "NetConfig",
    "Params",
    "build_stack",
    "expected_param_count",
    "forward",
    "fuse_pair",
    "fuse_sequence",
    "grad_check",
    "gradient_magnitude_map",
    "init_params",
    "ldr_to_hdr",
    "load_hdr",
    "load_ldr",
    "load_params",
    "loss",
    "luminance",
    "psnr_l",
    "psnr_mu",
    "save_hdr",
    "select_reference",
    "st_map",
    "synth_scene",
    "tiny_config",
    "tonemap_mu",
    "train_toy",
]
