"""Degraded infrared/visible image fusion — Python bindings."""

# The extension links against libtorch from the torch wheel; importing torch
# first loads those shared libraries into the process.
import torch  # noqa: F401

try:
    from . import _ddfusion as _ext
except ImportError:
    # development layout: extension built by CMake, found via PYTHONPATH
    import _ddfusion as _ext

__all__ = [
    "add_gaussian_noise",
    "add_stripe_noise",
    "ag",
    "darken",
    "dct2",
    "default_config_json",
    "ei",
    "fuse",
    "fusion_vif",
    "idct2",
    "qabf",
    "qw",
    "retinex_decompose",
    "rgb_to_y",
    "sf",
    "split_frequency",
    "vif",
]

for _name in __all__:
    globals()[_name] = getattr(_ext, _name)
del _name
