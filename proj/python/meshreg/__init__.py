"""Mesh-based deformable image registration.

Images are (height, width) float64 arrays, node displacements (n, 2) arrays
and dense fields (2, height, width) arrays holding ux then uy.
"""

from ._core import (
    ConfigError,
    DivergenceError,
    GeometryError,
    IoError,
    Mesh,
    delaunay,
    densify,
    energy,
    energy_gradient,
    generate_mesh,
    load_image,
    load_mesh,
    matched_pixel_passes,
    msd,
    read_field,
    register,
    register_pixelwise,
    sample,
    save_image,
    smooth_displacement,
    textured_image,
    warp,
    write_field,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DivergenceError",
    "GeometryError",
    "IoError",
    "Mesh",
    "delaunay",
    "densify",
    "energy",
    "energy_gradient",
    "generate_mesh",
    "load_image",
    "load_mesh",
    "matched_pixel_passes",
    "msd",
    "read_field",
    "register",
    "register_pixelwise",
    "sample",
    "save_image",
    "smooth_displacement",
    "textured_image",
    "warp",
    "write_field",
]
