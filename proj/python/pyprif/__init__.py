"""Primary ray-based implicit functions."""

from ._prif import (
    Model,
    PrifError,
    cast_rays,
    chamfer,
    icosphere,
    load_mesh,
    normalize,
    perpendicular_foot,
    rig_rays,
    run_cli,
    set_threads,
    signed_displacement,
)

__all__ = [
    "Model",
    "PrifError",
    "cast_rays",
    "chamfer",
    "icosphere",
    "load_mesh",
    "normalize",
    "perpendicular_foot",
    "rig_rays",
    "run_cli",
    "set_threads",
    "signed_displacement",
]
