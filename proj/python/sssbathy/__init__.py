"""Sidescan bathymetry reconstruction: geometry, fusion, metrics and the CLI."""

import json
import sys

from ._sssbathy import (
    DomainError,
    ParameterError,
    __version__,
    backproject,
    bin_to_slant_range,
    calibration,
    fuse,
    generate_heightfield,
    grazing_angle,
    grid_mae,
    ground_range,
    laplace_nll,
    masked_mae,
    read_raster,
    slant_range,
)
from ._sssbathy import default_config as _default_config
from ._sssbathy import run_cli as _run_cli


def default_config():
    """Default experiment configuration as a dict."""
    return json.loads(_default_config())


def run(*args):
    """Run a CLI subcommand in-process, e.g. run("scene", "--out", "d"). Returns the exit code."""
    return _run_cli(["sssbathy", *map(str, args)])


def main():
    sys.exit(run(*sys.argv[1:]))


__all__ = [
    "DomainError",
    "ParameterError",
    "__version__",
    "backproject",
    "bin_to_slant_range",
    "calibration",
    "default_config",
    "fuse",
    "generate_heightfield",
    "grazing_angle",
    "grid_mae",
    "ground_range",
    "laplace_nll",
    "main",
    "masked_mae",
    "read_raster",
    "run",
    "slant_range",
]
