__all__ = ["arrivals", "core", "model", "optimizer", "simulator", "streams", "units"]

import jax

# The stationary analysis and the LP checks hold to 1e-12, which is
# out of reach in single precision.
jax.config.update("jax_enable_x64", True)

from encrelay import (  # noqa: E402
    arrivals as arrivals,
    core as core,
    model as model,
    optimizer as optimizer,
    simulator as simulator,
    streams as streams,
    units as units,
)
from encrelay.encrelay_version import __version__ as __version__  # noqa: E402
