from encrelay.units.decorator import (
    array_magnitude as array_magnitude,
    magnitude as magnitude,
    quantity_input as quantity_input,
)
from encrelay.units.registry import unit_registry as unit_registry
