from typing import Any

# jax/numpy arrays and jpu quantities, as accepted by the public functions
Array = Any
Quantity = Any
