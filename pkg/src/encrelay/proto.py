__all__ = ["ArrivalModel"]

from typing import Any, Optional, Protocol

import numpy as np

from encrelay.streams import RandomStream


class ArrivalModel(Protocol):
    """An interface for the i.i.d. inter-arrival gap law of one source"""

    @property
    def kind(self) -> str: ...

    def mean_gap(self) -> float: ...

    def draw(self, stream: RandomStream) -> float: ...

    def draws(self, stream: RandomStream, n: int) -> np.ndarray: ...

    def laplace(self, s: float) -> float: ...

    def laplace_complement(self, s: float) -> float: ...

    def pdf(self, t: np.ndarray) -> Optional[np.ndarray]: ...

    def support(self) -> tuple[float, float]: ...

    def to_dict(self) -> dict[str, Any]: ...
