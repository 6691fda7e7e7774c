from __future__ import annotations

from typing import TypeAlias, Callable, Generator, Union, TYPE_CHECKING

import numpy as np
import numpy.typing as npt

if TYPE_CHECKING:
    from .core import ConditioningContext

# A bunch of type aliases for mypy
FloatArray: TypeAlias = npt.NDArray[np.float64]
SignArray: TypeAlias = npt.NDArray[np.int8]
IndexArray: TypeAlias = npt.NDArray[np.int64]
RealLike: TypeAlias = Union[float, FloatArray]

OutcomeFn: TypeAlias = Callable[[float, FloatArray], SignArray]
DensityFn: TypeAlias = Callable[[FloatArray, "ConditioningContext"], FloatArray]
CorrelationFn: TypeAlias = Callable[[float, float], float]
BreakpointFn: TypeAlias = Callable[[float], tuple[float, ...]]
ContextPointFn: TypeAlias = Callable[["ConditioningContext"], tuple[float, ...]]
# uniforms in [0, 1), per-draw conditioning angle -> lambda
InverseSampler: TypeAlias = Callable[[FloatArray, FloatArray], FloatArray]
Integrand: TypeAlias = Callable[[FloatArray], FloatArray]
SpanGenerator: TypeAlias = Generator[tuple[int, int, int], None, None]
Settings4: TypeAlias = tuple[float, float, float, float]


# Re-export the names
__all__ = [
    "FloatArray",
    "SignArray",
    "IndexArray",
    "RealLike",
    "OutcomeFn",
    "DensityFn",
    "CorrelationFn",
    "BreakpointFn",
    "ContextPointFn",
    "InverseSampler",
    "Integrand",
    "SpanGenerator",
    "Settings4",
]
