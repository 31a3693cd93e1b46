"""One-dimensional laws on the half-line used for the diagonal component."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import StructuralError

_KINDS = ("exp", "halfnormal", "point")


@dataclass(frozen=True)
class DiagonalLaw:
    """``exp:<mean>``, ``halfnormal:<scale>`` or ``point:<value>``."""

    kind: str = "exp"
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise StructuralError(f"unknown law {self.kind!r}; expected one of {_KINDS}")
        if self.scale < 0 or (self.kind != "point" and self.scale == 0):
            raise StructuralError(f"bad scale {self.scale} for law {self.kind}")

    @classmethod
    def parse(cls, text: str) -> DiagonalLaw:
        kind, _, value = text.partition(":")
        try:
            scale = float(value) if value else 1.0
        except ValueError:
            raise StructuralError(f"bad law {text!r}; expected kind:scale") from None
        return cls(kind.strip(), scale)

    def __str__(self) -> str:
        return f"{self.kind}:{self.scale!r}"

    @property
    def full_support(self) -> bool:
        """True when every open subinterval of (0, inf) has positive mass."""
        return self.kind != "point"

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == "exp":
            return rng.exponential(self.scale, size)
        if self.kind == "halfnormal":
            return np.abs(rng.normal(0.0, self.scale, size))
        return np.full(size, self.scale) if size is not None else self.scale

    def frozen(self):
        """The matching scipy.stats distribution (continuous kinds only)."""
        if self.kind == "exp":
            return stats.expon(scale=self.scale)
        if self.kind == "halfnormal":
            return stats.halfnorm(scale=self.scale)
        raise StructuralError("a point mass has no continuous distribution")

    def cdf(self, x):
        if self.kind == "point":
            return np.where(np.asarray(x) >= self.scale, 1.0, 0.0)
        return self.frozen().cdf(x)


EXP1 = DiagonalLaw("exp", 1.0)
ZERO = DiagonalLaw("point", 0.0)
