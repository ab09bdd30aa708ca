from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class Scaling:
    """Fixed signal normalization applied before models and losses.

    Inputs are divided by ``u_scale`` (the excitation RMS) and outputs are
    multiplied by ``y_scale`` (metres to millimetres by default).
    """

    u_scale: float = 50.0
    y_scale: float = 1000.0

    def __post_init__(self):
        if not (self.u_scale > 0 and self.y_scale > 0):
            raise ValueError("scales must be positive")

    def u(self, u):
        return u / self.u_scale

    def y(self, y):
        return y * self.y_scale

    def y_inverse(self, y_scaled):
        return y_scaled / self.y_scale

    def as_dict(self) -> dict:
        return asdict(self)
