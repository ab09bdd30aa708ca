"""Named-block layouts for flat parameter vectors."""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Mapping

import numpy as np

from ..errors import DimensionMismatchError


@dataclass(frozen=True)
class Segment:
    name: str
    shape: tuple[int, ...]
    start: int
    bias: bool = False

    @property
    def size(self) -> int:
        return prod(self.shape)

    @property
    def stop(self) -> int:
        return self.start + self.size


class ParamLayout:
    """Ordered, contiguous segments covering ``[0, size)``.

    Blocks are stored row-major. ``unflatten`` only slices and reshapes, so
    it works on numpy and JAX arrays alike.
    """

    def __init__(self, blocks: Iterable[tuple]):
        segments = []
        start = 0
        for block in blocks:
            name, shape = block[0], tuple(int(s) for s in block[1])
            bias = bool(block[2]) if len(block) > 2 else False
            seg = Segment(name, shape, start, bias)
            segments.append(seg)
            start = seg.stop
        names = [s.name for s in segments]
        if len(set(names)) != len(names):
            raise ValueError("duplicate segment names")
        self.segments: tuple[Segment, ...] = tuple(segments)
        self._by_name = {s.name: s for s in segments}
        self.size = start

    def __getitem__(self, name: str) -> Segment:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def __eq__(self, other) -> bool:
        return isinstance(other, ParamLayout) and self.segments == other.segments

    def __hash__(self) -> int:
        return hash(self.segments)

    def __repr__(self) -> str:
        return f"ParamLayout(size={self.size}, blocks={[s.name for s in self.segments]})"

    def _check(self, flat):
        if flat.shape[-1] != self.size:
            raise DimensionMismatchError(f"parameter vector has {flat.shape[-1]} entries, layout needs {self.size}")

    def unflatten(self, flat) -> dict:
        self._check(flat)
        return {s.name: flat[s.start:s.stop].reshape(s.shape) for s in self.segments}

    def flatten(self, blocks: Mapping) -> np.ndarray:
        if set(blocks) != set(self._by_name):
            raise DimensionMismatchError("block names do not match the layout")
        out = np.empty(self.size)
        for s in self.segments:
            b = np.asarray(blocks[s.name], dtype=float)
            if b.shape != s.shape:
                raise DimensionMismatchError(f"block {s.name!r} has shape {b.shape}, expected {s.shape}")
            out[s.start:s.stop] = b.reshape(-1)
        return out

    def bias_mask(self) -> np.ndarray:
        mask = np.zeros(self.size, dtype=bool)
        for s in self.segments:
            if s.bias:
                mask[s.start:s.stop] = True
        return mask

    def to_table(self) -> list[dict]:
        return [{"name": s.name, "shape": list(s.shape), "start": s.start, "bias": s.bias}
                for s in self.segments]

    @classmethod
    def from_table(cls, table: list[dict]) -> ParamLayout:
        layout = cls((row["name"], row["shape"], row.get("bias", False)) for row in table)
        for row, seg in zip(table, layout.segments):
            if int(row["start"]) != seg.start:
                raise DimensionMismatchError(f"segment {seg.name!r} is not contiguous")
        return layout
