from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import UnsupportedError

WINOGRAD_TILES = (2, 6)


@dataclass(frozen=True)
class AlgorithmVariant:
    """Kernel implementation choice plus its parameters.

    Use the constructors rather than the raw fields::

        AlgorithmVariant.tiled(4, 3)
        AlgorithmVariant.strassen(cutoff=8)
        AlgorithmVariant.winograd(2)
    """

    kind: str = "direct"
    t_e: int | None = None
    t_b: int | None = None
    cutoff: int | None = None
    m: int | None = None

    def __post_init__(self):
        if self.kind == "direct":
            return
        if self.kind == "tiled":
            if not (isinstance(self.t_e, int) and isinstance(self.t_b, int)) or self.t_e < 1 or self.t_b < 1:
                raise UnsupportedError(f"tiled needs t_e, t_b >= 1, got ({self.t_e}, {self.t_b})")
        elif self.kind == "strassen":
            c = self.cutoff
            if not isinstance(c, int) or c < 1 or c & (c - 1):
                raise UnsupportedError(f"strassen cutoff must be a power of two >= 1, got {c}")
        elif self.kind == "winograd":
            if self.m not in WINOGRAD_TILES:
                raise UnsupportedError(f"winograd output tile must be one of {WINOGRAD_TILES}, got {self.m}")
        else:
            raise UnsupportedError(f"unknown algorithm kind {self.kind!r}")

    @classmethod
    def direct(cls) -> AlgorithmVariant:
        return cls()

    @classmethod
    def tiled(cls, t_e: int, t_b: int) -> AlgorithmVariant:
        return cls("tiled", t_e=int(t_e), t_b=int(t_b))

    @classmethod
    def strassen(cls, cutoff: int) -> AlgorithmVariant:
        return cls("strassen", cutoff=int(cutoff))

    @classmethod
    def winograd(cls, m: int) -> AlgorithmVariant:
        return cls("winograd", m=int(m))

    @classmethod
    def parse(cls, text: str) -> AlgorithmVariant:
        match = re.fullmatch(r"\s*(\w+)\s*(?:\(([\d,\s]*)\))?\s*", text)
        if not match:
            raise UnsupportedError(f"cannot parse algorithm variant {text!r}")
        kind, args = match.group(1), match.group(2)
        nums = [int(a) for a in args.split(",") if a.strip()] if args else []
        if kind == "direct" and not nums:
            return cls.direct()
        if kind == "tiled" and len(nums) == 2:
            return cls.tiled(*nums)
        if kind == "strassen" and len(nums) == 1:
            return cls.strassen(nums[0])
        if kind == "winograd" and len(nums) == 1:
            return cls.winograd(nums[0])
        raise UnsupportedError(f"cannot parse algorithm variant {text!r}")

    def __str__(self):
        if self.kind == "tiled":
            return f"tiled({self.t_e},{self.t_b})"
        if self.kind == "strassen":
            return f"strassen({self.cutoff})"
        if self.kind == "winograd":
            return f"winograd({self.m})"
        return "direct"


DIRECT = AlgorithmVariant.direct()


class MulCounter:
    """Tally of scalar multiplications actually performed by a kernel."""

    def __init__(self):
        self.count = 0

    def add(self, n: int):
        self.count += int(n)

    def __repr__(self):
        return f"MulCounter({self.count})"
