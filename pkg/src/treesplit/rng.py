"""Seeded random source for walks.

Every sampler takes a :class:`WalkRng`.  The bit generator is numpy's PCG64,
seeded through ``SeedSequence(seed, spawn_key=(stream,))`` so that a
``(seed, stream)`` pair fixes the whole trajectory.  Draws are served from
pre-generated blocks because the walk loops consume one direction per step.
"""

from __future__ import annotations

import numpy as np

RNG_ALGORITHM = "PCG64/SeedSequence v1"

_DIR_BLOCK = 1 << 16
_FLOAT_BLOCK = 1 << 12


class WalkRng:
    __slots__ = ("seed", "stream", "_gen", "_dbuf", "_dpos", "_fbuf", "_fpos")

    def __init__(self, seed: int = 0, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self._dbuf = b""
        self._dpos = 0
        self._fbuf: list[float] = []
        self._fpos = 0

    def __repr__(self):
        return f"WalkRng(seed={self.seed}, stream={self.stream})"

    # -- direction blocks (values 0..3), consumed directly by the grid walks
    def dir_block(self) -> bytes:
        raw = self._gen.integers(0, 256, size=_DIR_BLOCK // 4, dtype=np.uint8)
        out = np.empty((raw.size, 4), dtype=np.uint8)
        out[:, 0] = raw & 3
        out[:, 1] = (raw >> 2) & 3
        out[:, 2] = (raw >> 4) & 3
        out[:, 3] = raw >> 6
        return out.tobytes()

    def take_dirs(self) -> tuple[bytes, int]:
        """Hand the current direction block to a walk loop.

        The loop must call :meth:`return_dirs` with its final position.
        """
        if self._dpos >= len(self._dbuf):
            self._dbuf = self.dir_block()
            self._dpos = 0
        return self._dbuf, self._dpos

    def return_dirs(self, buf: bytes, pos: int) -> None:
        self._dbuf = buf
        self._dpos = pos

    def direction(self) -> int:
        buf, pos = self.take_dirs()
        self._dpos = pos + 1
        return buf[pos]

    # -- scalar draws
    def random(self) -> float:
        if self._fpos >= len(self._fbuf):
            self._fbuf = self._gen.random(_FLOAT_BLOCK).tolist()
            self._fpos = 0
        x = self._fbuf[self._fpos]
        self._fpos += 1
        return x

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange() needs a positive bound")
        if n == 1:
            return 0
        if n < (1 << 24):
            # bias is below 2**-29 for these bounds
            return int(self.random() * n)
        return int(self._gen.integers(0, n))

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def coin(self, p: float = 0.5) -> bool:
        return self.random() < p

    def spawn(self, stream: int) -> "WalkRng":
        return WalkRng(self.seed, stream)


def make_rng(rng=None, seed=None, stream: int = 0) -> WalkRng:
    if isinstance(rng, WalkRng):
        return rng
    if rng is not None:
        raise TypeError(f"expected WalkRng, got {type(rng).__name__}")
    return WalkRng(0 if seed is None else seed, stream)
