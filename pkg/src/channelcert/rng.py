"""Deterministic random-number streams.

Every sampler in the package draws from an explicit :class:`RngStream` so that
experiments are reproducible and parallelizable: a stream is identified by a
64-bit ``seed`` and a 64-bit ``stream_id``, and identical identifiers produce
identical sequences on every platform and under any thread scheduling.

The underlying generator is numpy's PCG64 keyed through ``SeedSequence`` with
``spawn_key=(stream_id, *path)``, which is the documented cross-platform way
to derive independent streams from one seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RngStream:
    """A named, reproducible random stream.

    Distinct ``stream_id`` values (or distinct ``path`` extensions created by
    :meth:`substream`) give statistically independent sequences; the stream
    carries its own counter state, so it is consumed serially.
    """

    seed: int
    stream_id: int = 0
    path: tuple[int, ...] = ()
    _generator: np.random.Generator | None = field(
        default=None, repr=False, compare=False
    )

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if not 0 <= int(self.stream_id) < 2**64:
            raise ValueError("stream_id must fit in 64 unsigned bits")

    @property
    def generator(self) -> np.random.Generator:
        if self._generator is None:
            ss = np.random.SeedSequence(
                entropy=int(self.seed), spawn_key=(int(self.stream_id), *self.path)
            )
            self._generator = np.random.Generator(np.random.PCG64(ss))
        return self._generator

    def substream(self, index: int) -> "RngStream":
        """Derive an independent child stream; deterministic in ``index``."""
        return RngStream(self.seed, self.stream_id, self.path + (int(index),))

    # Convenience passthroughs used throughout the package.
    def standard_normal(self, shape):
        return self.generator.standard_normal(shape)

    def complex_normal(self, shape):
        """I.i.d. standard complex Gaussians: variance 1, independent parts of variance 1/2."""
        g = self.generator
        return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / np.sqrt(2.0)

    def uniform(self, n):
        return self.generator.random(n)
