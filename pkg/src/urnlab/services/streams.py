"""Per-replication random substreams."""

from typing import List, Optional, Tuple

import numpy as np

from urnlab.core.config import settings
from urnlab.models.urn import ReinforcementSpec


class _BlockedStream:
    """Positional reader over a generator refilled `block_size` draws at a time"""

    __slots__ = ("_fill", "_block_size", "_buffer", "_pos")

    def __init__(self, fill, block_size: int):
        self._fill = fill
        self._block_size = block_size
        self._buffer: List[float] = []
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buffer):
            self._buffer = self._fill(self._block_size).tolist()
            self._pos = 0
        value = self._buffer[self._pos]
        self._pos += 1
        return value


def _generator(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_seq))


class ReplicationStreams:
    """
    Three logical substreams derived from (seed, replication_index):

    - colour uniforms U_n, one per step
    - reinforcements (D1_n, D2_n), one pair per step whether or not applied;
      each colour reads its own child generator
    - policy auxiliaries, one per state n

    Every sampler fills elementwise from its generator, so the values seen at
    a given position do not depend on the block size.
    """

    def __init__(
        self,
        seed: int,
        replication_index: int,
        r1: ReinforcementSpec,
        r2: ReinforcementSpec,
        block_size: Optional[int] = None,
    ):
        block_size = block_size or settings.STREAM_BLOCK_SIZE
        root = np.random.SeedSequence(entropy=seed, spawn_key=(replication_index,))
        colour_seq, reinforcement_seq, aux_seq = root.spawn(3)
        red_seq, white_seq = reinforcement_seq.spawn(2)

        colour_rng = _generator(colour_seq)
        red_rng = _generator(red_seq)
        white_rng = _generator(white_seq)
        aux_rng = _generator(aux_seq)

        self._colour = _BlockedStream(colour_rng.random, block_size)
        self._red = _BlockedStream(lambda size: r1.sample(red_rng, size), block_size)
        self._white = _BlockedStream(lambda size: r2.sample(white_rng, size), block_size)
        self._aux = _BlockedStream(aux_rng.random, block_size)

    def next_step(self) -> Tuple[float, float, float]:
        """(u, d1, d2) for the next step"""
        return self._colour.next(), self._red.next(), self._white.next()

    def next_aux(self) -> float:
        return self._aux.next()
