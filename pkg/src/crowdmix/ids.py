"""Id generation.

Server-side ids are short prefixed counters ("blk-0003") so that scripted
scenarios and golden logs can predict them. Unseeded generators fall back
to random UUIDs for interactive use.
"""

import random
import uuid


class IdGen:
    """Deterministic when seeded, uuid4-style otherwise."""

    def __init__(self, seed=None):
        self._rng = random.Random(seed) if seed is not None else None
        self._counters = {}

    def new(self, prefix=None):
        if prefix is not None:
            n = self._counters.get(prefix, 0) + 1
            self._counters[prefix] = n
            return "%s-%04d" % (prefix, n)
        if self._rng is not None:
            return str(uuid.UUID(int=self._rng.getrandbits(128), version=4))
        return str(uuid.uuid4())
