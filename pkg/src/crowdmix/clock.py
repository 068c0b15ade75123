"""Clocks. Everything time-dependent (locks, replay cadence, trigger
evaluation) takes a clock so tests and the simulator run on virtual time."""

import time


class SimClock:
    """Virtual millisecond clock; advances only when told to."""

    def __init__(self, start=0):
        self._now = int(start)

    def now(self):
        return self._now

    def advance(self, ms):
        if ms < 0:
            raise ValueError("clock cannot go backwards")
        self._now += int(ms)
        return self._now

    def set(self, ms):
        if ms < self._now:
            raise ValueError("clock cannot go backwards")
        self._now = int(ms)
        return self._now


class WallClock:
    """Monotonic wall clock in ms, zeroed at construction."""

    def __init__(self):
        self._t0 = time.monotonic()

    def now(self):
        return int((time.monotonic() - self._t0) * 1000)
