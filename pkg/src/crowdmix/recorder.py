"""Demonstration capture: buffer a worker's live edit stream, then segment
it into per-element operation blocks.

A transform block holds keyframe channels re-zeroed to block start; create
and delete events become their own zero-duration structural blocks so they
can be reordered independently on the timeline.
"""

from bisect import bisect_right
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

from .canvas import Channel, EditEvent, Element, sample_channel
from .errors import (
    EmptyBuffer,
    ForeignWorkerEvent,
    InvalidRange,
    NotRecording,
    StructuralBlock,
)
from .ids import IdGen

# A pause this long (ms) splits one gesture from the next.
DEFAULT_GAP_THRESHOLD = 500

# Uniform keyframe spacing for resampled/replayed channels: 50 Hz.
RESAMPLE_TICK = 20

_default_ids = IdGen()


@dataclass(frozen=True)
class BlockSource:
    workerId: str
    recordedAt: float  # session ms at block start


@dataclass(frozen=True)
class OpBlock:
    """One recorded element-wise operation; the unit of remixing.

    kind "transform" carries channels; "create" carries the element
    snapshot in payload; "delete" carries neither. applyMode "relative"
    marks a retargeted block whose x/y/rotation get re-based onto the
    target's pose at replay start.
    """

    id: str
    elementId: str
    kind: str
    duration: float = 0.0
    channels: Tuple[Channel, ...] = ()
    payload: Optional[Element] = None
    source: Optional[BlockSource] = None
    applyMode: str = "absolute"

    def channel(self, name):
        for c in self.channels:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class RecorderBuffer:
    sessionId: str
    recordingWorkerId: str
    startedAt: float
    events: Tuple[EditEvent, ...] = ()
    stoppedAt: Optional[float] = None


def record_event(buf, event):
    """Append an event, keeping the buffer time-ordered.

    Late-arriving events (t earlier than the last) are inserted at their
    sorted position, after any events with the same timestamp.
    """
    if buf.stoppedAt is not None:
        raise NotRecording("recording already stopped")
    if event.workerId != buf.recordingWorkerId:
        raise ForeignWorkerEvent(
            "event from %r, recording %r" % (event.workerId, buf.recordingWorkerId))
    if event.t < buf.startedAt:
        raise NotRecording("event at %s precedes recording start %s"
                           % (event.t, buf.startedAt))
    times = [e.t for e in buf.events]
    i = bisect_right(times, event.t)
    events = buf.events[:i] + (event,) + buf.events[i:]
    return replace(buf, events=events)


def stop_recording(buf, t):
    if buf.stoppedAt is not None:
        raise NotRecording("recording already stopped")
    return replace(buf, stoppedAt=t)


def _close_run(run_events, run_start, worker_id, first_index, id_gen):
    """Build one transform block from a run of setProperty events."""
    channel_order = []
    channel_samples = {}
    for e in run_events:
        t = e.t - run_start
        if e.channel not in channel_samples:
            channel_order.append(e.channel)
            channel_samples[e.channel] = []
        samples = channel_samples[e.channel]
        if len(samples) >= 2 and samples[-1][0] == t and samples[-2][0] == t:
            # third write at one instant: keep pre + latest post
            samples[-1] = (t, e.value)
        else:
            samples.append((t, e.value))
    channels = []
    duration = 0.0
    for name in channel_order:
        samples = channel_samples[name]
        if samples[0][0] > 0:
            # anchor the channel at block start: hold its first value
            samples.insert(0, (0.0, samples[0][1]))
        duration = max(duration, samples[-1][0])
        channels.append(Channel(name=name, samples=tuple(samples)))
    block = OpBlock(
        id=id_gen.new("blk"),
        elementId=run_events[0].elementId,
        kind="transform",
        duration=duration,
        channels=tuple(channels),
        source=BlockSource(workerId=worker_id, recordedAt=run_start),
    )
    return block, first_index


def segment(buf, gap_threshold=DEFAULT_GAP_THRESHOLD, id_gen=None):
    """Partition a recorded buffer into per-element OpBlocks.

    Within one element, consecutive setProperty events closer than
    gap_threshold merge into one transform block; create/delete events
    are always their own instantaneous blocks and break any open run.
    Blocks come back ordered by start time (buffer order on ties).
    """
    if gap_threshold <= 0:
        raise InvalidRange("gap_threshold must be > 0")
    if not buf.events:
        raise EmptyBuffer("nothing recorded")
    id_gen = id_gen or _default_ids
    worker = buf.recordingWorkerId

    per_element = {}
    for idx, e in enumerate(buf.events):
        key = e.elementId if e.elementId is not None else e.element.id
        per_element.setdefault(key, []).append((idx, e))

    keyed_blocks = []  # (recordedAt, buffer index) -> block
    for element_id, entries in per_element.items():
        run = []
        run_first_index = None
        for idx, e in entries:
            if e.kind == "setProperty":
                if run and e.t - run[-1].t >= gap_threshold:
                    keyed_blocks.append(_close_run(run, run[0].t, worker,
                                                   run_first_index, id_gen))
                    run = []
                if not run:
                    run_first_index = idx
                run.append(e)
                continue
            if run:
                keyed_blocks.append(_close_run(run, run[0].t, worker,
                                               run_first_index, id_gen))
                run = []
            if e.kind == "create":
                block = OpBlock(
                    id=id_gen.new("blk"), elementId=element_id, kind="create",
                    payload=e.element,
                    source=BlockSource(workerId=worker, recordedAt=e.t))
            else:
                block = OpBlock(
                    id=id_gen.new("blk"), elementId=element_id, kind="delete",
                    source=BlockSource(workerId=worker, recordedAt=e.t))
            keyed_blocks.append((block, idx))
        if run:
            keyed_blocks.append(_close_run(run, run[0].t, worker,
                                           run_first_index, id_gen))

    keyed_blocks.sort(key=lambda pair: (pair[0].source.recordedAt, pair[1]))
    return [block for block, _ in keyed_blocks]


def tick_grid(duration, tick):
    """Times 0, tick, 2*tick, ... with the exact duration always last."""
    if tick <= 0:
        raise InvalidRange("tick must be > 0")
    n = int(duration // tick)
    while (n + 1) * tick <= duration:
        n += 1
    grid = [i * tick for i in range(n + 1)]
    if grid[-1] != duration:
        grid.append(duration)
    return grid


def resample_block(block, tick=RESAMPLE_TICK):
    """Re-keyframe every channel on a uniform grid (endpoints kept exact)."""
    if block.kind != "transform":
        raise StructuralBlock("cannot resample a %s block" % (block.kind,))
    grid = tick_grid(block.duration, tick)
    channels = tuple(
        Channel(name=c.name, samples=tuple((t, sample_channel(c, t)) for t in grid))
        for c in block.channels)
    return replace(block, channels=channels)
