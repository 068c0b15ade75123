"""Timeline arrangement and compilation.

Blocks get placed on tracks at offsets; compile bakes the arrangement into
tick-resolution channels plus a structural schedule, which makes replay a
trivially deterministic walk. Overlapping writers of one (element,
channel) are resolved last-writer-wins: later startOffset, then higher
track, then greater itemId. Between items a channel holds the final value
of the most recently ended writer, exactly like a real canvas would.
"""

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Tuple

from .canvas import CanvasState, EditEvent, Channel, Element, apply_edit, sample_channel
from .errors import (
    ConflictError,
    DeleteMissing,
    InvalidValue,
    NegativeOffset,
    TargetMissing,
    UnknownBlock,
    UnknownItem,
)
from .recorder import tick_grid

DEFAULT_TICK = 20.0

REBASED_CHANNELS = ("x", "y", "rotation")


@dataclass(frozen=True)
class TimelineItem:
    itemId: str
    blockId: str
    startOffset: float
    track: int = 0


@dataclass(frozen=True)
class Timeline:
    items: Tuple[TimelineItem, ...] = ()
    tick: float = DEFAULT_TICK
    nextItem: int = 1


@dataclass(frozen=True)
class Conflict:
    elementId: str
    channelName: str
    start: float
    end: float
    winnerItemId: str
    loserItemId: str


@dataclass(frozen=True)
class StructuralOp:
    t: float
    kind: str  # create | delete
    elementId: str
    itemId: str
    track: int = 0
    element: Optional[Element] = None


@dataclass(frozen=True)
class RebaseSpan:
    """Grid span whose baked x/y/rotation values get shifted at replay by
    (target pose at replay start) - base."""

    elementId: str
    channel: str
    itemId: str
    start: float
    end: float
    base: float


@dataclass(frozen=True)
class CompiledBehavior:
    duration: float
    tick: float
    bakedTracks: Mapping[Tuple[str, str], Channel] = field(default_factory=dict)
    structuralSchedule: Tuple[StructuralOp, ...] = ()
    conflicts: Tuple[Conflict, ...] = ()
    rebaseSpans: Tuple[RebaseSpan, ...] = ()


def place(tl, blocks, block_id, start_offset, track=0):
    """Add a block to the timeline; returns the new Timeline."""
    if block_id not in blocks:
        raise UnknownBlock("no block %r" % (block_id,))
    if start_offset < 0:
        raise NegativeOffset("startOffset must be >= 0")
    item = TimelineItem(itemId="item-%d" % tl.nextItem, blockId=block_id,
                        startOffset=start_offset, track=track)
    return replace(tl, items=tl.items + (item,), nextItem=tl.nextItem + 1)


def edit_item(tl, item_id, new_offset=None, new_track=None, remove=False):
    """Move or remove one item."""
    idx = next((i for i, it in enumerate(tl.items) if it.itemId == item_id), None)
    if idx is None:
        raise UnknownItem("no item %r" % (item_id,))
    if remove:
        return replace(tl, items=tl.items[:idx] + tl.items[idx + 1:])
    item = tl.items[idx]
    if new_offset is not None:
        if new_offset < 0:
            raise NegativeOffset("startOffset must be >= 0")
        item = replace(item, startOffset=new_offset)
    if new_track is not None:
        item = replace(item, track=new_track)
    return replace(tl, items=tl.items[:idx] + (item,) + tl.items[idx + 1:])


class _Writer:
    __slots__ = ("item", "chan", "start", "end", "relative", "base")

    def __init__(self, item, block, chan):
        self.item = item
        self.chan = chan
        self.start = item.startOffset
        self.end = item.startOffset + block.duration
        self.relative = (block.applyMode == "relative"
                         and chan.name in REBASED_CHANNELS)
        self.base = chan.samples[0][1] if self.relative else None

    def order_key(self):
        return (self.start, self.item.track, self.item.itemId)


def _resolve(tl, blocks):
    resolved = []
    for item in tl.items:
        block = blocks.get(item.blockId)
        if block is None:
            raise UnknownBlock("item %r references missing block %r"
                               % (item.itemId, item.blockId))
        resolved.append((item, block))
    return resolved


def detect_conflicts(tl, blocks):
    """Pairs of items fighting over one (element, channel).

    Only overlaps of positive length count; back-to-back placement (end of
    one item == start of the next) is the normal arrangement idiom and the
    shared tick already goes to the later item.
    """
    writers = {}
    for item, block in _resolve(tl, blocks):
        if block.kind != "transform":
            continue
        for chan in block.channels:
            writers.setdefault((block.elementId, chan.name), []).append(
                _Writer(item, block, chan))
    conflicts = []
    for (element_id, name), ws in writers.items():
        ws = sorted(ws, key=_Writer.order_key)
        for i in range(len(ws)):
            for j in range(i + 1, len(ws)):
                lo = max(ws[i].start, ws[j].start)
                hi = min(ws[i].end, ws[j].end)
                if hi > lo:
                    winner, loser = max(ws[i], ws[j], key=_Writer.order_key), \
                        min(ws[i], ws[j], key=_Writer.order_key)
                    conflicts.append(Conflict(
                        elementId=element_id, channelName=name, start=lo, end=hi,
                        winnerItemId=winner.item.itemId,
                        loserItemId=loser.item.itemId))
    conflicts.sort(key=lambda c: (c.elementId, c.channelName, c.start,
                                  c.winnerItemId, c.loserItemId))
    return conflicts


def _value_at(writers, t):
    """Most-recent-writer rule: active winner, else latest-ended holder."""
    active = [w for w in writers if w.start <= t <= w.end]
    if active:
        w = max(active, key=_Writer.order_key)
        return sample_channel(w.chan, t - w.start), w
    ended = [w for w in writers if w.end < t]
    if ended:
        w = max(ended, key=lambda w: (w.end,) + w.order_key())
        return w.chan.samples[-1][1], w
    return None, None


def compile_timeline(tl, blocks, policy="lastWriterWins"):
    """Bake a timeline into one replayable behavior."""
    if policy not in ("lastWriterWins", "error"):
        raise InvalidValue("unknown policy %r" % (policy,))
    resolved = _resolve(tl, blocks)
    conflicts = detect_conflicts(tl, blocks)
    if policy == "error" and conflicts:
        raise ConflictError("%d overlapping writes" % len(conflicts), conflicts)

    duration = 0.0
    writers = {}
    structural = []
    for item, block in resolved:
        if block.kind == "transform":
            duration = max(duration, item.startOffset + block.duration)
            for chan in block.channels:
                writers.setdefault((block.elementId, chan.name), []).append(
                    _Writer(item, block, chan))
        else:
            duration = max(duration, item.startOffset)
            structural.append(StructuralOp(
                t=item.startOffset, kind=block.kind, elementId=block.elementId,
                itemId=item.itemId, track=item.track,
                element=block.payload if block.kind == "create" else None))
    structural.sort(key=lambda op: (op.t, op.track, op.itemId))

    grid = tick_grid(duration, tl.tick)
    baked = {}
    spans = []
    for key in sorted(writers):
        ws = writers[key]
        samples = []
        run = None  # [itemId, span_start, span_end, base] of a relative owner
        for t in grid:
            value, owner = _value_at(ws, t)
            if value is None:
                continue
            samples.append((t, value))
            if owner.relative:
                if run is not None and run[0] == owner.item.itemId:
                    run[2] = t
                else:
                    if run is not None:
                        spans.append(_close_span(key, run))
                    run = [owner.item.itemId, t, t, owner.base]
            elif run is not None:
                spans.append(_close_span(key, run))
                run = None
        if run is not None:
            spans.append(_close_span(key, run))
        baked[key] = Channel(name=key[1], samples=tuple(samples))

    return CompiledBehavior(
        duration=duration, tick=tl.tick, bakedTracks=baked,
        structuralSchedule=tuple(structural), conflicts=tuple(conflicts),
        rebaseSpans=tuple(spans))


def _close_span(key, run):
    item_id, start, end, base = run
    return RebaseSpan(elementId=key[0], channel=key[1], itemId=item_id,
                      start=start, end=end, base=base)


def replay(cb, initial, tick=None):
    """Step a compiled behavior over an initial canvas.

    Returns [(t, CanvasState)] at t = 0, tick, ..., duration. Pure: same
    inputs, same frames. Raises TargetMissing if a relative-apply target
    is absent at replay start, DeleteMissing for a scheduled delete of an
    absent element.
    """
    tick = tick if tick is not None else cb.tick
    deltas = {}
    for span in cb.rebaseSpans:
        el = initial.elements.get(span.elementId)
        if el is None:
            raise TargetMissing("relative apply target %r absent at replay start"
                                % (span.elementId,))
        deltas[span] = el.pose.channel(span.channel) - span.base

    track_keys = sorted(cb.bakedTracks)
    spans_by_key = {}
    for span in cb.rebaseSpans:
        spans_by_key.setdefault((span.elementId, span.channel), []).append(span)

    state = initial
    frames = []
    schedule = list(cb.structuralSchedule)
    si = 0
    for t in tick_grid(cb.duration, tick):
        while si < len(schedule) and schedule[si].t <= t:
            op = schedule[si]
            si += 1
            if op.kind == "create":
                state = apply_edit(state, EditEvent.create(t, "replay", op.element))
            else:
                if op.elementId not in state.elements:
                    raise DeleteMissing("delete of absent element %r" % (op.elementId,))
                state = apply_edit(state, EditEvent.delete(t, "replay", op.elementId))
        for key in track_keys:
            chan = cb.bakedTracks[key]
            if t < chan.samples[0][0]:
                continue  # no writer has started yet
            element_id, channel_name = key
            if element_id not in state.elements:
                continue  # deleted (or never created): writes are moot
            value = sample_channel(chan, t)
            for span in spans_by_key.get(key, ()):
                if span.start <= t <= span.end:
                    value = value + deltas[span]
                    break
            state = apply_edit(state, EditEvent.set_property(
                t, "replay", element_id, channel_name, value))
        frames.append((t, state))
    return frames
