"""Remix vocabulary: pure transforms over recorded operation blocks.

Temporal edits (stretch, trim, skip, normalize, smooth, ease, reverse),
trajectory edits (resize, rotate), and generative ones (clone, apply).
All functions return new blocks and leave their inputs untouched; only
clone mints a new block id.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .canvas import Channel, sample_channel, sample_channel_pre, STEP_CHANNELS
from .errors import InvalidRange, StructuralBlock
from .ids import IdGen
from .recorder import RESAMPLE_TICK, OpBlock, resample_block, tick_grid

_default_ids = IdGen()

POSITIONAL = ("x", "y")


def _require_transform(block, op):
    if block.kind != "transform":
        raise StructuralBlock("%s needs a transform block, got %s" % (op, block.kind))


def _map_channels(block, fn):
    return replace(block, channels=tuple(fn(c) for c in block.channels))


def stretch(block, factor):
    """Scale every sample time (and the duration) by factor."""
    _require_transform(block, "stretch")
    if not (factor > 0) or not math.isfinite(factor):
        raise InvalidRange("stretch factor must be a finite number > 0")
    new = _map_channels(block, lambda c: Channel(
        c.name, tuple((t * factor, v) for t, v in c.samples)))
    return replace(new, duration=block.duration * factor)


def set_duration(block, ms):
    """stretch to an exact target duration (final sample snapped to ms)."""
    _require_transform(block, "set_duration")
    if ms < 0:
        raise InvalidRange("duration must be >= 0")
    if ms == 0:
        return make_instant(block)
    if block.duration == 0:
        raise InvalidRange("cannot stretch a zero-duration block to %s ms" % (ms,))
    factor = ms / block.duration
    d = block.duration

    def warp(t):
        # guard against factor rounding pushing interior times past ms
        return ms if t == d else min(t * factor, ms)

    new = _map_channels(block, lambda c: Channel(
        c.name, tuple((warp(t), v) for t, v in c.samples)))
    return replace(new, duration=ms)


def make_instant(block):
    """Collapse to duration 0; each channel keeps only its final value."""
    if block.kind != "transform":
        return block  # create/delete are already instantaneous
    channels = tuple(Channel(c.name, ((0.0, c.samples[-1][1]),))
                     for c in block.channels)
    return replace(block, channels=channels, duration=0.0)


def _check_range(block, start, end):
    if not (0 <= start < end <= block.duration):
        raise InvalidRange("bad range [%s, %s] for duration %s"
                           % (start, end, block.duration))


def trim(block, start, end):
    """Keep only [start, end]; boundary values sampled, times re-zeroed."""
    _require_transform(block, "trim")
    _check_range(block, start, end)

    def cut(c):
        samples = [(0.0, sample_channel(c, start))]
        for t, v in c.samples:
            if start < t < end:
                samples.append((t - start, v))
        samples.append((end - start, sample_channel(c, end)))
        return Channel(c.name, tuple(samples))

    return replace(_map_channels(block, cut), duration=end - start)


def skip(block, start, end):
    """Cut (start, end) out; later samples shift left and a double sample
    at `start` records the jump."""
    _require_transform(block, "skip")
    _check_range(block, start, end)
    width = end - start

    def splice(c):
        samples = [(t, v) for t, v in c.samples if t < start]
        if start > 0:
            samples.append((start, sample_channel(c, start)))
        samples.append((start, sample_channel(c, end)))
        samples.extend((t - width, v) for t, v in c.samples if t > end)
        return Channel(c.name, tuple(samples))

    return replace(_map_channels(block, splice), duration=block.duration - width)


def _evaluation_times(channels):
    """Merge sample times of several channels, keeping double timestamps."""
    counts = {}
    for c in channels:
        seen = {}
        for t, _ in c.samples:
            seen[t] = seen.get(t, 0) + 1
        for t, n in seen.items():
            counts[t] = max(counts.get(t, 0), min(n, 2))
    times = []
    for t in sorted(counts):
        times.extend([t] * counts[t])
    return times


def _eval_pair(channel, t, is_post):
    if channel is None:
        return None
    return sample_channel(channel, t) if is_post else sample_channel_pre(channel, t)


def normalize(block, tick=RESAMPLE_TICK):
    """Re-time so the (x, y) path moves at constant speed.

    The whole block is warped with the same time map, so rotation/scale
    stay synchronized with the motion. Total duration and endpoint values
    are preserved; output is resampled on the standard grid. A block with
    no positional motion comes back unchanged.
    """
    _require_transform(block, "normalize")
    cx = block.channel("x")
    cy = block.channel("y")
    if (cx is None and cy is None) or block.duration == 0:
        return block

    d = block.duration
    # dense, kink-exact evaluation grid: ticks + original sample times
    dense = sorted(set(tick_grid(d, tick))
                   | {t for c in (cx, cy) if c is not None for t, _ in c.samples})
    pts_t = []
    pts_x = []
    pts_y = []
    for t in dense:
        doubled = any(c is not None and sum(1 for s in c.samples if s[0] == t) > 1
                      for c in (cx, cy))
        phases = (False, True) if doubled else (True,)
        for is_post in phases:
            pts_t.append(t)
            pts_x.append(_eval_pair(cx, t, is_post) if cx is not None else 0.0)
            pts_y.append(_eval_pair(cy, t, is_post) if cy is not None else 0.0)

    xs = np.asarray(pts_x, dtype=float)
    ys = np.asarray(pts_y, dtype=float)
    ts = np.asarray(pts_t, dtype=float)
    seg = np.hypot(np.diff(xs), np.diff(ys))
    s = np.concatenate([[0.0], np.cumsum(seg)])
    total = s[-1]
    if total <= 1e-12:
        return block  # NoMotion: nothing to equalize

    # inverse arc-length map; drop pause plateaus so motion resumes instantly
    keep = np.concatenate([[True], np.diff(s) > 0])
    s_inc = s[keep]
    t_inc = ts[keep]

    grid = tick_grid(d, tick)
    warped = [float(w) for w in
              np.interp([total * (t / d) for t in grid], s_inc, t_inc)]
    warped[0] = 0.0
    warped[-1] = float(d)

    def retime(c):
        return Channel(c.name, tuple(
            (g, sample_channel(c, w)) for g, w in zip(grid, warped)))

    return _map_channels(block, retime)


def smooth(block, window, tick=RESAMPLE_TICK):
    """Centered moving average (window in ms) over resampled ticks.

    The window shrinks symmetrically near the ends, so the first and last
    values survive exactly. Step channels (visible/zIndex) pass through.
    window=0 is the identity.
    """
    _require_transform(block, "smooth")
    if window < 0:
        raise InvalidRange("window must be >= 0")
    if window == 0:
        return block
    rb = resample_block(block, tick)
    half = int(window // (2 * tick))

    def average(c):
        if c.name in STEP_CHANNELS or half == 0:
            return c
        values = [v for _, v in c.samples]
        n = len(values)
        out = []
        for i, (t, _) in enumerate(c.samples):
            k = min(half, i, n - 1 - i)
            window_vals = values[i - k:i + k + 1]
            out.append((t, sum(window_vals) / len(window_vals)))
        return Channel(c.name, tuple(out))

    return _map_channels(rb, average)


def _smoothstep(u):
    return 3.0 * u * u - 2.0 * u * u * u


def ease_in_out(block, tick=RESAMPLE_TICK):
    """Warp playback time by the smoothstep curve (slow-fast-slow)."""
    _require_transform(block, "ease_in_out")
    d = block.duration
    if d == 0:
        return block
    grid = tick_grid(d, tick)

    def warp(c):
        samples = []
        for t in grid:
            w = d if t == d else d * _smoothstep(t / d)
            samples.append((t, sample_channel(c, w)))
        return Channel(c.name, tuple(samples))

    return _map_channels(block, warp)


def reverse(block):
    """Play backwards: sample list time-mirrored, duration unchanged."""
    _require_transform(block, "reverse")
    d = block.duration

    def mirror(c):
        return Channel(c.name, tuple((d - t, v) for t, v in reversed(c.samples)))

    return _map_channels(block, mirror)


def _default_anchor(block):
    cx = block.channel("x")
    cy = block.channel("y")
    return (sample_channel(cx, 0) if cx is not None else 0.0,
            sample_channel(cy, 0) if cy is not None else 0.0)


def resize_trajectory(block, sx, sy, anchor=None):
    """Scale the (x, y) path about an anchor (default: first sample)."""
    _require_transform(block, "resize_trajectory")
    ax, ay = anchor if anchor is not None else _default_anchor(block)

    def scale(c):
        if c.name == "x" and sx != 1:
            return Channel(c.name, tuple((t, ax + sx * (v - ax)) for t, v in c.samples))
        if c.name == "y" and sy != 1:
            return Channel(c.name, tuple((t, ay + sy * (v - ay)) for t, v in c.samples))
        return c

    return _map_channels(block, scale)


def rotate_trajectory(block, theta, anchor=None):
    """Rotate the (x, y) path by theta about an anchor.

    Only the trajectory moves; the element's own rotation channel is left
    alone. Because rotation mixes x and y, both channels are rebuilt on
    the union of their sample times (jumps preserved as double samples).
    """
    _require_transform(block, "rotate_trajectory")
    if theta == 0:
        return block
    cx = block.channel("x")
    cy = block.channel("y")
    if cx is None and cy is None:
        return block
    ax, ay = anchor if anchor is not None else _default_anchor(block)
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)

    times = _evaluation_times([c for c in (cx, cy) if c is not None])
    new_x = []
    new_y = []
    prev_t = None
    for t in times:
        is_post = (t == prev_t)  # second occurrence of a double timestamp
        x = _eval_pair(cx, t, is_post) if cx is not None else ax
        y = _eval_pair(cy, t, is_post) if cy is not None else ay
        dx = x - ax
        dy = y - ay
        new_x.append((t, ax + dx * cos_t - dy * sin_t))
        new_y.append((t, ay + dx * sin_t + dy * cos_t))
        prev_t = t

    channels = []
    saw_x = saw_y = False
    for c in block.channels:
        if c.name == "x":
            channels.append(Channel("x", tuple(new_x)))
            saw_x = True
        elif c.name == "y":
            channels.append(Channel("y", tuple(new_y)))
            saw_y = True
        else:
            channels.append(c)
    if not saw_x:
        channels.append(Channel("x", tuple(new_x)))
    if not saw_y:
        channels.append(Channel("y", tuple(new_y)))
    return replace(block, channels=tuple(channels))


def clone_block(block, id_gen=None):
    """Deep copy under a fresh id; legal on structural blocks too."""
    return replace(block, id=(id_gen or _default_ids).new("blk"))


def apply_to_target(block, target, mode="relative"):
    """Re-point a transform block at another element.

    relative (default): x/y/rotation are re-based at replay start so the
    motion starts from the target's current pose. absolute: recorded
    values replay verbatim on the target.
    """
    _require_transform(block, "apply")
    if mode not in ("relative", "absolute"):
        raise InvalidRange("unknown apply mode %r" % (mode,))
    return replace(block, elementId=target, applyMode=mode)


# ---------------------------------------------------------------------------
# Remix functions as data, for pipelines / the wire protocol


@dataclass(frozen=True)
class Stretch:
    factor: float


@dataclass(frozen=True)
class SetDuration:
    ms: float


@dataclass(frozen=True)
class MakeInstant:
    pass


@dataclass(frozen=True)
class Trim:
    start: float
    end: float


@dataclass(frozen=True)
class Skip:
    start: float
    end: float


@dataclass(frozen=True)
class Normalize:
    pass


@dataclass(frozen=True)
class Smooth:
    window: float


@dataclass(frozen=True)
class EaseInOut:
    pass


@dataclass(frozen=True)
class Reverse:
    pass


@dataclass(frozen=True)
class ResizeTrajectory:
    sx: float
    sy: float
    anchor: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class RotateTrajectory:
    theta: float
    anchor: Optional[Tuple[float, float]] = None


@dataclass(frozen=True)
class Clone:
    pass


@dataclass(frozen=True)
class Apply:
    target: str
    mode: str = "relative"


def apply_remix(block, fn, id_gen=None):
    """Apply one RemixFn value to a block."""
    if isinstance(fn, Stretch):
        return stretch(block, fn.factor)
    if isinstance(fn, SetDuration):
        return set_duration(block, fn.ms)
    if isinstance(fn, MakeInstant):
        return make_instant(block)
    if isinstance(fn, Trim):
        return trim(block, fn.start, fn.end)
    if isinstance(fn, Skip):
        return skip(block, fn.start, fn.end)
    if isinstance(fn, Normalize):
        return normalize(block)
    if isinstance(fn, Smooth):
        return smooth(block, fn.window)
    if isinstance(fn, EaseInOut):
        return ease_in_out(block)
    if isinstance(fn, Reverse):
        return reverse(block)
    if isinstance(fn, ResizeTrajectory):
        return resize_trajectory(block, fn.sx, fn.sy, fn.anchor)
    if isinstance(fn, RotateTrajectory):
        return rotate_trajectory(block, fn.theta, fn.anchor)
    if isinstance(fn, Clone):
        return clone_block(block, id_gen)
    if isinstance(fn, Apply):
        return apply_to_target(block, fn.target, fn.mode)
    raise InvalidRange("unknown remix fn %r" % (fn,))


def apply_pipeline(block, fns, id_gen=None):
    """Left-to-right composition; an empty list is the identity."""
    for fn in fns:
        block = apply_remix(block, fn, id_gen)
    return block


_FN_NAMES = {
    "stretch": Stretch,
    "setDuration": SetDuration,
    "makeInstant": MakeInstant,
    "trim": Trim,
    "skip": Skip,
    "normalize": Normalize,
    "smooth": Smooth,
    "easeInOut": EaseInOut,
    "reverse": Reverse,
    "resizeTrajectory": ResizeTrajectory,
    "rotateTrajectory": RotateTrajectory,
    "clone": Clone,
    "apply": Apply,
}


def remix_fn_to_dict(fn):
    name = next(n for n, cls in _FN_NAMES.items() if type(fn) is cls)
    d = {"fn": name}
    if isinstance(fn, Stretch):
        d["factor"] = fn.factor
    elif isinstance(fn, SetDuration):
        d["ms"] = fn.ms
    elif isinstance(fn, (Trim, Skip)):
        d["from"] = fn.start
        d["to"] = fn.end
    elif isinstance(fn, Smooth):
        d["window"] = fn.window
    elif isinstance(fn, ResizeTrajectory):
        d["sx"] = fn.sx
        d["sy"] = fn.sy
        if fn.anchor is not None:
            d["anchor"] = list(fn.anchor)
    elif isinstance(fn, RotateTrajectory):
        d["theta"] = fn.theta
        if fn.anchor is not None:
            d["anchor"] = list(fn.anchor)
    elif isinstance(fn, Apply):
        d["target"] = fn.target
        d["mode"] = fn.mode
    return d


def remix_fn_from_dict(d):
    name = d.get("fn")
    cls = _FN_NAMES.get(name)
    if cls is None:
        raise InvalidRange("unknown remix fn %r" % (name,))
    anchor = tuple(d["anchor"]) if d.get("anchor") is not None else None
    if cls is Stretch:
        return Stretch(float(d["factor"]))
    if cls is SetDuration:
        return SetDuration(float(d["ms"]))
    if cls is Trim:
        return Trim(float(d["from"]), float(d["to"]))
    if cls is Skip:
        return Skip(float(d["from"]), float(d["to"]))
    if cls is Smooth:
        return Smooth(float(d["window"]))
    if cls is ResizeTrajectory:
        return ResizeTrajectory(float(d["sx"]), float(d["sy"]), anchor)
    if cls is RotateTrajectory:
        return RotateTrajectory(float(d["theta"]), anchor)
    if cls is Apply:
        return Apply(str(d["target"]), str(d.get("mode", "relative")))
    return cls()
