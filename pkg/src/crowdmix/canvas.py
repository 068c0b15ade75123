"""Shared-canvas data model.

Value-semantic types for elements and their poses, the edit events that
mutate a canvas, and keyframe channels with the sampling rules replay is
built on. Field names deliberately mirror the wire format (camelCase) so
serialization is one-to-one.

Conventions: y-axis points down, origin top-left, units are abstract
canvas units. An element's pose anchor is the top-left corner of its
unrotated rect; rotation pivots about the rect center. Times are
milliseconds, angles radians.
"""

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Tuple, Union

from .errors import (
    DuplicateElement,
    ElementNotFound,
    EmptyChannel,
    InvalidValue,
)

POSE_CHANNELS = ("x", "y", "rotation", "scaleX", "scaleY", "zIndex", "visible")

# visible/zIndex hold by steps; everything else interpolates linearly
STEP_CHANNELS = frozenset({"zIndex", "visible"})

ELEMENT_KINDS = ("image", "shape", "text")

SampleValue = Union[float, int, bool]


@dataclass(frozen=True)
class Pose:
    x: float = 0.0
    y: float = 0.0
    rotation: float = 0.0
    scaleX: float = 1.0
    scaleY: float = 1.0
    zIndex: int = 0
    visible: bool = True

    def channel(self, name):
        if name not in POSE_CHANNELS:
            raise InvalidValue("unknown channel %r" % (name,))
        return getattr(self, name)


@dataclass(frozen=True)
class Element:
    id: str
    kind: str
    width: float
    height: float
    pose: Pose = field(default_factory=Pose)
    assetRef: Optional[str] = None
    label: Optional[str] = None


@dataclass(frozen=True)
class CanvasState:
    elements: Mapping[str, Element] = field(default_factory=dict)
    version: int = 0


@dataclass(frozen=True)
class EditEvent:
    """One canvas mutation: create, delete, or setProperty."""

    t: float
    workerId: str
    kind: str
    element: Optional[Element] = None
    elementId: Optional[str] = None
    channel: Optional[str] = None
    value: Optional[SampleValue] = None

    @staticmethod
    def create(t, worker_id, element):
        return EditEvent(t=t, workerId=worker_id, kind="create",
                         element=element, elementId=element.id)

    @staticmethod
    def delete(t, worker_id, element_id):
        return EditEvent(t=t, workerId=worker_id, kind="delete",
                         elementId=element_id)

    @staticmethod
    def set_property(t, worker_id, element_id, channel, value):
        return EditEvent(t=t, workerId=worker_id, kind="setProperty",
                         elementId=element_id, channel=channel, value=value)


@dataclass(frozen=True)
class Channel:
    """Time-ordered keyframes for one element property.

    Sample times are ms offsets from block start, non-decreasing, first
    sample at t=0. At most two samples may share a timestamp: that encodes
    a step discontinuity as (pre-value, post-value), and sampling exactly
    at that instant returns the post-value (replay is right-continuous).
    """

    name: str
    samples: Tuple[Tuple[float, SampleValue], ...]

    def times(self):
        return [s[0] for s in self.samples]


def _is_finite_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def check_channel_value(name, value):
    """Validate one (channel, value) pair; raises InvalidValue."""
    if name not in POSE_CHANNELS:
        raise InvalidValue("unknown channel %r" % (name,))
    if name == "visible":
        if not isinstance(value, bool):
            raise InvalidValue("visible must be a bool, got %r" % (value,))
    elif name == "zIndex":
        if not isinstance(value, int) or isinstance(value, bool):
            raise InvalidValue("zIndex must be an int, got %r" % (value,))
    else:
        if not _is_finite_number(value):
            raise InvalidValue("%s must be a finite number, got %r" % (name, value))
        if name in ("scaleX", "scaleY") and value <= 0:
            raise InvalidValue("%s must be > 0, got %r" % (name, value))


def check_element(el):
    if not el.id:
        raise InvalidValue("element id must be non-empty")
    if el.kind not in ELEMENT_KINDS:
        raise InvalidValue("unknown element kind %r" % (el.kind,))
    if el.kind == "image" and not el.assetRef:
        raise InvalidValue("image elements require an assetRef")
    if not _is_finite_number(el.width) or not _is_finite_number(el.height):
        raise InvalidValue("width/height must be finite numbers")
    if el.width < 0 or el.height < 0:
        raise InvalidValue("width/height must be >= 0")
    for name in POSE_CHANNELS:
        check_channel_value(name, el.pose.channel(name))


def apply_edit(state, event):
    """Apply one edit, returning a new CanvasState (input untouched).

    Version goes up by exactly 1. Raises ElementNotFound, DuplicateElement
    or InvalidValue; on error the input state is still valid and unchanged.
    """
    elements = dict(state.elements)
    if event.kind == "create":
        el = event.element
        if el is None:
            raise InvalidValue("create event carries no element")
        check_element(el)
        if el.id in elements:
            raise DuplicateElement("element %r already exists" % (el.id,))
        elements[el.id] = el
    elif event.kind == "delete":
        if event.elementId not in elements:
            raise ElementNotFound("no element %r" % (event.elementId,))
        del elements[event.elementId]
    elif event.kind == "setProperty":
        el = elements.get(event.elementId)
        if el is None:
            raise ElementNotFound("no element %r" % (event.elementId,))
        check_channel_value(event.channel, event.value)
        elements[event.elementId] = replace(
            el, pose=replace(el.pose, **{event.channel: event.value}))
    else:
        raise InvalidValue("unknown edit kind %r" % (event.kind,))
    return CanvasState(elements=elements, version=state.version + 1)


def sample_channel(channel, t):
    """Value of a channel at time t.

    Linear interpolation for numeric channels, step (hold previous) for
    zIndex/visible. t is clamped to [first, last] sample time. At a
    double-sample timestamp the post-value is returned.
    """
    samples = channel.samples
    if not samples:
        raise EmptyChannel("channel %r has no samples" % (channel.name,))
    times = [s[0] for s in samples]
    if t <= times[0]:
        # clamp low; a double sample at the start still yields the post-value
        return samples[1][1] if len(times) > 1 and times[1] == times[0] else samples[0][1]
    if t >= times[-1]:
        return samples[-1][1]
    i = bisect_right(times, t)
    left_t, left_v = samples[i - 1]
    if left_t == t or channel.name in STEP_CHANNELS:
        return left_v
    right_t, right_v = samples[i]
    frac = (t - left_t) / (right_t - left_t)
    return left_v + frac * (right_v - left_v)


def sample_channel_pre(channel, t):
    """Left limit of a channel at time t (the pre-value at a jump)."""
    samples = channel.samples
    if not samples:
        raise EmptyChannel("channel %r has no samples" % (channel.name,))
    times = [s[0] for s in samples]
    i = bisect_left(times, t)
    if i < len(times) and times[i] == t:
        return samples[i][1]
    return sample_channel(channel, t)


def bounding_box(el):
    """Axis-aligned bounding box (x0, y0, x1, y1) of an element.

    The w*h rect is anchored top-left at (pose.x, pose.y), scaled by
    (scaleX, scaleY) about that anchor, then rotated by pose.rotation
    about the scaled rect's center.
    """
    p = el.pose
    w = el.width * p.scaleX
    h = el.height * p.scaleY
    cx = p.x + w / 2.0
    cy = p.y + h / 2.0
    cos_t = math.cos(p.rotation)
    sin_t = math.sin(p.rotation)
    xs = []
    ys = []
    for px, py in ((p.x, p.y), (p.x + w, p.y), (p.x + w, p.y + h), (p.x, p.y + h)):
        dx = px - cx
        dy = py - cy
        xs.append(cx + dx * cos_t - dy * sin_t)
        ys.append(cy + dx * sin_t + dy * cos_t)
    return (min(xs), min(ys), max(xs), max(ys))


def boxes_intersect(a, b):
    """AABB intersection test, inclusive of touching edges."""
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]
