"""Deterministic replay rendering: canonical frame JSON and per-tick SVG.

Byte-determinism is the point here; golden tests diff these outputs, so
floats go through repr (shortest round-trip) and element order is fixed.
"""

import math
import os

from .codec import canonical_bytes, canvas_to_dict
from .errors import NotCompiled, UnknownBehavior
from .timeline import replay

DEFAULT_SIZE = (1024, 768)

_FILL = {"image": "#c8c8c8", "shape": "#4a90d9", "text": "#333333"}


def find_behavior(archive, ref):
    """Look a behavior up by id, falling back to its name."""
    behavior = archive.behaviors.get(ref)
    if behavior is not None:
        return behavior
    for b in archive.behaviors.values():
        if b.name == ref:
            return b
    raise UnknownBehavior("no behavior %r" % (ref,))


def replay_frames(archive, ref):
    behavior = find_behavior(archive, ref)
    if behavior.compiled is None:
        raise NotCompiled("behavior %r has not been compiled" % (ref,))
    return replay(behavior.compiled, archive.canvas)


def frames_jsonl(frames):
    """One canonical JSON canvas state per line."""
    out = []
    for t, state in frames:
        line = dict(canvas_to_dict(state))
        line["t"] = t
        out.append(canonical_bytes(line))
    return b"\n".join(out) + b"\n"


def _num(x):
    return repr(float(x)) if isinstance(x, float) else repr(x)


def frame_svg(state, size=DEFAULT_SIZE):
    w, h = size
    lines = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'viewBox="0 0 %d %d">' % (w, h, w, h)
    ]
    order = sorted(state.elements.values(), key=lambda el: (el.pose.zIndex, el.id))
    for el in order:
        if not el.pose.visible:
            continue
        p = el.pose
        sw = el.width * p.scaleX
        sh = el.height * p.scaleY
        deg = math.degrees(p.rotation)
        transform = "translate(%s %s) rotate(%s %s %s)" % (
            _num(p.x), _num(p.y), _num(deg), _num(sw / 2.0), _num(sh / 2.0))
        lines.append('<g transform="%s">' % transform)
        if el.kind == "image":
            lines.append('<image href="asset:%s" width="%s" height="%s"/>'
                         % (el.assetRef, _num(sw), _num(sh)))
        elif el.kind == "text":
            lines.append('<text x="0" y="%s" font-size="%s" fill="%s">%s</text>'
                         % (_num(sh), _num(sh), _FILL["text"],
                            _escape(el.label or el.id)))
        else:
            lines.append('<rect width="%s" height="%s" fill="%s"/>'
                         % (_num(sw), _num(sh), _FILL["shape"]))
        lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def _escape(text):
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def render_svg_dir(frames, out_dir, size=DEFAULT_SIZE):
    os.makedirs(out_dir, exist_ok=True)
    names = []
    for i, (_, state) in enumerate(frames):
        name = "frame_%06d.svg" % i
        with open(os.path.join(out_dir, name), "w", encoding="utf-8") as f:
            f.write(frame_svg(state, size))
        names.append(name)
    return names
