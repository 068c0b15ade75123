"""Canonical (de)serialization for every value type.

One dict shape per type, field names identical to the wire format. The
canonical byte form (sorted keys, compact separators, shortest
round-trip floats) is what golden tests and the retention criterion
compare, so keep it boring and total: to_x(from_x(d)) must reproduce d.
"""

import json

from .canvas import CanvasState, Channel, EditEvent, Element, Pose
from .recorder import BlockSource, OpBlock, RecorderBuffer
from .timeline import (
    CompiledBehavior,
    Conflict,
    RebaseSpan,
    StructuralOp,
    Timeline,
    TimelineItem,
)


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def canonical_bytes(obj):
    return canonical_json(obj).encode("utf-8")


def _drop_none(d):
    return {k: v for k, v in d.items() if v is not None}


# -- canvas ------------------------------------------------------------

def pose_to_dict(p):
    return {"x": p.x, "y": p.y, "rotation": p.rotation, "scaleX": p.scaleX,
            "scaleY": p.scaleY, "zIndex": p.zIndex, "visible": p.visible}


def pose_from_dict(d):
    return Pose(x=d["x"], y=d["y"], rotation=d["rotation"], scaleX=d["scaleX"],
                scaleY=d["scaleY"], zIndex=d["zIndex"], visible=d["visible"])


def element_to_dict(el):
    return _drop_none({
        "id": el.id, "kind": el.kind, "width": el.width, "height": el.height,
        "pose": pose_to_dict(el.pose), "assetRef": el.assetRef, "label": el.label,
    })


def element_from_dict(d):
    return Element(id=d["id"], kind=d["kind"], width=d["width"], height=d["height"],
                   pose=pose_from_dict(d["pose"]), assetRef=d.get("assetRef"),
                   label=d.get("label"))


def canvas_to_dict(state):
    return {"elements": {eid: element_to_dict(el)
                         for eid, el in sorted(state.elements.items())},
            "version": state.version}


def canvas_from_dict(d):
    return CanvasState(elements={eid: element_from_dict(el)
                                 for eid, el in d["elements"].items()},
                       version=d["version"])


def event_to_dict(e):
    return _drop_none({
        "t": e.t, "workerId": e.workerId, "kind": e.kind,
        "element": element_to_dict(e.element) if e.element is not None else None,
        "elementId": e.elementId, "channel": e.channel, "value": e.value,
    })


def event_from_dict(d):
    element = element_from_dict(d["element"]) if d.get("element") else None
    element_id = d.get("elementId")
    if element_id is None and element is not None:
        element_id = element.id
    return EditEvent(t=d["t"], workerId=d["workerId"], kind=d["kind"],
                     element=element, elementId=element_id,
                     channel=d.get("channel"), value=d.get("value"))


def channel_to_dict(c):
    return {"name": c.name, "samples": [[t, v] for t, v in c.samples]}


def channel_from_dict(d):
    return Channel(name=d["name"], samples=tuple((t, v) for t, v in d["samples"]))


# -- recorder ----------------------------------------------------------

def block_to_dict(b):
    d = {"id": b.id, "elementId": b.elementId, "kind": b.kind,
         "duration": b.duration, "applyMode": b.applyMode}
    if b.channels:
        d["channels"] = [channel_to_dict(c) for c in b.channels]
    if b.payload is not None:
        d["payload"] = element_to_dict(b.payload)
    if b.source is not None:
        d["source"] = {"workerId": b.source.workerId, "recordedAt": b.source.recordedAt}
    return d


def block_from_dict(d):
    source = d.get("source")
    return OpBlock(
        id=d["id"], elementId=d["elementId"], kind=d["kind"],
        duration=d.get("duration", 0.0),
        channels=tuple(channel_from_dict(c) for c in d.get("channels", [])),
        payload=element_from_dict(d["payload"]) if d.get("payload") else None,
        source=BlockSource(workerId=source["workerId"],
                           recordedAt=source["recordedAt"]) if source else None,
        applyMode=d.get("applyMode", "absolute"))


def buffer_to_dict(buf):
    return _drop_none({
        "sessionId": buf.sessionId, "recordingWorkerId": buf.recordingWorkerId,
        "startedAt": buf.startedAt, "stoppedAt": buf.stoppedAt,
        "events": [event_to_dict(e) for e in buf.events],
    })


def buffer_from_dict(d):
    return RecorderBuffer(sessionId=d["sessionId"],
                          recordingWorkerId=d["recordingWorkerId"],
                          startedAt=d["startedAt"],
                          events=tuple(event_from_dict(e) for e in d["events"]),
                          stoppedAt=d.get("stoppedAt"))


# -- timeline ----------------------------------------------------------

def timeline_to_dict(tl):
    return {"items": [{"itemId": it.itemId, "blockId": it.blockId,
                       "startOffset": it.startOffset, "track": it.track}
                      for it in tl.items],
            "tick": tl.tick, "nextItem": tl.nextItem}


def timeline_from_dict(d):
    return Timeline(items=tuple(TimelineItem(itemId=it["itemId"], blockId=it["blockId"],
                                             startOffset=it["startOffset"],
                                             track=it["track"])
                                for it in d["items"]),
                    tick=d.get("tick", 20.0), nextItem=d.get("nextItem", 1))


def conflict_to_dict(c):
    return {"elementId": c.elementId, "channelName": c.channelName,
            "start": c.start, "end": c.end,
            "winnerItemId": c.winnerItemId, "loserItemId": c.loserItemId}


def conflict_from_dict(d):
    return Conflict(elementId=d["elementId"], channelName=d["channelName"],
                    start=d["start"], end=d["end"],
                    winnerItemId=d["winnerItemId"], loserItemId=d["loserItemId"])


def compiled_to_dict(cb):
    return {
        "duration": cb.duration,
        "tick": cb.tick,
        "bakedTracks": [{"elementId": eid, "channel": channel_to_dict(chan)}
                        for (eid, _), chan in sorted(cb.bakedTracks.items())],
        "structuralSchedule": [_drop_none({
            "t": op.t, "kind": op.kind, "elementId": op.elementId,
            "itemId": op.itemId, "track": op.track,
            "element": element_to_dict(op.element) if op.element else None})
            for op in cb.structuralSchedule],
        "conflicts": [conflict_to_dict(c) for c in cb.conflicts],
        "rebaseSpans": [{"elementId": s.elementId, "channel": s.channel,
                         "itemId": s.itemId, "start": s.start, "end": s.end,
                         "base": s.base} for s in cb.rebaseSpans],
    }


def compiled_from_dict(d):
    baked = {}
    for entry in d["bakedTracks"]:
        chan = channel_from_dict(entry["channel"])
        baked[(entry["elementId"], chan.name)] = chan
    return CompiledBehavior(
        duration=d["duration"], tick=d["tick"], bakedTracks=baked,
        structuralSchedule=tuple(StructuralOp(
            t=op["t"], kind=op["kind"], elementId=op["elementId"],
            itemId=op["itemId"], track=op.get("track", 0),
            element=element_from_dict(op["element"]) if op.get("element") else None)
            for op in d["structuralSchedule"]),
        conflicts=tuple(conflict_from_dict(c) for c in d["conflicts"]),
        rebaseSpans=tuple(RebaseSpan(
            elementId=s["elementId"], channel=s["channel"], itemId=s["itemId"],
            start=s["start"], end=s["end"], base=s["base"])
            for s in d["rebaseSpans"]))
