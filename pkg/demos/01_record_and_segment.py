"""Demonstrate -> record -> segment.

A worker drags an element around, pauses, then drags again. The recorder
buffers the raw edit stream; segmentation turns it into per-element
operation blocks, splitting wherever the worker paused longer than the
gap threshold.
"""

from crowdmix import (
    CanvasState,
    EditEvent,
    Element,
    RecorderBuffer,
    apply_edit,
    record_event,
    segment,
    stop_recording,
)
from crowdmix.ids import IdGen

canvas = apply_edit(CanvasState(), EditEvent.create(
    0, "w1", Element(id="box", kind="shape", width=30, height=30)))

buf = RecorderBuffer(sessionId="demo", recordingWorkerId="w1", startedAt=0)

# gesture 1: a quick diagonal drag (events every ~40 ms)
for k in range(6):
    t = 100 + 40 * k
    buf = record_event(buf, EditEvent.set_property(t, "w1", "box", "x", 10.0 * k))
    buf = record_event(buf, EditEvent.set_property(t, "w1", "box", "y", 5.0 * k))

# ... the worker thinks for a second (greater than the 500 ms threshold) ...

# gesture 2: spin it upside down
import math
for k, rot in enumerate((1.0, 2.0, math.pi)):
    buf = record_event(buf, EditEvent.set_property(
        1500 + 100 * k, "w1", "box", "rotation", rot))

buf = stop_recording(buf, 2000)
blocks = segment(buf, gap_threshold=500, id_gen=IdGen(0))

print("recorded %d events -> %d blocks\n" % (len(buf.events), len(blocks)))
for b in blocks:
    channels = ", ".join("%s(%d keys)" % (c.name, len(c.samples))
                         for c in b.channels)
    print("  %s  %-9s  element=%s  start=%4d ms  duration=%4d ms  %s"
          % (b.id, b.kind, b.elementId, b.source.recordedAt, b.duration,
             channels))

print("\nthe drag block's x channel, re-zeroed to block start:")
print(" ", blocks[0].channel("x").samples)
