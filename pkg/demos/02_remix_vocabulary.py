"""A tour of the remix vocabulary on one recorded block.

Every function is pure: the original block survives untouched, so a
worker can keep re-remixing the same demonstration.
"""

import math

from crowdmix import (
    ease_in_out,
    make_instant,
    normalize,
    resize_trajectory,
    reverse,
    rotate_trajectory,
    set_duration,
    skip,
    smooth,
    stretch,
    trim,
)
from crowdmix.canvas import Channel, sample_channel
from crowdmix.recorder import OpBlock

# a jerky 2.4 s drag: fast at the start, long pause, lunge at the end
block = OpBlock(
    id="drag", elementId="box", kind="transform", duration=2400,
    channels=(
        Channel("x", ((0, 0.0), (300, 60.0), (1800, 70.0), (2400, 200.0))),
        Channel("y", ((0, 0.0), (300, 30.0), (1800, 35.0), (2400, 100.0))),
    ))


def describe(name, b):
    xs = [round(sample_channel(b.channel("x"), b.duration * k / 4), 1)
          for k in range(5)]
    print("  %-28s duration=%6.0f ms  x at quarters: %s" % (name, b.duration, xs))


print("original, then each remix of it:\n")
describe("(original)", block)
describe("stretch x2", stretch(block, 2))
describe("set-duration 1000", set_duration(block, 1000))
describe("trim [300, 1800]", trim(block, 300, 1800))
describe("skip (300, 1800)", skip(block, 300, 1800))
describe("normalize (constant speed)", normalize(block))
describe("smooth window=200", smooth(block, 200))
describe("ease-in-out", ease_in_out(block))
describe("reverse", reverse(block))
describe("resize trajectory x0.5", resize_trajectory(block, 0.5, 0.5))
describe("rotate trajectory 90deg", rotate_trajectory(block, math.pi / 2))

instant = make_instant(block)
print("\nmake-instant keeps only the final values:",
      instant.channel("x").samples, instant.channel("y").samples)

print("\nthe original is untouched:", block.channel("x").samples)
