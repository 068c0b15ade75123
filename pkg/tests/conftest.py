import math
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from crowdmix.canvas import CanvasState, Channel, EditEvent, Element, Pose, apply_edit
from crowdmix.ids import IdGen
from crowdmix.recorder import OpBlock


@pytest.fixture
def ids():
    return IdGen(0)


@pytest.fixture
def ramp_block():
    """x goes 0 -> 100 linearly over 1000 ms."""
    return OpBlock(
        id="ramp", elementId="e1", kind="transform", duration=1000,
        channels=(Channel("x", ((0, 0.0), (1000, 100.0))),))


@pytest.fixture
def shape_element():
    return Element(id="e1", kind="shape", width=10, height=10)


@pytest.fixture
def base_state(shape_element):
    return apply_edit(CanvasState(), EditEvent.create(0, "w1", shape_element))


def make_block(block_id, element_id, channels, kind="transform", **kw):
    chans = tuple(Channel(name, tuple(samples)) for name, samples in channels)
    duration = max((c.samples[-1][0] for c in chans), default=0)
    return OpBlock(id=block_id, elementId=element_id, kind=kind,
                   duration=duration, channels=chans, **kw)
