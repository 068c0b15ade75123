"""crowdmix: record, remix, and replay demonstrated canvas behaviors.

Workers demonstrate interactive behaviors by manipulating a shared sketch
canvas; the engine records the manipulations as element-wise operation
blocks, lets them be remixed and arranged on a timeline into one
replayable behavior, retains per-behavior documentation, and coordinates
concurrent workers through lease-based activity locks.
"""

from .canvas import (
    CanvasState,
    Channel,
    EditEvent,
    Element,
    Pose,
    apply_edit,
    bounding_box,
    sample_channel,
)
from .clock import SimClock, WallClock
from .errors import CrowdmixError
from .ids import IdGen
from .recorder import (
    OpBlock,
    RecorderBuffer,
    record_event,
    resample_block,
    segment,
    stop_recording,
)
from .remix import (
    apply_pipeline,
    apply_to_target,
    clone_block,
    ease_in_out,
    make_instant,
    normalize,
    reverse,
    resize_trajectory,
    rotate_trajectory,
    set_duration,
    skip,
    smooth,
    stretch,
    trim,
)
from .store import (
    Behavior,
    SessionArchive,
    SessionStore,
    TriggerBinding,
    evaluate_triggers,
    load_session,
    save_session,
)
from .timeline import (
    CompiledBehavior,
    Timeline,
    TimelineItem,
    compile_timeline,
    detect_conflicts,
    edit_item,
    place,
    replay,
)
from .server import ClientMirror, LocalClient, SessionServer

__version__ = "0.1.0"
