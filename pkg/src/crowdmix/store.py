"""Behavior retention: documentation, trigger bindings, session persistence.

A behavior pairs the replayable visual change (compiled timeline) with the
two pieces of knowledge only humans supply: what triggers it and which
hidden relationships it encodes. Both are plain text by design; they are
collective memory for workers who join later, not executable rules.
"""

import base64
import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from .canvas import CanvasState, bounding_box, boxes_intersect
from .codec import (
    block_to_dict,
    block_from_dict,
    canonical_bytes,
    canvas_to_dict,
    canvas_from_dict,
    compiled_to_dict,
    compiled_from_dict,
    timeline_to_dict,
    timeline_from_dict,
)
from .errors import (
    DanglingReference,
    DuplicateName,
    EmptyDoc,
    InvalidName,
    InvalidValue,
    NotCompiled,
    SchemaMismatch,
    UnknownBehavior,
    UnknownElement,
)
from .ids import IdGen
from .timeline import CompiledBehavior, Timeline, compile_timeline

SCHEMA = "crowdmix/1"

ACTIVITIES = ("demonstrate", "remix", "document")


@dataclass(frozen=True)
class Behavior:
    id: str
    name: str
    triggerDoc: str = ""          # P1: what sets it off
    relationshipDoc: str = ""     # P3: non-visible states and relationships
    timeline: Timeline = field(default_factory=Timeline)
    compiled: Optional[CompiledBehavior] = None
    status: str = "draft"         # draft -> compiled -> documented
    version: int = 1


@dataclass(frozen=True)
class TriggerBinding:
    behaviorId: str
    kind: str                     # manual | overlap | onTop
    a: Optional[str] = None
    b: Optional[str] = None
    epsilon: float = 0.0


@dataclass
class SessionArchive:
    schema: str = SCHEMA
    canvas: CanvasState = field(default_factory=CanvasState)
    assets: Dict[str, bytes] = field(default_factory=dict)
    blocks: Dict[str, object] = field(default_factory=dict)
    behaviors: Dict[str, Behavior] = field(default_factory=dict)
    bindings: List[TriggerBinding] = field(default_factory=list)
    opLog: Optional[List[dict]] = None


class SessionStore:
    """Mutable session aggregate; all mutation goes through the sequencer."""

    def __init__(self, id_gen=None):
        self.canvas = CanvasState()
        self.assets = {}
        self.blocks = {}
        self.behaviors = {}
        self._by_name = {}
        self.bindings = []
        self.ids = id_gen or IdGen()

    # -- behaviors ------------------------------------------------------

    def create_behavior(self, name):
        if not name:
            raise InvalidName("behavior name must be non-empty")
        if name in self._by_name:
            raise DuplicateName("behavior %r already exists" % (name,))
        behavior = Behavior(id=self.ids.new("bhv"), name=name)
        self.behaviors[behavior.id] = behavior
        self._by_name[name] = behavior.id
        return behavior

    def get_behavior(self, behavior_id):
        behavior = self.behaviors.get(behavior_id)
        if behavior is None:
            raise UnknownBehavior("no behavior %r" % (behavior_id,))
        return behavior

    def set_timeline(self, behavior_id, timeline):
        behavior = self.get_behavior(behavior_id)
        behavior = replace(behavior, timeline=timeline, version=behavior.version + 1)
        self.behaviors[behavior_id] = behavior
        return behavior

    def compile_behavior(self, behavior_id, policy="lastWriterWins"):
        behavior = self.get_behavior(behavior_id)
        compiled = compile_timeline(behavior.timeline, self.blocks, policy)
        behavior = replace(
            behavior, compiled=compiled, version=behavior.version + 1,
            status="compiled" if behavior.status == "draft" else behavior.status)
        self.behaviors[behavior_id] = behavior
        return behavior

    def document(self, behavior_id, trigger_doc, relationship_doc):
        behavior = self.get_behavior(behavior_id)
        if behavior.status == "draft" or behavior.compiled is None:
            raise NotCompiled("document requires a compiled behavior")
        if not trigger_doc or not relationship_doc:
            raise EmptyDoc("trigger and relationship docs must be non-empty")
        behavior = replace(behavior, triggerDoc=trigger_doc,
                           relationshipDoc=relationship_doc,
                           status="documented", version=behavior.version + 1)
        self.behaviors[behavior_id] = behavior
        return behavior

    def check_binding(self, binding):
        """Validate a binding against the current session (no mutation)."""
        behavior = self.get_behavior(binding.behaviorId)
        if behavior.status == "draft" or behavior.compiled is None:
            raise NotCompiled("bind requires a compiled behavior")
        if binding.kind not in ("manual", "overlap", "onTop"):
            raise InvalidValue("unknown trigger kind %r" % (binding.kind,))
        if binding.kind != "manual":
            for element_id in (binding.a, binding.b):
                if element_id not in self.canvas.elements:
                    raise UnknownElement("no element %r" % (element_id,))

    def bind_trigger(self, binding):
        self.check_binding(binding)
        self.bindings.append(binding)
        return binding

    # -- persistence ------------------------------------------------------

    def to_archive(self, op_log=None):
        return SessionArchive(
            schema=SCHEMA, canvas=self.canvas, assets=dict(self.assets),
            blocks=dict(self.blocks), behaviors=dict(self.behaviors),
            bindings=list(self.bindings), opLog=op_log)

    def load_archive(self, archive):
        self.canvas = archive.canvas
        self.assets = dict(archive.assets)
        self.blocks = dict(archive.blocks)
        self.behaviors = dict(archive.behaviors)
        self._by_name = {b.name: b.id for b in archive.behaviors.values()}
        self.bindings = list(archive.bindings)


def _condition(binding, state):
    a = state.elements.get(binding.a)
    b = state.elements.get(binding.b)
    if a is None or b is None:
        return False
    box_a = bounding_box(a)
    box_b = bounding_box(b)
    if binding.kind == "overlap":
        return boxes_intersect(box_a, box_b)
    if binding.kind == "onTop":
        horizontal = box_a[0] <= box_b[2] and box_b[0] <= box_a[2]
        return horizontal and abs(box_a[3] - box_b[1]) <= binding.epsilon
    return False


def evaluate_triggers(prev, now, bindings):
    """Behavior ids whose geometric condition just became true.

    Edge-triggered: a condition that stays true fires once, then must go
    false before it can fire again. Manual bindings never fire here.
    """
    fired = []
    for binding in bindings:
        if binding.kind == "manual":
            continue
        if _condition(binding, now) and not _condition(binding, prev):
            fired.append(binding.behaviorId)
    return sorted(set(fired))


# -- archive (de)serialization ---------------------------------------------


def behavior_to_dict(b):
    d = {"id": b.id, "name": b.name, "triggerDoc": b.triggerDoc,
         "relationshipDoc": b.relationshipDoc,
         "timeline": timeline_to_dict(b.timeline),
         "status": b.status, "version": b.version}
    if b.compiled is not None:
        d["compiled"] = compiled_to_dict(b.compiled)
    return d


def behavior_from_dict(d):
    return Behavior(id=d["id"], name=d["name"], triggerDoc=d["triggerDoc"],
                    relationshipDoc=d["relationshipDoc"],
                    timeline=timeline_from_dict(d["timeline"]),
                    compiled=compiled_from_dict(d["compiled"]) if d.get("compiled") else None,
                    status=d["status"], version=d["version"])


def binding_to_dict(b):
    d = {"behaviorId": b.behaviorId, "kind": b.kind}
    if b.kind != "manual":
        d["a"] = b.a
        d["b"] = b.b
        d["epsilon"] = b.epsilon
    return d


def binding_from_dict(d):
    return TriggerBinding(behaviorId=d["behaviorId"], kind=d["kind"],
                          a=d.get("a"), b=d.get("b"),
                          epsilon=d.get("epsilon", 0.0))


def archive_to_dict(archive, asset_refs=None):
    """asset_refs: optional sha -> relative path map for external assets."""
    assets = {}
    for sha in sorted(archive.assets):
        if asset_refs and sha in asset_refs:
            assets[sha] = {"ref": asset_refs[sha]}
        else:
            assets[sha] = base64.b64encode(archive.assets[sha]).decode("ascii")
    d = {
        "schema": archive.schema,
        "canvas": canvas_to_dict(archive.canvas),
        "assets": assets,
        "blocks": [block_to_dict(archive.blocks[bid]) for bid in sorted(archive.blocks)],
        "behaviors": [behavior_to_dict(archive.behaviors[bid])
                      for bid in sorted(archive.behaviors)],
        "bindings": sorted((binding_to_dict(b) for b in archive.bindings),
                           key=canonical_bytes),
    }
    if archive.opLog is not None:
        d["opLog"] = archive.opLog
    return d


def _check_archive(archive):
    block_ids = set(archive.blocks)
    for behavior in archive.behaviors.values():
        for item in behavior.timeline.items:
            if item.blockId not in block_ids:
                raise DanglingReference(
                    "timeline of %r references missing block %r"
                    % (behavior.name, item.blockId))
    for block in archive.blocks.values():
        payload = getattr(block, "payload", None)
        if payload is not None and payload.assetRef is not None:
            if payload.assetRef not in archive.assets:
                raise DanglingReference("unresolved asset %r" % (payload.assetRef,))
    for el in archive.canvas.elements.values():
        if el.assetRef is not None and el.assetRef not in archive.assets:
            raise DanglingReference("unresolved asset %r" % (el.assetRef,))


def archive_from_dict(d, asset_loader=None):
    if d.get("schema") != SCHEMA:
        raise SchemaMismatch("unsupported schema %r" % (d.get("schema"),))
    assets = {}
    for sha, entry in d.get("assets", {}).items():
        if isinstance(entry, dict):
            if asset_loader is None:
                raise DanglingReference("external asset %r with no loader" % (sha,))
            data = asset_loader(entry["ref"])
            if hashlib.sha256(data).hexdigest() != sha:
                raise DanglingReference("asset %r fails its content hash" % (sha,))
            assets[sha] = data
        else:
            assets[sha] = base64.b64decode(entry)
    blocks = {}
    for bd in d.get("blocks", []):
        block = block_from_dict(bd)
        blocks[block.id] = block
    behaviors = {}
    for bd in d.get("behaviors", []):
        behavior = behavior_from_dict(bd)
        behaviors[behavior.id] = behavior
    archive = SessionArchive(
        schema=d["schema"], canvas=canvas_from_dict(d["canvas"]), assets=assets,
        blocks=blocks, behaviors=behaviors,
        bindings=[binding_from_dict(b) for b in d.get("bindings", [])],
        opLog=d.get("opLog"))
    _check_archive(archive)
    return archive


def save_session(archive):
    """Canonical session bytes; load_session(save_session(x)) == x."""
    return canonical_bytes(archive_to_dict(archive)) + b"\n"


def load_session(data):
    try:
        d = json.loads(data)
    except json.JSONDecodeError as e:
        raise SchemaMismatch("not a session file: %s" % (e,)) from e
    return archive_from_dict(d)


def save_session_dir(archive, path):
    """Write session.json plus content-addressed assets/ next to it."""
    import os

    os.makedirs(path, exist_ok=True)
    refs = {}
    if archive.assets:
        os.makedirs(os.path.join(path, "assets"), exist_ok=True)
        for sha in sorted(archive.assets):
            refs[sha] = "assets/%s" % sha
            with open(os.path.join(path, refs[sha]), "wb") as f:
                f.write(archive.assets[sha])
    with open(os.path.join(path, "session.json"), "wb") as f:
        f.write(canonical_bytes(archive_to_dict(archive, asset_refs=refs)) + b"\n")


def load_session_dir(path):
    import os

    with open(os.path.join(path, "session.json"), "rb") as f:
        d = json.loads(f.read())
    if d.get("schema") != SCHEMA:
        raise SchemaMismatch("unsupported schema %r" % (d.get("schema"),))

    def loader(ref):
        full = os.path.join(path, ref)
        if not os.path.exists(full):
            raise DanglingReference("missing asset file %r" % (ref,))
        with open(full, "rb") as f:
            return f.read()

    return archive_from_dict(d, asset_loader=loader)


def load_session_path(path):
    """Load either a session.json file or a session directory."""
    import os

    if os.path.isdir(path):
        return load_session_dir(path)
    with open(path, "rb") as f:
        data = f.read()
    d = json.loads(data)
    if d.get("schema") != SCHEMA:
        raise SchemaMismatch("unsupported schema %r" % (d.get("schema"),))
    base = os.path.dirname(os.path.abspath(path))

    def loader(ref):
        full = os.path.join(base, ref)
        if not os.path.exists(full):
            raise DanglingReference("missing asset file %r" % (ref,))
        with open(full, "rb") as f:
            return f.read()

    return archive_from_dict(d, asset_loader=loader)
