"""Authoritative real-time session server.

One logical sequencer per session: every accepted message becomes exactly
one (or a few) broadcast envelopes with gap-free seq numbers, and both the
server and every client mirror fold the same envelopes through the same
fold function, so late joiners reconstruct the server state exactly.

Locks are lease-scoped per (behavior, activity) with FIFO waiters; leases
expire on eval_tick so the session survives workers vanishing mid-task.
"""

import logging
from dataclasses import replace

from . import codec
from .canvas import CanvasState, EditEvent, apply_edit
from .clock import SimClock
from .errors import (
    CrowdmixError,
    DuplicateWorker,
    LockRequired,
    NotCompiled,
    NotHolder,
    NotRecording,
    UnknownBlock,
    UnknownSession,
    ValidationFailed,
)
from .ids import IdGen
from .recorder import RecorderBuffer, record_event, segment, stop_recording
from .remix import apply_pipeline, remix_fn_from_dict
from .store import (
    ACTIVITIES,
    SCHEMA,
    SessionStore,
    TriggerBinding,
    archive_to_dict,
    behavior_to_dict,
    behavior_from_dict,
    binding_to_dict,
    binding_from_dict,
    evaluate_triggers,
)
from .timeline import edit_item, place, replay

logger = logging.getLogger(__name__)

DEFAULT_LOCK_TTL = 30_000
DEFAULT_TICK_MS = 50

SERVER_WORKER = "server"


def _lock_key(behavior_id, activity):
    return "%s/%s" % (behavior_id, activity)


class SessionState:
    """Everything a broadcast envelope can change. Fold-only after init."""

    def __init__(self, store=None):
        self.store = store or SessionStore()
        self.locks = {}     # "behaviorId/activity" -> {holder, leaseExpiry, waiters}
        self.presence = {}  # workerId -> presence record

    def view_dict(self):
        store = self.store
        return {
            "canvas": codec.canvas_to_dict(store.canvas),
            "blocks": [codec.block_to_dict(store.blocks[b]) for b in sorted(store.blocks)],
            "behaviors": [behavior_to_dict(store.behaviors[b])
                          for b in sorted(store.behaviors)],
            "bindings": [binding_to_dict(b) for b in store.bindings],
            "locks": {k: {"holder": v["holder"], "leaseExpiry": v["leaseExpiry"],
                          "waiters": list(v["waiters"])}
                      for k, v in sorted(self.locks.items())},
            "presence": {w: dict(p) for w, p in sorted(self.presence.items())},
        }

    @staticmethod
    def from_view_dict(d):
        state = SessionState()
        store = state.store
        store.canvas = codec.canvas_from_dict(d["canvas"])
        for bd in d["blocks"]:
            block = codec.block_from_dict(bd)
            store.blocks[block.id] = block
        for bd in d["behaviors"]:
            behavior = behavior_from_dict(bd)
            store.behaviors[behavior.id] = behavior
            store._by_name[behavior.name] = behavior.id
        store.bindings = [binding_from_dict(b) for b in d["bindings"]]
        state.locks = {k: {"holder": v["holder"], "leaseExpiry": v["leaseExpiry"],
                           "waiters": list(v["waiters"])}
                       for k, v in d["locks"].items()}
        state.presence = {w: dict(p) for w, p in d["presence"].items()}
        return state

    # -- the one fold --------------------------------------------------

    def fold(self, env):
        """Apply one broadcast envelope. Assumes the server validated it."""
        kind = env["type"]
        payload = env["payload"]
        store = self.store
        if kind == "editApplied":
            store.canvas = apply_edit(store.canvas,
                                      codec.event_from_dict(payload["event"]))
        elif kind == "blockCreated":
            block = codec.block_from_dict(payload["block"])
            store.blocks[block.id] = block
        elif kind == "behaviorCreated":
            behavior = behavior_from_dict(payload["behavior"])
            store.behaviors[behavior.id] = behavior
            store._by_name[behavior.name] = behavior.id
        elif kind == "timelineEdited":
            behavior = store.behaviors[payload["behaviorId"]]
            store.behaviors[behavior.id] = replace(
                behavior, timeline=codec.timeline_from_dict(payload["timeline"]),
                version=payload["version"])
        elif kind == "behaviorCompiled":
            behavior = store.behaviors[payload["behaviorId"]]
            store.behaviors[behavior.id] = replace(
                behavior, compiled=codec.compiled_from_dict(payload["compiled"]),
                status=payload["status"], version=payload["version"])
        elif kind == "behaviorDocumented":
            behavior = store.behaviors[payload["behaviorId"]]
            store.behaviors[behavior.id] = replace(
                behavior, triggerDoc=payload["triggerDoc"],
                relationshipDoc=payload["relationshipDoc"],
                status=payload["status"], version=payload["version"])
        elif kind == "triggerBound":
            store.bindings.append(binding_from_dict(payload["binding"]))
        elif kind == "presenceUpdate":
            worker = payload["workerId"]
            action = payload["action"]
            if action == "join":
                self.presence[worker] = {
                    "workerId": worker, "joinedAt": payload["joinedAt"],
                    "cursor": payload.get("cursor"),
                    "activity": payload.get("activity", "")}
            elif action == "leave":
                self.presence.pop(worker, None)
                for key in list(self.locks):
                    lock = self.locks[key]
                    if worker in lock["waiters"]:
                        lock["waiters"].remove(worker)
                    if lock["holder"] is None and not lock["waiters"]:
                        del self.locks[key]
            else:
                record = self.presence.get(worker)
                if record is not None:
                    if "cursor" in payload:
                        record["cursor"] = payload["cursor"]
                    if "activity" in payload:
                        record["activity"] = payload["activity"]
        elif kind == "lockGranted":
            key = _lock_key(payload["behaviorId"], payload["activity"])
            lock = self.locks.setdefault(
                key, {"holder": None, "leaseExpiry": None, "waiters": []})
            lock["holder"] = payload["holder"]
            lock["leaseExpiry"] = payload["leaseExpiry"]
            if payload["holder"] in lock["waiters"]:
                lock["waiters"].remove(payload["holder"])
        elif kind == "lockDenied":
            key = _lock_key(payload["behaviorId"], payload["activity"])
            lock = self.locks.setdefault(
                key, {"holder": None, "leaseExpiry": None, "waiters": []})
            if payload["workerId"] not in lock["waiters"]:
                lock["waiters"].append(payload["workerId"])
        elif kind == "lockReleased":
            key = _lock_key(payload["behaviorId"], payload["activity"])
            lock = self.locks.get(key)
            if lock is not None:
                lock["holder"] = None
                lock["leaseExpiry"] = None
                if not lock["waiters"]:
                    del self.locks[key]
        elif kind in ("recordingStarted", "recordingStopped",
                      "behaviorStarted", "behaviorFrame", "behaviorEnded"):
            pass  # transient notifications; canvas changes arrive as editApplied
        else:
            logger.warning("fold: ignoring unknown envelope type %r", kind)


class ClientMirror:
    """Client-side session replica: snapshot + in-order envelope folding.

    Out-of-order envelopes are buffered until the gap fills.
    """

    def __init__(self, snapshot):
        self.sessionId = snapshot["sessionId"]
        self.seq = snapshot["seq"]
        self.state = SessionState.from_view_dict(snapshot["state"])
        self._pending = {}

    def apply(self, env):
        if env["seq"] <= self.seq:
            return  # duplicate
        self._pending[env["seq"]] = env
        while self.seq + 1 in self._pending:
            self.seq += 1
            self.state.fold(self._pending.pop(self.seq))

    def view_dict(self):
        return self.state.view_dict()


class LocalClient:
    """In-process transport endpoint: broadcasts pile up in .inbox."""

    def __init__(self, worker_id):
        self.workerId = worker_id
        self.inbox = []

    def deliver(self, env):
        self.inbox.append(env)


class _Playback:
    __slots__ = ("behaviorId", "startedAt", "frames", "next")

    def __init__(self, behavior_id, started_at, frames):
        self.behaviorId = behavior_id
        self.startedAt = started_at
        self.frames = frames  # [(t, [EditEvent, ...])]
        self.next = 0


class _Session:
    def __init__(self, session_id, clock, lock_ttl, id_seed=None):
        self.sessionId = session_id
        self.clock = clock
        self.lockTtl = lock_ttl
        self.seq = 0
        self.log = []
        self.state = SessionState(SessionStore(IdGen(id_seed)))
        self.clients = {}
        self.recorders = {}        # behaviorId -> RecorderBuffer
        self.gap_thresholds = {}   # behaviorId -> ms
        self.playing = []          # [_Playback]
        self.trigger_prev = self.state.store.canvas

    @property
    def store(self):
        return self.state.store

    # -- broadcast plumbing ---------------------------------------------

    def broadcast(self, kind, payload, worker_id=SERVER_WORKER, server_time=None):
        self.seq += 1
        env = {
            "seq": self.seq,
            "type": kind,
            "sessionId": self.sessionId,
            "workerId": worker_id,
            "serverTime": self.clock.now() if server_time is None else server_time,
            "payload": payload,
        }
        self.state.fold(env)
        self.log.append(env)
        for client in self.clients.values():
            client.deliver(env)
        return env

    # -- locks ------------------------------------------------------------

    def _lock(self, key):
        return self.state.locks.get(key)

    def _expire_scope(self, behavior_id, activity, now):
        key = _lock_key(behavior_id, activity)
        lock = self._lock(key)
        if lock and lock["holder"] is not None and lock["leaseExpiry"] <= now:
            self.broadcast("lockReleased", {
                "behaviorId": behavior_id, "activity": activity,
                "holder": lock["holder"], "cause": "expired"})
            self._promote(behavior_id, activity, now)

    def _promote(self, behavior_id, activity, now):
        lock = self._lock(_lock_key(behavior_id, activity))
        if lock and lock["holder"] is None and lock["waiters"]:
            self.broadcast("lockGranted", {
                "behaviorId": behavior_id, "activity": activity,
                "holder": lock["waiters"][0], "leaseExpiry": now + self.lockTtl,
                "renewed": False})

    def holds_lock(self, behavior_id, activity, worker_id, now):
        lock = self._lock(_lock_key(behavior_id, activity))
        return (lock is not None and lock["holder"] == worker_id
                and lock["leaseExpiry"] > now)

    def expire_locks(self, now):
        for key in sorted(self.state.locks):
            behavior_id, activity = key.rsplit("/", 1)
            self._expire_scope(behavior_id, activity, now)

    # -- firing ------------------------------------------------------------

    def start_fire(self, behavior_id, cause):
        behavior = self.store.get_behavior(behavior_id)
        if behavior.compiled is None:
            raise NotCompiled("behavior %r has not been compiled" % (behavior_id,))
        if any(p.behaviorId == behavior_id for p in self.playing):
            raise ValidationFailed("behavior %r is already playing" % (behavior_id,),
                                   cause="AlreadyPlaying")
        now = self.clock.now()
        frames = replay(behavior.compiled, self.store.canvas)
        edit_frames = []
        prev = self.store.canvas
        for t, state in frames:
            edit_frames.append((t, _diff_states(prev, state, t)))
            prev = state
        env = self.broadcast("behaviorStarted", {
            "behaviorId": behavior_id, "cause": cause,
            "duration": behavior.compiled.duration})
        self.playing.append(_Playback(behavior_id, now, edit_frames))
        return env

    def pump_fires(self, now):
        for playback in list(self.playing):
            while playback.next < len(playback.frames):
                frame_t, edits = playback.frames[playback.next]
                due = playback.startedAt + frame_t
                if due > now:
                    break
                playback.next += 1
                self.broadcast("behaviorFrame",
                               {"behaviorId": playback.behaviorId, "t": frame_t},
                               server_time=due)
                for event in edits:
                    event = replace(event, t=due)
                    try:
                        apply_edit(self.store.canvas, event)
                    except CrowdmixError:
                        continue  # live edits interfered; drop this write
                    self.broadcast("editApplied",
                                   {"event": codec.event_to_dict(event)},
                                   server_time=due)
            if playback.next >= len(playback.frames):
                self.broadcast("behaviorEnded", {"behaviorId": playback.behaviorId})
                self.playing.remove(playback)


def _diff_states(prev, new, t):
    """Edits that turn prev into new (deletes, creates, then channel sets)."""
    edits = []
    for element_id in sorted(prev.elements):
        if element_id not in new.elements:
            edits.append(EditEvent.delete(t, SERVER_WORKER, element_id))
    for element_id in sorted(new.elements):
        if element_id not in prev.elements:
            edits.append(EditEvent.create(t, SERVER_WORKER, new.elements[element_id]))
    for element_id in sorted(new.elements):
        old = prev.elements.get(element_id)
        if old is None:
            continue
        pose_new = new.elements[element_id].pose
        pose_old = old.pose
        for name in ("x", "y", "rotation", "scaleX", "scaleY", "zIndex", "visible"):
            value = getattr(pose_new, name)
            if getattr(pose_old, name) != value:
                edits.append(EditEvent.set_property(t, SERVER_WORKER,
                                                    element_id, name, value))
    return edits


class SessionServer:
    """Hosts independent sessions; one logical sequencer per session."""

    def __init__(self, clock=None, lock_ttl_ms=DEFAULT_LOCK_TTL,
                 tick_ms=DEFAULT_TICK_MS, id_seed=0):
        self.clock = clock or SimClock()
        self.lockTtl = lock_ttl_ms
        self.tickMs = tick_ms
        self.idSeed = id_seed
        self.sessions = {}

    def create_session(self, session_id):
        if session_id in self.sessions:
            raise ValidationFailed("session %r already exists" % (session_id,),
                                   cause="DuplicateSession")
        self.sessions[session_id] = _Session(session_id, self.clock, self.lockTtl,
                                             self.idSeed)
        return self.sessions[session_id]

    def session(self, session_id):
        s = self.sessions.get(session_id)
        if s is None:
            raise UnknownSession("no session %r" % (session_id,))
        return s

    def load_archive(self, session_id, archive):
        self.session(session_id).store.load_archive(archive)

    # -- connection lifecycle -------------------------------------------

    def join(self, session_id, worker_id, client=None):
        """Register a worker; returns the snapshot message.

        The snapshot reflects every broadcast with seq <= snapshot.seq and
        the worker's own presence arrives as the next broadcast, so a
        mirror built from the snapshot stays gap-free.
        """
        s = self.session(session_id)
        if worker_id in s.clients:
            raise DuplicateWorker("worker %r already connected" % (worker_id,))
        snapshot = {
            "type": "snapshot",
            "sessionId": session_id,
            "workerId": worker_id,
            "seq": s.seq,
            "serverTime": self.clock.now(),
            "state": s.state.view_dict(),
        }
        s.clients[worker_id] = client or LocalClient(worker_id)
        s.broadcast("presenceUpdate",
                    {"workerId": worker_id, "action": "join",
                     "joinedAt": self.clock.now(), "cursor": None, "activity": ""},
                    worker_id=worker_id)
        return snapshot

    def disconnect(self, session_id, worker_id):
        s = self.session(session_id)
        if worker_id not in s.clients:
            return
        del s.clients[worker_id]
        # buffers of a vanished recorder are dropped; blocks only exist on stop
        for behavior_id in [b for b, buf in s.recorders.items()
                            if buf.recordingWorkerId == worker_id]:
            del s.recorders[behavior_id]
            s.gap_thresholds.pop(behavior_id, None)
        s.broadcast("presenceUpdate", {"workerId": worker_id, "action": "leave"},
                    worker_id=worker_id)
        now = self.clock.now()
        for key in sorted(s.state.locks):
            lock = s.state.locks.get(key)
            if lock is not None and lock["holder"] == worker_id:
                behavior_id, activity = key.rsplit("/", 1)
                s.broadcast("lockReleased", {
                    "behaviorId": behavior_id, "activity": activity,
                    "holder": worker_id, "cause": "disconnect"})
                s._promote(behavior_id, activity, now)

    # -- message dispatch -------------------------------------------------

    def submit(self, session_id, worker_id, message):
        """Validate and apply one client message.

        Returns the primary broadcast envelope on success, or a
        non-broadcast error reply (no seq consumed) on rejection.
        """
        s = self.session(session_id)
        kind = message.get("type")
        try:
            if worker_id not in s.clients and kind != "hello":
                raise ValidationFailed("worker %r has not joined" % (worker_id,),
                                       cause="NotJoined")
            handler = getattr(self, "_msg_%s" % kind, None)
            if handler is None:
                raise ValidationFailed("unknown message type %r" % (kind,),
                                       cause="UnknownType")
            return handler(s, worker_id, message)
        except ValidationFailed as e:
            return _error_reply(kind, e.cause, str(e))
        except CrowdmixError as e:
            return _error_reply(kind, e.code, str(e))
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            return _error_reply(kind, "ValidationFailed", "malformed payload: %s" % (e,))

    # individual message handlers; each either broadcasts or raises

    def _msg_hello(self, s, worker_id, message):
        if message.get("protocol") != SCHEMA:
            raise ValidationFailed("unsupported protocol %r" % (message.get("protocol"),),
                                   cause="SchemaMismatch")
        return {"type": "helloAck", "protocol": SCHEMA, "sessionId": s.sessionId}

    def _msg_edit(self, s, worker_id, message):
        raw = dict(message["event"])
        raw.setdefault("t", 0)            # server-stamped below
        raw.setdefault("workerId", worker_id)
        event = codec.event_from_dict(raw)
        event = replace(event, t=self.clock.now(), workerId=worker_id)
        target = event.elementId if event.elementId is not None else event.element.id
        for behavior_id, buf in s.recorders.items():
            if buf.recordingWorkerId == worker_id:
                continue
            touched = {e.elementId for e in buf.events}
            if target in touched:
                raise LockRequired(
                    "element %r is being demonstrated for behavior %r"
                    % (target, behavior_id))
        apply_edit(s.store.canvas, event)  # validate before consuming a seq
        env = s.broadcast("editApplied", {"event": codec.event_to_dict(event)},
                          worker_id=worker_id)
        for behavior_id, buf in list(s.recorders.items()):
            if buf.recordingWorkerId == worker_id:
                s.recorders[behavior_id] = record_event(buf, event)
        return env

    def _msg_presence(self, s, worker_id, message):
        payload = {"workerId": worker_id, "action": "update"}
        if "cursor" in message:
            payload["cursor"] = message["cursor"]
        if "activity" in message:
            payload["activity"] = message["activity"]
        return s.broadcast("presenceUpdate", payload, worker_id=worker_id)

    def _msg_createBehavior(self, s, worker_id, message):
        behavior = s.store.create_behavior(message["name"])
        return s.broadcast("behaviorCreated",
                           {"behavior": behavior_to_dict(behavior)},
                           worker_id=worker_id)

    def _msg_lockAcquire(self, s, worker_id, message):
        behavior_id = message["behaviorId"]
        activity = message["activity"]
        if activity not in ACTIVITIES:
            raise ValidationFailed("unknown activity %r" % (activity,),
                                   cause="UnknownActivity")
        s.store.get_behavior(behavior_id)  # UnknownBehavior
        now = self.clock.now()
        s._expire_scope(behavior_id, activity, now)
        lock = s._lock(_lock_key(behavior_id, activity))
        if lock is None or lock["holder"] is None or lock["holder"] == worker_id:
            renewed = lock is not None and lock["holder"] == worker_id
            return s.broadcast("lockGranted", {
                "behaviorId": behavior_id, "activity": activity,
                "holder": worker_id, "leaseExpiry": now + s.lockTtl,
                "renewed": renewed}, worker_id=worker_id)
        waiters = lock["waiters"]
        position = (waiters.index(worker_id) + 1 if worker_id in waiters
                    else len(waiters) + 1)
        return s.broadcast("lockDenied", {
            "behaviorId": behavior_id, "activity": activity,
            "workerId": worker_id, "position": position}, worker_id=worker_id)

    def _msg_lockRelease(self, s, worker_id, message):
        behavior_id = message["behaviorId"]
        activity = message["activity"]
        lock = s._lock(_lock_key(behavior_id, activity))
        if lock is None or lock["holder"] != worker_id:
            raise NotHolder("%r does not hold %s/%s"
                            % (worker_id, behavior_id, activity))
        env = s.broadcast("lockReleased", {
            "behaviorId": behavior_id, "activity": activity,
            "holder": worker_id, "cause": "released"}, worker_id=worker_id)
        s._promote(behavior_id, activity, self.clock.now())
        return env

    def _msg_startRecording(self, s, worker_id, message):
        behavior_id = message["behaviorId"]
        s.store.get_behavior(behavior_id)
        now = self.clock.now()
        if not s.holds_lock(behavior_id, "demonstrate", worker_id, now):
            raise LockRequired("demonstrate lock on %r required" % (behavior_id,))
        if behavior_id in s.recorders:
            raise ValidationFailed("behavior %r is already being recorded"
                                   % (behavior_id,), cause="AlreadyRecording")
        s.recorders[behavior_id] = RecorderBuffer(
            sessionId=s.sessionId, recordingWorkerId=worker_id, startedAt=now)
        s.gap_thresholds[behavior_id] = message.get("gapThreshold", 500)
        return s.broadcast("recordingStarted",
                           {"behaviorId": behavior_id, "workerId": worker_id,
                            "startedAt": now}, worker_id=worker_id)

    def _msg_stopRecording(self, s, worker_id, message):
        behavior_id = message["behaviorId"]
        buf = s.recorders.get(behavior_id)
        if buf is None or buf.recordingWorkerId != worker_id:
            raise NotRecording("no active recording of %r by %r"
                               % (behavior_id, worker_id))
        del s.recorders[behavior_id]
        threshold = s.gap_thresholds.pop(behavior_id, 500)
        buf = stop_recording(buf, self.clock.now())
        blocks = segment(buf, threshold, s.store.ids) if buf.events else []
        env = s.broadcast("recordingStopped", {
            "behaviorId": behavior_id, "workerId": worker_id,
            "blockIds": [b.id for b in blocks]}, worker_id=worker_id)
        for block in blocks:
            s.broadcast("blockCreated", {"block": codec.block_to_dict(block)},
                        worker_id=worker_id)
        return env

    def _msg_remix(self, s, worker_id, message):
        behavior_id = message["behaviorId"]
        s.store.get_behavior(behavior_id)
        if not s.holds_lock(behavior_id, "remix", worker_id, self.clock.now()):
            raise LockRequired("remix lock on %r required" % (behavior_id,))
        block = s.store.blocks.get(message["blockId"])
        if block is None:
            raise UnknownBlock("no block %r" % (message["blockId"],))
        fns = [remix_fn_from_dict(fd) for fd in message["fns"]]
        result = apply_pipeline(block, fns, s.store.ids)
        result = replace(result, id=s.store.ids.new("blk"))
        return s.broadcast("blockCreated", {"block": codec.block_to_dict(result)},
                           worker_id=worker_id)

    def _msg_timelineEdit(self, s, worker_id, message):
        behavior_id = message["behaviorId"]
        behavior = s.store.get_behavior(behavior_id)
        if not s.holds_lock(behavior_id, "remix", worker_id, self.clock.now()):
            raise LockRequired("remix lock on %r required" % (behavior_id,))
        action = message["action"]
        op = action["op"]
        tl = behavior.timeline
        if op == "place":
            tl = place(tl, s.store.blocks, action["blockId"],
                       action["startOffset"], action.get("track", 0))
        elif op == "move":
            tl = edit_item(tl, action["itemId"],
                           new_offset=action.get("startOffset"),
                           new_track=action.get("track"))
        elif op == "remove":
            tl = edit_item(tl, action["itemId"], remove=True)
        else:
            raise ValidationFailed("unknown timeline op %r" % (op,),
                                   cause="UnknownType")
        behavior = s.store.set_timeline(behavior_id, tl)
        return s.broadcast("timelineEdited", {
            "behaviorId": behavior_id,
            "timeline": codec.timeline_to_dict(behavior.timeline),
            "version": behavior.version}, worker_id=worker_id)

    def _msg_compile(self, s, worker_id, message):
        behavior_id = message["behaviorId"]
        s.store.get_behavior(behavior_id)
        if not s.holds_lock(behavior_id, "remix", worker_id, self.clock.now()):
            raise LockRequired("remix lock on %r required" % (behavior_id,))
        behavior = s.store.compile_behavior(behavior_id,
                                            message.get("policy", "lastWriterWins"))
        return s.broadcast("behaviorCompiled", {
            "behaviorId": behavior_id,
            "compiled": codec.compiled_to_dict(behavior.compiled),
            "status": behavior.status, "version": behavior.version},
            worker_id=worker_id)

    def _msg_document(self, s, worker_id, message):
        behavior_id = message["behaviorId"]
        s.store.get_behavior(behavior_id)
        if not s.holds_lock(behavior_id, "document", worker_id, self.clock.now()):
            raise LockRequired("document lock on %r required" % (behavior_id,))
        behavior = s.store.document(behavior_id, message["triggerDoc"],
                                    message["relationshipDoc"])
        return s.broadcast("behaviorDocumented", {
            "behaviorId": behavior_id, "triggerDoc": behavior.triggerDoc,
            "relationshipDoc": behavior.relationshipDoc,
            "status": behavior.status, "version": behavior.version},
            worker_id=worker_id)

    def _msg_bindTrigger(self, s, worker_id, message):
        binding = binding_from_dict(message["binding"])
        if not s.holds_lock(binding.behaviorId, "document", worker_id,
                            self.clock.now()):
            s.store.get_behavior(binding.behaviorId)
            raise LockRequired("document lock on %r required" % (binding.behaviorId,))
        s.store.check_binding(binding)  # the triggerBound fold appends it
        return s.broadcast("triggerBound", {"binding": binding_to_dict(binding)},
                           worker_id=worker_id)

    def _msg_fire(self, s, worker_id, message):
        env = s.start_fire(message["behaviorId"], "manual")
        s.pump_fires(self.clock.now())
        return env

    # -- clock-driven work -------------------------------------------------

    def eval_tick(self, session_id, now=None):
        """Expire leases, emit due behavior frames, evaluate triggers."""
        s = self.session(session_id)
        now = self.clock.now() if now is None else now
        s.expire_locks(now)
        s.pump_fires(now)
        fired = evaluate_triggers(s.trigger_prev, s.store.canvas, s.store.bindings)
        for behavior_id in fired:
            try:
                s.start_fire(behavior_id, "trigger")
            except (CrowdmixError, ValidationFailed):
                continue
        if fired:
            s.pump_fires(now)
        s.trigger_prev = s.store.canvas

    def eval_all(self, now=None):
        for session_id in sorted(self.sessions):
            self.eval_tick(session_id, now)


def _error_reply(attempted, code, detail):
    return {"type": "error", "attempted": attempted, "code": code, "detail": detail}
