"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
output. Tolerances are pinned here and nowhere else.
"""

import json
import random
import time

import pytest

from crowdmix.canvas import CanvasState, EditEvent, Element, sample_channel
from crowdmix.clock import SimClock
from crowdmix.codec import canonical_bytes, canvas_to_dict
from crowdmix.ids import IdGen
from crowdmix.recorder import RecorderBuffer, record_event, resample_block, segment, stop_recording
from crowdmix.remix import (
    ease_in_out,
    make_instant,
    normalize,
    reverse,
    set_duration,
    skip,
    smooth,
    stretch,
    trim,
)
from crowdmix.render import frames_jsonl, render_svg_dir, replay_frames
from crowdmix.scenario import parse_scenario, run_scenario
from crowdmix.server import ClientMirror, LocalClient, SessionServer
from crowdmix.store import load_session, save_session
from crowdmix.timeline import Timeline, compile_timeline, place, replay

from oracles import NaiveTimelineOracle
from test_remix import random_transform_block
from test_server import edit_create, edit_set, shape, setup_behavior
from turtle import build_turtle_scenario


def _report(n, text):
    print("\n[ACCEPTANCE %d] %s: PASS" % (n, text))


class TestCriterion1RemixAlgebra:
    N_BLOCKS = 1000

    def test_remix_algebra_suite(self):
        t0 = time.perf_counter()
        rng = random.Random(20260809)
        for i in range(self.N_BLOCKS):
            block = random_transform_block(rng)

            # involution: exact identity on the sample lists
            assert reverse(reverse(block)) == block

            # stretch inverse within 1e-6 after resampling
            f = rng.uniform(0.25, 4.0)
            back = stretch(stretch(block, f), 1.0 / f)
            rb = resample_block(block, 20)
            rback = resample_block(back, 20)
            for c in rb.channels:
                cc = rback.channel(c.name)
                for t, v in c.samples:
                    assert abs(sample_channel(cc, min(t, back.duration)) - v) < 1e-6

            # duration laws, exact
            assert stretch(block, f).duration == block.duration * f
            lo, hi = sorted(rng.sample(range(0, int(block.duration) + 1), 2))
            if lo < hi:
                assert trim(block, lo, hi).duration == hi - lo
                assert skip(block, lo, hi).duration == block.duration - (hi - lo)
            assert reverse(block).duration == block.duration
            assert make_instant(block).duration == 0
            assert set_duration(block, 1000).duration == 1000

            # endpoint laws within 1e-9 (cheaper ops every round, the
            # resampling ones on a rotation)
            ops = [reverse]
            if i % 10 == 0:
                ops += [lambda b: smooth(b, 100), ease_in_out, normalize]
            for op in ops:
                out = op(block)
                assert out.duration == block.duration
                for c in block.channels:
                    oc = out.channel(c.name)
                    first, last = c.samples[0][1], c.samples[-1][1]
                    if op is reverse:
                        first, last = last, first
                    assert abs(oc.samples[0][1] - first) < 1e-9
                    assert abs(oc.samples[-1][1] - last) < 1e-9
        elapsed = time.perf_counter() - t0
        assert elapsed < 10, "remix algebra took %.1fs" % elapsed
        _report(1, "remix algebra on %d random blocks in %.1fs"
                % (self.N_BLOCKS, elapsed))


class TestCriterion2OracleEquivalence:
    N_TIMELINES = 100

    def _random_timeline(self, rng):
        elements = ["e1", "e2", "e3"]
        initial = CanvasState()
        for eid in elements:
            initial = CanvasState(
                elements={**initial.elements,
                          eid: Element(id=eid, kind="shape", width=8, height=8)},
                version=initial.version + 1)
        blocks = {}
        tl = Timeline(tick=20)
        deleted = set()
        created = 0
        for i in range(rng.randint(1, 5)):
            roll = rng.random()
            if roll < 0.15:
                created += 1
                el = Element(id="new%d" % created, kind="shape", width=3, height=3)
                from conftest import make_block
                block = make_block("c%d" % i, el.id, [], kind="create", payload=el)
            elif roll < 0.3 and len(deleted) < len(elements) - 1:
                victim = rng.choice([e for e in elements if e not in deleted])
                deleted.add(victim)
                from conftest import make_block
                block = make_block("d%d" % i, victim, [], kind="delete")
            else:
                block = random_transform_block(rng, rng.choice(elements),
                                               max_t=1500)
            blocks[block.id] = block
            tl = place(tl, blocks, block.id, rng.randrange(0, 2000),
                       track=rng.randrange(0, 4))
        return tl, blocks, initial

    def test_compile_replay_equals_naive_oracle(self):
        t0 = time.perf_counter()
        rng = random.Random(48151623)
        for trial in range(self.N_TIMELINES):
            tl, blocks, initial = self._random_timeline(rng)
            got = replay(compile_timeline(tl, blocks), initial)
            expected = NaiveTimelineOracle(tl.items, blocks, tl.tick).run(initial)
            assert got == expected, "trial %d diverged" % trial
        elapsed = time.perf_counter() - t0
        assert elapsed < 30, "oracle equivalence took %.1fs" % elapsed
        _report(2, "%d random timelines replay exactly like the naive "
                   "oracle in %.1fs" % (self.N_TIMELINES, elapsed))


class TestCriterion3MarioTurtle:
    def test_end_to_end_scenario(self):
        t0 = time.perf_counter()
        report, server = run_scenario(
            parse_scenario(json.dumps(build_turtle_scenario(fire=True))))
        elapsed = time.perf_counter() - t0
        for line in report.lines():
            assert line.startswith("ok"), line
        state = server.session("main").store
        assert "turtle" not in state.canvas.elements
        assert "shell" in state.canvas.elements
        behavior = state.behaviors["bhv-0001"]
        assert behavior.compiled.duration == 1000
        assert elapsed < 1.0, "scenario took %.2fs wall" % elapsed
        _report(3, "mario-turtle demonstrate/remix/arrange/fire scenario "
                   "(duration exactly 1000 ms) in %.2fs wall" % elapsed)


class TestCriterion4RenderDeterminism:
    def test_five_renders_byte_identical(self, tmp_path):
        report, server = run_scenario(
            parse_scenario(json.dumps(build_turtle_scenario(fire=False))))
        assert report.passed
        archive = server.session("main").store.to_archive()
        jsonl_runs = set()
        svg_runs = set()
        for i in range(5):
            frames = replay_frames(archive, "bhv-0001")
            jsonl_runs.add(frames_jsonl(frames))
            out = tmp_path / ("svg%d" % i)
            render_svg_dir(frames, str(out))
            svg_runs.add(tuple(sorted(
                (p.name, p.read_bytes()) for p in out.iterdir())))
        assert len(jsonl_runs) == 1
        assert len(svg_runs) == 1
        _report(4, "render_replay x5 byte-identical (framesJsonl + svgDir)")


class TestCriterion5LockSafety:
    N_OPS = 500
    TTL = 2000
    TICK = 50

    def test_randomized_lock_schedule(self):
        rng = random.Random(90125)
        clock = SimClock()
        server = SessionServer(clock=clock, lock_ttl_ms=self.TTL,
                               tick_ms=self.TICK)
        server.create_session("s")
        workers = ["w1", "w2", "w3"]
        for w in workers:
            server.join("s", w)
        server.submit("s", "w1", {"type": "createBehavior", "name": "b"})
        scopes = [("bhv-0001", a) for a in ("demonstrate", "remix", "document")]

        ops = 0
        while ops < self.N_OPS:
            clock.advance(self.TICK)
            server.eval_tick("s")
            w = rng.choice(workers)
            behavior_id, activity = rng.choice(scopes)
            roll = rng.random()
            if roll < 0.55:
                server.submit("s", w, {"type": "lockAcquire",
                                       "behaviorId": behavior_id,
                                       "activity": activity})
            elif roll < 0.85:
                server.submit("s", w, {"type": "lockRelease",
                                       "behaviorId": behavior_id,
                                       "activity": activity})
            elif w in server.session("s").clients and len(
                    server.session("s").clients) > 1:
                server.disconnect("s", w)
                server.join("s", w)
            ops += 1
        # settle: everything queued must resolve
        for _ in range(2 * self.TTL // self.TICK + 2):
            clock.advance(self.TICK)
            server.eval_tick("s")

        # verify safety and liveness from the broadcast log alone
        holders = {}      # scope -> holder
        queues = {}       # scope -> [workerId]
        head_since = {}   # (scope, worker) -> serverTime of becoming head
        grants = 0
        max_wait = 0
        for env in server.session("s").log:
            p = env["payload"]
            t = env["serverTime"]
            if env["type"] == "lockGranted":
                scope = (p["behaviorId"], p["activity"])
                if not p["renewed"]:
                    assert holders.get(scope) is None, \
                        "scope %s granted while held" % (scope,)
                else:
                    assert holders.get(scope) == p["holder"]
                holders[scope] = p["holder"]
                grants += 1
                q = queues.get(scope, [])
                if p["holder"] in q:
                    assert q[0] == p["holder"], "non-FIFO promotion"
                    q.pop(0)
                    waited = t - head_since.pop((scope, p["holder"]))
                    max_wait = max(max_wait, waited)
                    assert waited <= self.TTL + self.TICK, \
                        "waiter starved for %d ms" % waited
                    if q:
                        head_since[(scope, q[0])] = t
            elif env["type"] == "lockDenied":
                scope = (p["behaviorId"], p["activity"])
                q = queues.setdefault(scope, [])
                if p["workerId"] not in q:
                    q.append(p["workerId"])
                    if len(q) == 1:
                        head_since[(scope, p["workerId"])] = t
            elif env["type"] == "lockReleased":
                scope = (p["behaviorId"], p["activity"])
                assert holders.get(scope) == p["holder"]
                holders[scope] = None
            elif env["type"] == "presenceUpdate" and p["action"] == "leave":
                for scope, q in queues.items():
                    if p["workerId"] in q:
                        was_head = q[0] == p["workerId"]
                        q.remove(p["workerId"])
                        head_since.pop((scope, p["workerId"]), None)
                        if was_head and q:
                            head_since[(scope, q[0])] = t
        for scope, q in queues.items():
            assert not q, "waiters left queued on %s: %s" % (scope, q)
        assert grants > 0
        _report(5, "%d random lock ops: single-holder invariant held, "
                   "every waiter served (max head wait %d ms <= TTL+tick)"
                % (self.N_OPS, max_wait))


class TestCriterion6ProtocolOrder:
    N_MESSAGES = 300

    def test_total_order_and_late_join(self):
        rng = random.Random(31337)
        clock = SimClock()
        server = SessionServer(clock=clock, lock_ttl_ms=10_000, tick_ms=50)
        server.create_session("s")
        clients = {}
        for w in ("w1", "w2"):
            clients[w] = LocalClient(w)
            server.join("s", w, clients[w])
        server.submit("s", "w1", edit_create(shape("e1")))
        server.submit("s", "w1", {"type": "createBehavior", "name": "b"})
        s = server.session("s")

        def random_message(w):
            roll = rng.random()
            if roll < 0.5:
                return edit_set("e1", rng.choice(["x", "y", "rotation"]),
                                round(rng.uniform(-50, 50), 3))
            if roll < 0.7:
                return {"type": "presence",
                        "cursor": [rng.randrange(100), rng.randrange(100)],
                        "activity": "busy"}
            if roll < 0.9:
                return {"type": "lockAcquire", "behaviorId": "bhv-0001",
                        "activity": rng.choice(["demonstrate", "remix"])}
            return {"type": "lockRelease", "behaviorId": "bhv-0001",
                    "activity": rng.choice(["demonstrate", "remix"])}

        checkpoints = []  # (seq, canonical server view)
        sent = 0
        mirror = None
        join_seq = None
        while sent < self.N_MESSAGES:
            if sent == self.N_MESSAGES // 2 and mirror is None:
                clients["w3"] = LocalClient("w3")
                snapshot = server.join("s", "w3", clients["w3"])
                join_seq = snapshot["seq"]
                mirror = ClientMirror(snapshot)
            clock.advance(rng.choice([0, 10, 50]))
            server.eval_tick("s")
            w = rng.choice([w for w in clients if w in s.clients])
            server.submit("s", w, random_message(w))
            checkpoints.append((s.seq, canonical_bytes(s.state.view_dict())))
            sent += 1

        # identical, gap-free seq streams for everyone
        for w, c in clients.items():
            seqs = [e["seq"] for e in c.inbox]
            assert seqs == list(range(seqs[0], seqs[0] + len(seqs))), w
        full = clients["w1"].inbox
        for w, c in clients.items():
            tail = c.inbox
            assert [canonical_bytes(e) for e in full[-len(tail):]] == \
                [canonical_bytes(e) for e in tail], w

        # late joiner reconstructs the server view at every checkpoint seq
        # (rejected submits consume no seq, so checkpoints repeat some seqs)
        by_seq = dict(checkpoints)
        expected = {seq for seq, _ in checkpoints if seq > join_seq}
        verified = set()
        for env in clients["w3"].inbox:
            mirror.apply(env)
            if mirror.seq in by_seq:
                assert canonical_bytes(mirror.view_dict()) == by_seq[mirror.seq], \
                    "mirror diverged at seq %d" % mirror.seq
                verified.add(mirror.seq)
        assert verified == expected
        assert len(verified) >= 100
        verified = len(verified)
        assert mirror.seq == s.seq
        _report(6, "%d interleaved messages: identical gap-free streams; "
                   "late joiner (seq %d) matched the server at %d checkpoints"
                % (self.N_MESSAGES, join_seq, verified))


class TestCriterion7Retention:
    def test_save_load_replay_byte_identical(self):
        report, server = run_scenario(
            parse_scenario(json.dumps(build_turtle_scenario(fire=False))))
        assert report.passed
        archive = server.session("main").store.to_archive()

        def replay_bytes(a):
            frames = replay(a.behaviors["bhv-0001"].compiled, a.canvas)
            return b"".join(canonical_bytes(canvas_to_dict(s)) for _, s in frames)

        saved = save_session(archive)
        loaded = load_session(saved)
        assert replay_bytes(loaded) == replay_bytes(archive)
        assert save_session(loaded) == saved
        _report(7, "save -> load -> replay is byte-identical to pre-save "
                   "replay (%d bytes of frames)" % len(replay_bytes(archive)))


class TestCriterion8PipelineLatency:
    def test_full_pipeline_under_five_seconds(self):
        t0 = time.perf_counter()
        ids = IdGen(0)
        turtle = Element(id="turtle", kind="shape", width=40, height=30)
        state = CanvasState()
        state = CanvasState(elements={"turtle": turtle}, version=1)

        buf = RecorderBuffer(sessionId="s", recordingWorkerId="w1", startedAt=0)
        events = []
        import math
        for t, rot in ((1000, 1.0), (1200, 2.0), (1400, math.pi)):
            events.append(EditEvent.set_property(t, "w1", "turtle", "rotation", rot))
        for k, y in enumerate((100.0, 140.0, 180.0, 160.0, 130.0, 110.0, 100.0)):
            events.append(EditEvent.set_property(2000 + 400 * k, "w1", "turtle",
                                                 "y", y))
        shell = Element(id="shell", kind="shape", width=40, height=30)
        events.append(EditEvent.create(5200, "w1", shell))
        events.append(EditEvent.delete(5800, "w1", "turtle"))
        for e in events:
            buf = record_event(buf, e)
        buf = stop_recording(buf, 6000)

        blocks = {b.id: b for b in segment(buf, 500, ids)}
        # blk-0001 = (a) rotate, blk-0002 = (b) bounce,
        # blk-0003 = (d) delete turtle, blk-0004 = (c) import shell
        registry = {
            "blk-0001": make_instant(blocks["blk-0001"]),
            "blk-0002": set_duration(blocks["blk-0002"], 1000),
            "blk-0003": make_instant(blocks["blk-0003"]),
            "blk-0004": make_instant(blocks["blk-0004"]),
        }
        tl = Timeline(tick=20)
        for bid, off, track in (("blk-0001", 0, 0), ("blk-0002", 0, 1),
                                ("blk-0003", 1000, 2), ("blk-0004", 1000, 3)):
            tl = place(tl, registry, bid, off, track)
        compiled = compile_timeline(tl, registry)
        frames = replay(compiled, state)
        elapsed = time.perf_counter() - t0
        assert frames[-1][1].elements.keys() == {"shell"}
        assert compiled.duration == 1000
        assert elapsed < 5.0, "pipeline took %.2fs" % elapsed
        _report(8, "demonstrate->segment->remix->compile->replay in %.3fs "
                   "wall" % elapsed)
