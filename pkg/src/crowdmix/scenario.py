"""Scripted multi-client simulation on a virtual clock.

A scenario file drives N virtual clients against an in-process server and
checks path/value assertions against the authoritative session state at
given simulated times. No sockets, no wall-clock: runs are byte-identical.

Scenario JSON:
    {
      "sessionId": "main",            # optional
      "tickMs": 50, "lockTtlMs": 30000,
      "steps": [{"at": 0, "client": "w1", "message": {...}}, ...],
      "assertions": [
        {"at": 3000, "path": "canvas.elements.shell.pose.x", "equals": 40},
        {"at": 3000, "path": "canvas.elements.turtle", "absent": true},
        {"at": 3000, "path": "...", "near": 3.14159, "tol": 1e-9}]
    }

Step messages use the wire protocol; {"type": "join"} and
{"type": "disconnect"} manage the connection itself.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional

from .clock import SimClock
from .errors import CrowdmixError
from .server import SessionServer

logger = logging.getLogger(__name__)

_MISSING = object()


class ScenarioParseError(Exception):
    pass


@dataclass(frozen=True)
class ScenarioStep:
    at: float
    client: str
    message: dict


@dataclass(frozen=True)
class ScenarioAssertion:
    at: float
    path: str
    predicate: str   # equals | near | absent | present
    value: object = None
    tol: float = 0.0


@dataclass
class Scenario:
    sessionId: str = "main"
    tickMs: int = 50
    lockTtlMs: int = 30_000
    steps: List[ScenarioStep] = field(default_factory=list)
    assertions: List[ScenarioAssertion] = field(default_factory=list)


@dataclass
class AssertionOutcome:
    index: int
    at: float
    description: str
    passed: bool
    detail: str = ""


@dataclass
class ScenarioReport:
    outcomes: List[AssertionOutcome] = field(default_factory=list)
    errors: List[str] = field(default_factory=list)  # rejected step messages
    snapshots: dict = field(default_factory=dict)    # clientId -> join snapshot

    @property
    def passed(self):
        return all(o.passed for o in self.outcomes)

    def lines(self):
        out = []
        for o in self.outcomes:
            status = "ok  " if o.passed else "FAIL"
            line = "%s %d at=%s %s" % (status, o.index, _fmt_ms(o.at), o.description)
            if o.detail:
                line += " (%s)" % o.detail
            out.append(line)
        return out


def _fmt_ms(t):
    return "%g" % t


def parse_scenario(data):
    try:
        d = json.loads(data) if isinstance(data, (str, bytes)) else data
    except json.JSONDecodeError as e:
        raise ScenarioParseError("invalid JSON: %s" % (e,)) from e
    if not isinstance(d, dict):
        raise ScenarioParseError("scenario must be a JSON object")
    sc = Scenario(sessionId=d.get("sessionId", "main"),
                  tickMs=int(d.get("tickMs", 50)),
                  lockTtlMs=int(d.get("lockTtlMs", 30_000)))
    last_t = 0
    for i, sd in enumerate(d.get("steps", [])):
        try:
            step = ScenarioStep(at=sd["at"], client=sd["client"],
                                message=sd["message"])
        except (KeyError, TypeError) as e:
            raise ScenarioParseError("step %d: %s" % (i, e)) from e
        if step.at < last_t:
            raise ScenarioParseError("step %d: steps must be time-ordered" % (i,))
        if not isinstance(step.message, dict) or "type" not in step.message:
            raise ScenarioParseError("step %d: message needs a type" % (i,))
        last_t = step.at
        sc.steps.append(step)
    for i, ad in enumerate(d.get("assertions", [])):
        preds = [p for p in ("equals", "near", "absent", "present") if p in ad]
        if len(preds) != 1 or "at" not in ad or "path" not in ad:
            raise ScenarioParseError(
                "assertion %d needs at, path and one of equals/near/absent/present"
                % (i,))
        pred = preds[0]
        sc.assertions.append(ScenarioAssertion(
            at=ad["at"], path=ad["path"], predicate=pred,
            value=ad.get(pred), tol=ad.get("tol", 1e-9)))
    return sc


def resolve_path(view, path):
    node = view
    for token in path.split("."):
        if isinstance(node, dict):
            if token not in node:
                return _MISSING
            node = node[token]
        elif isinstance(node, list):
            try:
                node = node[int(token)]
            except (ValueError, IndexError):
                return _MISSING
        else:
            return _MISSING
    return node


def _check(assertion, view):
    got = resolve_path(view, assertion.path)
    p = assertion.predicate
    if p == "absent":
        return got is _MISSING, "" if got is _MISSING else "present: %r" % (got,)
    if got is _MISSING:
        return False, "path missing"
    if p == "present":
        return True, ""
    if p == "equals":
        return got == assertion.value, "got %r" % (got,)
    if p == "near":
        try:
            ok = abs(got - assertion.value) <= assertion.tol
        except TypeError:
            return False, "got non-numeric %r" % (got,)
        return ok, "got %r" % (got,)
    return False, "unknown predicate"


def run_scenario(scenario, id_seed=0):
    """Execute a scenario; returns (ScenarioReport, SessionServer)."""
    clock = SimClock()
    server = SessionServer(clock=clock, lock_ttl_ms=scenario.lockTtlMs,
                           tick_ms=scenario.tickMs, id_seed=id_seed)
    server.create_session(scenario.sessionId)

    end = 0
    for step in scenario.steps:
        end = max(end, step.at)
    for a in scenario.assertions:
        end = max(end, a.at)
    times = {float(step.at) for step in scenario.steps}
    times |= {float(a.at) for a in scenario.assertions}
    t = 0
    while t <= end:
        times.add(float(t))
        t += scenario.tickMs

    report = ScenarioReport()
    steps = list(scenario.steps)
    assertions = sorted(enumerate(scenario.assertions, 1), key=lambda p: p[1].at)
    si = ai = 0
    for now in sorted(times):
        clock.set(int(now))
        while si < len(steps) and steps[si].at <= now:
            step = steps[si]
            si += 1
            msg = step.message
            try:
                if msg["type"] == "join":
                    report.snapshots[step.client] = server.join(
                        msg.get("sessionId", scenario.sessionId), step.client)
                elif msg["type"] == "disconnect":
                    server.disconnect(msg.get("sessionId", scenario.sessionId),
                                      step.client)
                else:
                    reply = server.submit(scenario.sessionId, step.client, msg)
                    if reply.get("type") == "error":
                        report.errors.append(
                            "at=%s client=%s %s rejected: %s/%s"
                            % (_fmt_ms(step.at), step.client, reply["attempted"],
                               reply["code"], reply["detail"]))
            except CrowdmixError as e:
                report.errors.append("at=%s client=%s %s failed: %s"
                                     % (_fmt_ms(step.at), step.client,
                                        msg["type"], e))
        server.eval_all(now)
        while ai < len(assertions) and assertions[ai][1].at <= now:
            index, assertion = assertions[ai]
            ai += 1
            view = server.session(scenario.sessionId).state.view_dict()
            passed, detail = _check(assertion, view)
            desc = "%s %s%s" % (assertion.path, assertion.predicate,
                                "" if assertion.value is None
                                else " %r" % (assertion.value,))
            report.outcomes.append(AssertionOutcome(
                index=index, at=assertion.at, description=desc,
                passed=passed, detail="" if passed else detail))

    # drain any behavior still mid-playback
    guard = 0
    while any(s.playing for s in server.sessions.values()) and guard < 100_000:
        clock.advance(scenario.tickMs)
        server.eval_all()
        guard += 1
    return report, server
