"""Websocket transport for the session server.

One JSON object per message, exactly the in-process protocol. All message
handling runs on a single asyncio loop, which *is* the session sequencer;
broadcasts fan out through per-connection queues so slow readers cannot
reorder anything.
"""

import asyncio
import json
import logging

from websockets.asyncio.server import serve as ws_serve

from .clock import WallClock
from .errors import CrowdmixError
from .server import SessionServer
from .store import load_session_path

logger = logging.getLogger(__name__)


class _WsClient:
    def __init__(self, worker_id):
        self.workerId = worker_id
        self.queue = asyncio.Queue()

    def deliver(self, env):
        self.queue.put_nowait(env)


class WsSessionServer:
    def __init__(self, session_id="main", lock_ttl_ms=30_000, tick_ms=50,
                 session_file=None):
        self.core = SessionServer(clock=WallClock(), lock_ttl_ms=lock_ttl_ms,
                                  tick_ms=tick_ms)
        self.core.create_session(session_id)
        if session_file:
            self.core.load_archive(session_id, load_session_path(session_file))
        self.default_session = session_id
        self.tick_ms = tick_ms

    async def _sender(self, websocket, client):
        while True:
            env = await client.queue.get()
            await websocket.send(json.dumps(env, sort_keys=True))

    async def handler(self, websocket):
        joined = None  # (sessionId, workerId)
        sender = None
        try:
            async for raw in websocket:
                try:
                    message = json.loads(raw)
                except json.JSONDecodeError as e:
                    await websocket.send(json.dumps(
                        {"type": "error", "attempted": None,
                         "code": "ValidationFailed", "detail": "bad JSON: %s" % e}))
                    continue
                kind = message.get("type")
                if kind == "join":
                    if joined is not None:
                        await websocket.send(json.dumps(
                            {"type": "error", "attempted": "join",
                             "code": "ValidationFailed",
                             "detail": "connection already joined"}))
                        continue
                    client = _WsClient(message.get("workerId"))
                    try:
                        snapshot = self.core.join(message.get("sessionId"),
                                                  message.get("workerId"),
                                                  client=client)
                    except CrowdmixError as e:
                        await websocket.send(json.dumps(
                            {"type": "error", "attempted": "join",
                             "code": e.code, "detail": str(e)}))
                        continue
                    joined = (message.get("sessionId"), message.get("workerId"))
                    await websocket.send(json.dumps(snapshot, sort_keys=True))
                    sender = asyncio.ensure_future(self._sender(websocket, client))
                elif kind == "hello" or joined is not None:
                    session_id = (joined[0] if joined
                                  else message.get("sessionId", self.default_session))
                    worker_id = joined[1] if joined else message.get("workerId", "")
                    try:
                        reply = self.core.submit(session_id, worker_id, message)
                    except CrowdmixError as e:
                        reply = {"type": "error", "attempted": kind,
                                 "code": e.code, "detail": str(e)}
                    # broadcasts reach the sender through its queue; only
                    # direct replies (errors, helloAck) go back inline
                    if reply is not None and reply.get("type") in ("error", "helloAck"):
                        await websocket.send(json.dumps(reply, sort_keys=True))
                else:
                    await websocket.send(json.dumps(
                        {"type": "error", "attempted": kind,
                         "code": "ValidationFailed", "detail": "join first"}))
        finally:
            if sender is not None:
                sender.cancel()
            if joined is not None:
                self.core.disconnect(*joined)

    async def _ticker(self):
        while True:
            await asyncio.sleep(self.tick_ms / 1000.0)
            self.core.eval_all()

    async def run(self, host, port, ready=None):
        ticker = asyncio.ensure_future(self._ticker())
        try:
            async with ws_serve(self.handler, host, port) as server:
                bound = server.sockets[0].getsockname()[1] if server.sockets else port
                logger.info("serving ws://%s:%s", host, bound)
                if ready is not None:
                    ready(bound)
                await asyncio.Future()
        finally:
            ticker.cancel()


def serve_forever(host, port, session_id="main", lock_ttl_ms=30_000,
                  tick_ms=50, session_file=None, ready=None):
    ws = WsSessionServer(session_id=session_id, lock_ttl_ms=lock_ttl_ms,
                         tick_ms=tick_ms, session_file=session_file)
    try:
        asyncio.run(ws.run(host, port, ready=ready))
    except KeyboardInterrupt:
        pass
