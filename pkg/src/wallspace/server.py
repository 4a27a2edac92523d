"""Live WebSocket server: the hub behind real sockets.

All state mutation is serialized through one asyncio lock around the
(synchronous) hub, so the canonical envelope order is simply lock-acquire
order. Displays are fan-out subscribers fed through per-connection FIFO
queues; pads additionally get their own session-status changes. Liveness
uses protocol-level ping/pong envelopes: a silent peer is closed after
two missed pongs but its session survives for the resume window.
"""

from __future__ import annotations

import asyncio
import time
from pathlib import Path
from typing import Dict, Optional, Set

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, HTMLResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from . import qr
from .corpus import load_manifest
from .geometry import RoomSpec
from .hub import Heartbeat, Hub, ROLE_DISPLAY, ROLE_PAD, ROLE_TRACKER, ROLE_VOICE
from .messages import (
    KIND_PING,
    KIND_PONG,
    DecodeError,
    Envelope,
    decode,
    encode,
)
from .sessions import SideFull, UnknownSideToken, UnknownToken
from .state import InteractionConfig


def now_ms() -> int:
    return time.monotonic_ns() // 1_000_000


class Connection:
    def __init__(self, ws: WebSocket, role: str) -> None:
        self.ws = ws
        self.role = role
        self.queue: asyncio.Queue[bytes] = asyncio.Queue(maxsize=256)
        self.heartbeat = Heartbeat()
        self.alive = True
        self.sid: Optional[str] = None

    def push(self, env: Envelope) -> None:
        if not self.alive:
            return
        try:
            self.queue.put_nowait(encode(env))
        except asyncio.QueueFull:
            self.alive = False  # slow consumer; let the socket loop close it


class WallServer:
    """Owns the hub, the lock, and the connection roster."""

    def __init__(self, hub: Hub, corpus_root: Optional[Path] = None) -> None:
        self.hub = hub
        self.corpus_root = corpus_root
        self.lock = asyncio.Lock()
        self.displays: Set[Connection] = set()
        self.pads: Dict[str, Connection] = {}

    def broadcast(self, diff: Optional[Envelope]) -> None:
        if diff is None:
            return
        for conn in list(self.displays):
            conn.push(diff)
        # pads only care about their own session row (active/bound status)
        for sid, conn in self.pads.items():
            mine = [
                ch
                for ch in diff.body["changes"]
                if ch.get("op") == "session" and ch.get("sid") == sid
            ]
            if mine:
                conn.push(
                    Envelope(
                        kind=diff.kind,
                        seq=diff.seq,
                        sid=diff.sid,
                        ts=diff.ts,
                        body={"revision": diff.body["revision"], "changes": mine},
                    )
                )

    async def dispatch(self, env: Envelope, role: str, epoch: int) -> object:
        async with self.lock:
            result = self.hub.dispatch(env, role=role, epoch=epoch, now=now_ms())
            self.broadcast(result.diff)
            return result


_FALLBACK_PAGE = """<!doctype html>
<html><head><meta charset="utf-8"><title>wallspace</title></head>
<body style="font-family: sans-serif">
<h1>wallspace {name}</h1>
<p>The TypeScript client bundle is not built. Run <code>npm install && npm run build</code>
in the <code>frontend/</code> directory, then restart the server with
<code>--frontend frontend/dist</code>.</p>
</body></html>"""


def create_app(
    corpus_dir: Optional[Path | str] = None,
    room: RoomSpec = RoomSpec(),
    seed: int = 0,
    frontend_dist: Optional[Path | str] = None,
    hub: Optional[Hub] = None,
) -> FastAPI:
    corpus_root = Path(corpus_dir) if corpus_dir else None
    if hub is None:
        if corpus_root is None:
            raise ValueError("need a corpus directory or a prebuilt hub")
        manifest = load_manifest(corpus_root)
        hub = Hub(room, manifest, seed=seed, interaction=InteractionConfig())
        hub.boot_fill_columns()
        hub.initial_snapshot()
    server = WallServer(hub, corpus_root)
    app = FastAPI(title="wallspace")
    app.state.server = server

    dist = Path(frontend_dist) if frontend_dist else None
    if dist and dist.is_dir():
        app.mount("/static", StaticFiles(directory=dist), name="static")

    def page(name: str) -> HTMLResponse:
        if dist:
            candidate = dist / f"{name}.html"
            if candidate.exists():
                return HTMLResponse(candidate.read_text(encoding="utf-8"))
        return HTMLResponse(_FALLBACK_PAGE.replace("{name}", name))

    @app.get("/")
    async def index() -> HTMLResponse:
        return HTMLResponse(
            '<!doctype html><body style="font-family:sans-serif">'
            "<h1>wallspace</h1><ul>"
            '<li><a href="/display">wall display</a></li>'
            '<li><a href="/pad?side=left">left pad</a></li>'
            '<li><a href="/pad?side=right">right pad</a></li>'
            '<li><a href="/qr">QR onboarding codes</a></li>'
            "</ul></body>"
        )

    @app.get("/pad")
    async def pad_page() -> HTMLResponse:
        return page("pad")

    @app.get("/display")
    async def display_page() -> HTMLResponse:
        return page("display")

    @app.get("/qr")
    async def qr_page() -> HTMLResponse:
        base = "/pad"
        blocks = []
        for side in ("left", "right"):
            svg = qr.to_svg(qr.encode(f"{base}?side={side}"))
            blocks.append(f"<div style='margin:2em'><h2>{side} side</h2>{svg}</div>")
        return HTMLResponse(
            "<!doctype html><body style='display:flex'>" + "".join(blocks) + "</body>"
        )

    @app.get("/img/{path:path}")
    async def image(path: str):
        if server.corpus_root is None:
            return PlainTextResponse("no corpus mounted", status_code=404)
        full = (server.corpus_root / path).resolve()
        if not str(full).startswith(str(server.corpus_root.resolve())) or not full.is_file():
            return PlainTextResponse("not found", status_code=404)
        return FileResponse(full)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket) -> None:
        role = ws.query_params.get("role", "")
        if role not in (ROLE_PAD, ROLE_DISPLAY, ROLE_TRACKER, ROLE_VOICE):
            await ws.close(code=4400, reason=f"unknown role {role!r}")
            return
        await ws.accept()
        conn = Connection(ws, role)
        try:
            await _serve_connection(server, conn)
        except WebSocketDisconnect:
            pass
        finally:
            await _teardown(server, conn)

    return app


async def _teardown(server: WallServer, conn: Connection) -> None:
    conn.alive = False
    server.displays.discard(conn)
    if conn.role == ROLE_PAD and conn.sid is not None:
        server.pads.pop(conn.sid, None)
        async with server.lock:
            diff = server.hub.disconnect_pad(conn.sid, now_ms())
            server.broadcast(diff)


async def _sender(conn: Connection) -> None:
    while conn.alive:
        data = await conn.queue.get()
        await conn.ws.send_text(data.decode("utf-8"))


async def _heartbeat_loop(server: WallServer, conn: Connection) -> None:
    conn.heartbeat.start(now_ms())
    seq = 0
    while conn.alive:
        await asyncio.sleep(1.0)
        verdict = conn.heartbeat.poll(now_ms())
        if verdict == "dead":
            conn.alive = False
            await conn.ws.close(code=4408, reason="heartbeat timeout")
            return
        if verdict == "ping":
            seq += 1
            conn.push(
                Envelope(kind=KIND_PING, seq=seq, sid="hub", ts=now_ms(), body={})
            )


async def _serve_connection(server: WallServer, conn: Connection) -> None:
    hub = server.hub
    role = conn.role
    epoch = 0

    if role == ROLE_PAD:
        resume = conn.ws.query_params.get("resume")
        side = conn.ws.query_params.get("side", "")
        try:
            async with server.lock:
                if resume:
                    session, ok, diff = hub.resume_pad(resume, now_ms())
                else:
                    session, ok, diff = hub.register_pad(f"side={side}", now_ms())
                server.broadcast(diff)
        except (UnknownSideToken, SideFull, UnknownToken) as e:
            await conn.ws.send_text(
                encode(
                    Envelope(
                        kind="error",
                        seq=1,
                        sid="hub",
                        ts=now_ms(),
                        body={"code": type(e).__name__.lower(), "message": str(e)},
                    )
                ).decode()
            )
            await conn.ws.close(code=4403)
            return
        conn.sid = session.session_id
        epoch = session.epoch
        server.pads[conn.sid] = conn
        conn.push(ok)
        conn.push(hub.snapshot_envelope(now_ms()))
    elif role == ROLE_DISPLAY:
        server.displays.add(conn)
        async with server.lock:
            conn.push(hub.snapshot_envelope(now_ms()))
    elif role == ROLE_TRACKER:
        async with server.lock:
            epoch = hub.connect_client("tracker", now_ms())
    elif role == ROLE_VOICE:
        sid = conn.ws.query_params.get("sid", "")
        if sid not in hub.registry.sessions:
            await conn.ws.close(code=4404, reason="unknown session")
            return
        conn.sid = sid
        epoch = hub.registry.sessions[sid].epoch

    sender = asyncio.create_task(_sender(conn))
    beats = asyncio.create_task(_heartbeat_loop(server, conn))
    try:
        while conn.alive:
            text = await conn.ws.receive_text()
            try:
                env = decode(text)
            except DecodeError as e:
                conn.push(
                    Envelope(
                        kind="error",
                        seq=1,
                        sid="hub",
                        ts=now_ms(),
                        body={"code": e.code, "message": str(e)},
                    )
                )
                continue
            if env.kind == KIND_PONG:
                conn.heartbeat.on_pong(now_ms())
                continue
            if env.kind == KIND_PING:
                conn.push(
                    Envelope(
                        kind=KIND_PONG, seq=env.seq, sid="hub", ts=now_ms(),
                        body={"echo": env.ts},
                    )
                )
                continue
            result = await server.dispatch(env, role, epoch)
            if result.reply is not None:
                conn.push(result.reply)
    finally:
        sender.cancel()
        beats.cancel()
