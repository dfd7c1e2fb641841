"""Minimal RFC 6455 WebSocket server support (text frames only).

Just enough for browser consoles to speak the wire protocol: the
upgrade handshake, masked client frames in (with fragmentation), and
unmasked text frames out.  No extensions, no compression.
"""

from __future__ import annotations

import asyncio
import base64
import hashlib

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


class WsError(ConnectionError):
    pass


async def server_handshake(reader: asyncio.StreamReader,
                           writer: asyncio.StreamWriter) -> str:
    """Perform the HTTP upgrade; returns the request path."""
    request = await reader.readuntil(b"\r\n\r\n")
    lines = request.decode("latin1").split("\r\n")
    path = lines[0].split(" ")[1] if len(lines[0].split(" ")) >= 2 else "/"
    headers = {}
    for ln in lines[1:]:
        if ":" in ln:
            k, _, v = ln.partition(":")
            headers[k.strip().lower()] = v.strip()
    key = headers.get("sec-websocket-key")
    if headers.get("upgrade", "").lower() != "websocket" or key is None:
        writer.write(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        await writer.drain()
        raise WsError("not a websocket upgrade request")
    accept = base64.b64encode(hashlib.sha1((key + _GUID).encode()).digest()).decode()
    writer.write((
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept}\r\n\r\n").encode())
    await writer.drain()
    return path


async def _read_frame(reader: asyncio.StreamReader) -> tuple[int, bool, bytes]:
    head = await reader.readexactly(2)
    fin = bool(head[0] & 0x80)
    opcode = head[0] & 0x0F
    masked = bool(head[1] & 0x80)
    length = head[1] & 0x7F
    if length == 126:
        length = int.from_bytes(await reader.readexactly(2), "big")
    elif length == 127:
        length = int.from_bytes(await reader.readexactly(8), "big")
    mask = await reader.readexactly(4) if masked else b""
    data = await reader.readexactly(length)
    if masked:
        data = bytes(b ^ mask[i % 4] for i, b in enumerate(data))
    return opcode, fin, data


async def read_text(reader: asyncio.StreamReader,
                    writer: asyncio.StreamWriter) -> str | None:
    """Next text message, transparently answering pings; None on close."""
    buffer = b""
    while True:
        try:
            opcode, fin, data = await _read_frame(reader)
        except (asyncio.IncompleteReadError, ConnectionError):
            return None
        if opcode == 0x8:  # close
            try:
                await send_frame(writer, 0x8, data)
            except ConnectionError:
                pass
            return None
        if opcode == 0x9:  # ping -> pong
            await send_frame(writer, 0xA, data)
            continue
        if opcode == 0xA:  # unsolicited pong
            continue
        if opcode in (0x1, 0x0):
            buffer += data
            if fin:
                return buffer.decode("utf-8")
            continue
        raise WsError(f"unsupported websocket opcode {opcode}")


async def send_frame(writer: asyncio.StreamWriter, opcode: int, data: bytes) -> None:
    length = len(data)
    head = bytes([0x80 | opcode])
    if length < 126:
        head += bytes([length])
    elif length < 1 << 16:
        head += bytes([126]) + length.to_bytes(2, "big")
    else:
        head += bytes([127]) + length.to_bytes(8, "big")
    writer.write(head + data)
    await writer.drain()


async def send_text(writer: asyncio.StreamWriter, text: str) -> None:
    await send_frame(writer, 0x1, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# client side (used by tests and the headless console driver)
# ---------------------------------------------------------------------------

async def client_connect(host: str, port: int, path: str = "/",
                         ) -> tuple[asyncio.StreamReader, asyncio.StreamWriter]:
    reader, writer = await asyncio.open_connection(host, port)
    key = base64.b64encode(b"muralsim-console").decode()
    writer.write((
        f"GET {path} HTTP/1.1\r\n"
        f"Host: {host}:{port}\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Key: {key}\r\n"
        "Sec-WebSocket-Version: 13\r\n\r\n").encode())
    await writer.drain()
    response = await reader.readuntil(b"\r\n\r\n")
    if b"101" not in response.split(b"\r\n")[0]:
        raise WsError("websocket handshake refused")
    return reader, writer


async def client_send_text(writer: asyncio.StreamWriter, text: str) -> None:
    """Client frames must be masked."""
    import os
    data = text.encode("utf-8")
    mask = os.urandom(4)
    masked = bytes(b ^ mask[i % 4] for i, b in enumerate(data))
    length = len(data)
    head = bytes([0x81])
    if length < 126:
        head += bytes([0x80 | length])
    elif length < 1 << 16:
        head += bytes([0x80 | 126]) + length.to_bytes(2, "big")
    else:
        head += bytes([0x80 | 127]) + length.to_bytes(8, "big")
    writer.write(head + mask + masked)
    await writer.drain()


async def client_read_text(reader: asyncio.StreamReader) -> str | None:
    buffer = b""
    while True:
        try:
            opcode, fin, data = await _read_frame(reader)
        except (asyncio.IncompleteReadError, ConnectionError):
            return None
        if opcode == 0x8:
            return None
        if opcode in (0x9, 0xA):
            continue
        buffer += data
        if fin:
            return buffer.decode("utf-8")
