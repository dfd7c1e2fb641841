"""SVG subset parser producing flattened polylines in wall coordinates.

Supported drawable elements: ``path`` (M/m, L/l, H/h, V/v, C/c, Q/q,
Z/z), ``line``, ``polyline``, ``polygon`` and ``rect``.  Anything else
that would render is rejected by name, as is any ``transform``
attribute.  Structural wrappers (``svg``, ``g``) are traversed;
non-rendering metadata (``title``, ``desc``, ``defs``, ``metadata``) is
skipped.

Coordinates are mapped from SVG user units to wall meters with the
vertical axis flipped (SVG y grows downward, wall v grows upward):

    u = (x - min_x) * scale
    v = (min_y + doc_height - y) * scale

``min_x``/``min_y``/``doc_height`` come from the ``viewBox`` when
present, otherwise from the ``height`` attribute.  Curves are flattened
by recursive midpoint subdivision until the control polygon deviates
from the chord by less than ``flatten_tol`` (in meters).
"""

from __future__ import annotations

import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np


class SvgError(ValueError):
    """Raised for malformed or out-of-subset SVG input."""


@dataclass
class RawPolyline:
    """Flattened polyline in wall meters; ``closed`` marks a contour."""

    points: np.ndarray
    closed: bool


@dataclass
class SvgDrawing:
    """Parsed document: polylines plus the wall extent it maps onto."""

    polylines: list[RawPolyline]
    extent: tuple[float, float]  # (width, height) in meters


_NUMBER_RE = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_SKIP_TAGS = {"title", "desc", "defs", "metadata", "style"}
_DRAWABLE_TAGS = {"path", "line", "polyline", "polygon", "rect"}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _parse_length(raw: str, what: str) -> float:
    s = raw.strip()
    if s.endswith("px"):
        s = s[:-2]
    try:
        return float(s)
    except ValueError:
        raise SvgError(f"unsupported {what} value {raw!r} (plain numbers or px only)") from None


def _floats(raw: str) -> list[float]:
    return [float(m) for m in _NUMBER_RE.findall(raw)]


def _flatten_cubic(p0, p1, p2, p3, tol: float, out: list, depth: int = 0) -> None:
    # flatness: worst control-point deviation from the chord
    chord = p3 - p0
    clen = np.hypot(*chord)
    if clen < 1e-12:
        d = max(np.hypot(*(p1 - p0)), np.hypot(*(p2 - p0)))
    else:
        n = np.array([-chord[1], chord[0]]) / clen
        d = max(abs((p1 - p0) @ n), abs((p2 - p0) @ n))
    if d <= tol or depth >= 24:
        out.append(p3)
        return
    p01 = 0.5 * (p0 + p1)
    p12 = 0.5 * (p1 + p2)
    p23 = 0.5 * (p2 + p3)
    p012 = 0.5 * (p01 + p12)
    p123 = 0.5 * (p12 + p23)
    mid = 0.5 * (p012 + p123)
    _flatten_cubic(p0, p01, p012, mid, tol, out, depth + 1)
    _flatten_cubic(mid, p123, p23, p3, tol, out, depth + 1)


def _quad_to_cubic(p0, p1, p2):
    return p0, p0 + 2.0 / 3.0 * (p1 - p0), p2 + 2.0 / 3.0 * (p1 - p2), p2


class _PathWalker:
    """Executes a path ``d`` string, emitting flattened subpaths."""

    def __init__(self, tol: float):
        self.tol = tol
        self.subpaths: list[tuple[list[np.ndarray], bool]] = []
        self.current: list[np.ndarray] = []
        self.start: np.ndarray | None = None
        self.pos = np.zeros(2)

    def _finish(self, closed: bool) -> None:
        if len(self.current) >= 2:
            self.subpaths.append((self.current, closed))
        self.current = []

    def moveto(self, p) -> None:
        self._finish(False)
        self.pos = np.asarray(p, dtype=float)
        self.start = self.pos
        self.current = [self.pos]

    def lineto(self, p) -> None:
        self.pos = np.asarray(p, dtype=float)
        self.current.append(self.pos)

    def curveto(self, p1, p2, p3) -> None:
        out: list[np.ndarray] = []
        _flatten_cubic(self.pos, np.asarray(p1, float), np.asarray(p2, float),
                       np.asarray(p3, float), self.tol, out)
        self.current.extend(out)
        self.pos = self.current[-1]

    def closepath(self) -> None:
        if self.start is not None and len(self.current) >= 2:
            self.current.append(self.start.copy())
            self._finish(True)
            self.pos = self.start
            self.current = [self.start]
        else:
            self._finish(False)

    def run(self, d: str) -> list[tuple[list[np.ndarray], bool]]:
        tokens = re.findall(r"[MmLlHhVvCcQqZzAaSsTt]|" + _NUMBER_RE.pattern, d)
        i = 0

        def take(n: int) -> list[float]:
            nonlocal i
            if i + n > len(tokens):
                raise SvgError(f"path data ended mid-command in {d!r}")
            vals = tokens[i : i + n]
            i += n
            try:
                return [float(v) for v in vals]
            except ValueError:
                raise SvgError(f"expected {n} numbers, got {vals} in path data") from None

        prev_cmd = None
        while i < len(tokens):
            tok = tokens[i]
            if tok.isalpha():
                cmd = tok
                i += 1
            else:
                # implicit command repetition; M/m repeats as L/l
                if prev_cmd is None:
                    raise SvgError("path data starts with a number")
                cmd = {"M": "L", "m": "l"}.get(prev_cmd, prev_cmd)
            rel = cmd.islower()
            op = cmd.upper()
            if op == "Z":
                self.closepath()
            elif op == "M":
                x, y = take(2)
                p = self.pos + (x, y) if rel else np.array([x, y])
                self.moveto(p)
            elif op == "L":
                x, y = take(2)
                p = self.pos + (x, y) if rel else np.array([x, y])
                self.lineto(p)
            elif op == "H":
                (x,) = take(1)
                self.lineto((self.pos[0] + x if rel else x, self.pos[1]))
            elif op == "V":
                (y,) = take(1)
                self.lineto((self.pos[0], self.pos[1] + y if rel else y))
            elif op == "C":
                x1, y1, x2, y2, x3, y3 = take(6)
                base = self.pos if rel else np.zeros(2)
                self.curveto(base + (x1, y1), base + (x2, y2), base + (x3, y3))
            elif op == "Q":
                x1, y1, x2, y2 = take(4)
                base = self.pos if rel else np.zeros(2)
                _, c1, c2, c3 = _quad_to_cubic(self.pos, base + (x1, y1), base + (x2, y2))
                self.curveto(c1, c2, c3)
            else:
                raise SvgError(f"unsupported path command {cmd!r}")
            prev_cmd = cmd
        self._finish(False)
        return self.subpaths


def _dedupe(points: list[np.ndarray], tol: float = 1e-9) -> np.ndarray:
    out = [points[0]]
    for p in points[1:]:
        if np.hypot(*(p - out[-1])) > tol:
            out.append(p)
    return np.array(out)


def parse_svg(document: str, scale: float, flatten_tol: float) -> SvgDrawing:
    """Parse SVG text into flattened wall-coordinate polylines.

    ``scale`` converts SVG user units to meters; ``flatten_tol`` is the
    curve flattening tolerance in meters.
    """
    if scale <= 0:
        raise SvgError(f"scale must be positive, got {scale}")
    try:
        root = ET.fromstring(document)
    except ET.ParseError as exc:
        raise SvgError(f"not well-formed XML: {exc}") from exc
    if _local(root.tag) != "svg":
        raise SvgError(f"root element is <{_local(root.tag)}>, expected <svg>")

    viewbox = root.get("viewBox")
    if viewbox:
        vb = _floats(viewbox)
        if len(vb) != 4:
            raise SvgError(f"malformed viewBox {viewbox!r}")
        min_x, min_y, doc_w, doc_h = vb
    else:
        height = root.get("height")
        width = root.get("width")
        if height is None or width is None:
            raise SvgError("svg needs a viewBox or width+height attributes")
        min_x, min_y = 0.0, 0.0
        doc_h = _parse_length(height, "height")
        doc_w = _parse_length(width, "width")
    if doc_w <= 0 or doc_h <= 0:
        raise SvgError("document extent must be positive")

    # flatten in user units: tolerance expressed in those units
    tol_units = flatten_tol / scale
    polylines: list[RawPolyline] = []

    def to_wall(points: np.ndarray) -> np.ndarray:
        out = np.empty_like(points)
        out[:, 0] = (points[:, 0] - min_x) * scale
        out[:, 1] = (min_y + doc_h - points[:, 1]) * scale
        return out

    def emit(points: list[np.ndarray], closed: bool) -> None:
        pts = _dedupe(points)
        if closed and len(pts) >= 2 and np.hypot(*(pts[0] - pts[-1])) <= 1e-9:
            pts = pts[:-1]
        if len(pts) < 2:
            return
        polylines.append(RawPolyline(points=to_wall(pts), closed=closed))

    def walk(el) -> None:
        tag = _local(el.tag)
        if tag in _SKIP_TAGS:
            return
        if el.get("transform") is not None:
            raise SvgError(f"transform attribute on <{tag}> is not supported")
        if tag in ("svg", "g"):
            for child in el:
                walk(child)
            return
        if tag not in _DRAWABLE_TAGS:
            raise SvgError(f"unsupported element <{tag}>")
        if tag == "path":
            d = el.get("d", "")
            for pts, closed in _PathWalker(tol_units).run(d):
                emit(pts, closed)
        elif tag == "line":
            p = [float(el.get(k, "0")) for k in ("x1", "y1", "x2", "y2")]
            emit([np.array(p[:2]), np.array(p[2:])], closed=False)
        elif tag in ("polyline", "polygon"):
            vals = _floats(el.get("points", ""))
            if len(vals) < 4 or len(vals) % 2:
                raise SvgError(f"<{tag}> has a malformed points list")
            pts = [np.array(vals[i : i + 2]) for i in range(0, len(vals), 2)]
            emit(pts, closed=(tag == "polygon"))
        elif tag == "rect":
            if el.get("rx") or el.get("ry"):
                raise SvgError("rounded <rect> corners are not supported")
            x = float(el.get("x", "0"))
            y = float(el.get("y", "0"))
            w = float(el.get("width", "0"))
            h = float(el.get("height", "0"))
            if w <= 0 or h <= 0:
                raise SvgError("<rect> needs positive width and height")
            corners = [np.array(c) for c in
                       ((x, y), (x + w, y), (x + w, y + h), (x, y + h))]
            emit(corners, closed=True)

    walk(root)
    return SvgDrawing(polylines=polylines, extent=(doc_w * scale, doc_h * scale))
