"""GFA v1 reading and writing, plus GAF-style oriented path strings.

Only H, S and L records are interpreted. Any other record type is kept
verbatim so that a document survives a parse/write round trip.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Union

TagValue = Union[int, float, str]

_TAG_NAME = re.compile(r"^[A-Za-z][A-Za-z0-9]$")
_DNA = frozenset("ACGTN")
_ORIENT = ("+", "-")


class GfaError(ValueError):
    """Raised for malformed GFA input, with the offending line and column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Tag:
    type: str
    value: TagValue

    def render(self, name: str) -> str:
        if self.type == "f":
            return f"{name}:f:{self.value!r}"
        return f"{name}:{self.type}:{self.value}"


@dataclass
class GfaSegment:
    id: str
    sequence: str
    tags: dict[str, Tag] = field(default_factory=dict)

    def int_tag(self, name: str) -> int | None:
        tag = self.tags.get(name)
        return None if tag is None else int(tag.value)

    @property
    def kc(self) -> int | None:
        return self.int_tag("KC")

    @property
    def sc(self) -> int | None:
        return self.int_tag("SC")

    @property
    def dc(self) -> float | None:
        tag = self.tags.get("dc")
        return None if tag is None else float(tag.value)


@dataclass
class GfaLink:
    from_id: str
    from_orient: str
    to_id: str
    to_orient: str
    overlap: str = "0M"
    tags: dict[str, Tag] = field(default_factory=dict)

    @property
    def ec(self) -> int | None:
        tag = self.tags.get("EC")
        return None if tag is None else int(tag.value)


@dataclass
class GfaDocument:
    segments: list[GfaSegment] = field(default_factory=list)
    links: list[GfaLink] = field(default_factory=list)
    headers: list[str] = field(default_factory=list)
    other: list[str] = field(default_factory=list)

    def segment_map(self) -> dict[str, GfaSegment]:
        return {s.id: s for s in self.segments}

    def validate(self) -> None:
        seen: set[str] = set()
        for seg in self.segments:
            if not seg.id:
                raise GfaError("empty segment id")
            if seg.id in seen:
                raise GfaError(f"duplicate segment id {seg.id!r}")
            seen.add(seg.id)
        for link in self.links:
            for end in (link.from_id, link.to_id):
                if end not in seen:
                    raise GfaError(f"link endpoint {end!r} does not resolve to a segment")


def _parse_tag(text: str, lineno: int, column: int) -> tuple[str, Tag]:
    parts = text.split(":", 2)
    if len(parts) != 3:
        raise GfaError(f"malformed tag {text!r}", lineno, column)
    name, typ, raw = parts
    if not _TAG_NAME.match(name):
        raise GfaError(f"bad tag name {name!r}", lineno, column)
    try:
        if typ == "i":
            value: TagValue = int(raw)
        elif typ == "f":
            value = float(raw)
        elif typ == "A":
            if len(raw) != 1:
                raise ValueError(raw)
            value = raw
        elif typ in ("Z", "J", "H", "B"):
            value = raw
        else:
            raise GfaError(f"unknown tag type {typ!r} in {text!r}", lineno, column)
    except ValueError:
        raise GfaError(f"tag {text!r} does not match its type {typ!r}", lineno, column) from None
    return name, Tag(typ, value)


def _parse_tags(fields: list[str], start: int, lineno: int, line: str) -> dict[str, Tag]:
    tags: dict[str, Tag] = {}
    for i in range(start, len(fields)):
        column = _column_of(line, i)
        name, tag = _parse_tag(fields[i], lineno, column)
        if name in tags:
            raise GfaError(f"duplicate tag {name!r}", lineno, column)
        tags[name] = tag
    return tags


def _column_of(line: str, field_index: int) -> int:
    """1-based column where tab-separated field ``field_index`` starts."""
    pos = 0
    for _ in range(field_index):
        pos = line.index("\t", pos) + 1
    return pos + 1


def _clean_sequence(seq: str, lineno: int, column: int) -> str:
    if seq == "*":
        return seq
    if not seq:
        raise GfaError("empty sequence", lineno, column)
    seq = seq.upper()
    for offset, ch in enumerate(seq):
        if ch not in _DNA:
            raise GfaError(f"non-DNA character {ch!r} in sequence", lineno, column + offset)
    return seq


def parse_gfa(text: bytes | str | Iterable[str]) -> GfaDocument:
    """Parse GFA v1 text into a :class:`GfaDocument`.

    Raises :class:`GfaError` naming the line (and column where meaningful)
    of the first problem found.
    """
    if isinstance(text, bytes):
        text = text.decode("ascii")
    lines = text.splitlines() if isinstance(text, str) else [l.rstrip("\n") for l in text]

    doc = GfaDocument()
    seen: dict[str, int] = {}
    link_lines: list[int] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            continue
        fields = line.split("\t")
        kind = fields[0]
        if kind == "H":
            doc.headers.append(line)
        elif kind == "S":
            if len(fields) < 3:
                raise GfaError("S record needs an id and a sequence", lineno)
            sid = fields[1]
            if not sid:
                raise GfaError("empty segment id", lineno, _column_of(line, 1))
            if sid in seen:
                raise GfaError(f"duplicate segment id {sid!r} (first seen on line {seen[sid]})",
                               lineno, _column_of(line, 1))
            seen[sid] = lineno
            seq = _clean_sequence(fields[2], lineno, _column_of(line, 2))
            doc.segments.append(GfaSegment(sid, seq, _parse_tags(fields, 3, lineno, line)))
        elif kind == "L":
            if len(fields) < 6:
                raise GfaError("L record needs 5 fields", lineno)
            for idx in (2, 4):
                if fields[idx] not in _ORIENT:
                    raise GfaError(f"bad orientation {fields[idx]!r}", lineno, _column_of(line, idx))
            doc.links.append(GfaLink(fields[1], fields[2], fields[3], fields[4], fields[5],
                                     _parse_tags(fields, 6, lineno, line)))
            link_lines.append(lineno)
        else:
            doc.other.append(line)

    for link, lineno in zip(doc.links, link_lines):
        for idx, end in ((1, link.from_id), (3, link.to_id)):
            if end not in seen:
                raise GfaError(f"dangling link endpoint {end!r}", lineno, None)
    return doc


def _render_tags(tags: dict[str, Tag]) -> list[str]:
    return [tags[name].render(name) for name in sorted(tags)]


def write_gfa(doc: GfaDocument) -> bytes:
    """Serialise ``doc``. Tags are written in alphabetical order."""
    out = list(doc.headers) if doc.headers else ["H\tVN:Z:1.0"]
    for seg in doc.segments:
        out.append("\t".join(["S", seg.id, seg.sequence, *_render_tags(seg.tags)]))
    for link in doc.links:
        out.append("\t".join(["L", link.from_id, link.from_orient, link.to_id, link.to_orient,
                              link.overlap, *_render_tags(link.tags)]))
    out.extend(doc.other)
    return ("\n".join(out) + "\n").encode("ascii")


def read_gfa(path) -> GfaDocument:
    with open(path, "rb") as fh:
        return parse_gfa(fh.read())


def save_gfa(doc: GfaDocument, path) -> None:
    with open(path, "wb") as fh:
        fh.write(write_gfa(doc))


# --- oriented path strings (">s1<s2") -------------------------------------

OrientedPathString = list[tuple[str, str]]

_PATH_TOKEN = re.compile(r"([<>])([^<>]+)")


def parse_path_string(s: str) -> OrientedPathString:
    """Parse ``">s1<s2"`` into ``[("s1", "+"), ("s2", "-")]``."""
    if not s:
        raise ValueError("empty path string")
    if s[0] not in "<>":
        raise ValueError(f"path string must start with '>' or '<': {s!r}")
    steps = []
    pos = 0
    for m in _PATH_TOKEN.finditer(s):
        if m.start() != pos:
            break
        steps.append((m.group(2), "+" if m.group(1) == ">" else "-"))
        pos = m.end()
    if pos != len(s):
        raise ValueError(f"orientation character without node id at offset {pos} in {s!r}")
    return steps


def render_path_string(steps: Iterable[tuple[str, str]]) -> str:
    return "".join((">" if o == "+" else "<") + node for node, o in steps)
