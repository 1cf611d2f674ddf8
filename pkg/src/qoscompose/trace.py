"""Line-oriented run trace.

Every record is one line::

    <time> <kind> <node> [key=value ...]

``time`` is simulation seconds with nine decimals, ``node`` is the acting node
id or ``-``. Values never contain spaces. The first line is a ``#`` header and
a complete trace ends with an ``end`` record.

Record kinds and their fields:

=============  ==============================================================
``init``       ``energy`` initial joules, ``misbehaving`` 0/1, ``x``/``y``
``svc``        ``id`` concrete service, ``type`` abstract service, ``pfail``
``tx``         ``ptype``, ``bits``, ``d`` (metres used for the amplifier
               term), ``to`` (receiver or ``*``), ``req``/``ttl`` for requests
``rx``         ``ptype``, ``bits``, ``from``, ``nodes`` (comma list of
               receivers paying reception energy), ``req``/``ttl``
``drop``       ``ptype``, ``reason``, ``req``/``ttl`` when relevant
``obs``        ``subject``, ``fwd`` 0/1: ``node`` watched ``subject``
               handle one packet it was expected to forward
``death``      node ran out of energy
``attempt``    ``id`` composite request, ``plan`` abstract ids
``compose``    ``id``, ``try``, ``matrix`` (JSON), ``path`` node list
``noprovider`` ``id``, ``service``
``deliver``    ``id``, ``bits`` composite result reaching the initiator
``svc_fail``   ``id``, ``service``: service execution failed
``path_fail``  ``id``, ``try``, ``reason``
``success``    ``id``, ``try``
``giveup``     ``id``, ``reason``
``end``        ``events`` count of preceding records
=============  ==============================================================
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Optional, Union

HEADER = "# qoscompose-trace v1"


class TraceError(ValueError):
    pass


def fmt_time(t: float) -> str:
    return f"{t:.9f}"


def fmt_value(v) -> str:
    tv = type(v)
    if tv is int or tv is str:
        return str(v)
    if tv is bool:
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(float(v))
    if tv is list or tv is tuple:
        return ",".join(map(str, v))  # lists hold node ids or service names
    return str(v)


class TraceWriter:
    def __init__(self, header_fields: Optional[dict] = None):
        self.lines: list[str] = []
        head = HEADER
        if header_fields:
            head += " " + " ".join(f"{k}={fmt_value(v)}" for k, v in header_fields.items())
        self._header = head
        self.count = 0

    def emit(self, t: float, kind: str, node="-", **fields):
        parts = [f"{t:.9f} {kind} {node}"]
        for k, v in fields.items():
            tv = type(v)
            parts.append(f"{k}={v}" if tv is int or tv is str else f"{k}={fmt_value(v)}")
        self.lines.append(" ".join(parts))
        self.count += 1

    def close(self, t: float):
        self.emit(t, "end", "-", events=self.count)

    def text(self) -> str:
        return "\n".join([self._header] + self.lines) + "\n"

    def write(self, path: Union[str, Path]):
        Path(path).write_text(self.text())


class TraceRecord:
    """One parsed line; key=value fields are split on first access."""

    __slots__ = ("line_no", "time", "kind", "node", "_rest", "_fields")

    def __init__(self, line_no: int, time: float, kind: str, node: Optional[int], rest: str):
        self.line_no = line_no
        self.time = time
        self.kind = kind
        self.node = node
        self._rest = rest
        self._fields = None

    @property
    def fields(self) -> dict:
        if self._fields is None:
            self._fields = _split_fields(self._rest)
        return self._fields

    def int(self, key: str) -> int:
        return int(self.fields[key])

    def float(self, key: str) -> float:
        return float(self.fields[key])

    def ints(self, key: str) -> list[int]:
        raw = self.fields.get(key, "")
        return [int(x) for x in raw.split(",") if x != ""]

    def __repr__(self):
        return f"TraceRecord({self.line_no}, {self.time}, {self.kind!r}, {self.node}, {self._rest!r})"


def _split_fields(rest: str) -> dict:
    fields = {}
    for item in rest.split(" ") if rest else ():
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ValueError(f"bad field {item!r}")
        fields[key] = value
    return fields


def parse_line(line: str, line_no: int) -> TraceRecord:
    parts = line.split(" ", 3)
    if len(parts) < 3:
        raise ValueError("too few columns")
    t = float(parts[0])
    node = None if parts[2] == "-" else int(parts[2])
    rest = parts[3] if len(parts) == 4 else ""
    if rest and "=" not in rest.split(" ", 1)[0]:
        raise ValueError(f"bad field {rest.split(' ', 1)[0]!r}")
    return TraceRecord(line_no, t, parts[1], node, rest)


def read_trace(source: Union[str, Path, Iterable[str]]) -> tuple[str, list[TraceRecord]]:
    """Parse a complete trace, returning its header and records.

    A malformed line or a missing ``end`` record raises :class:`TraceError`
    naming the last valid record.
    """
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        lines = Path(source).read_text().splitlines()
    elif isinstance(source, str):
        lines = source.splitlines()
    else:
        lines = [l.rstrip("\n") for l in source]
    if not lines or not lines[0].startswith(HEADER):
        raise TraceError("trace is missing its header line")
    records: list[TraceRecord] = []

    def last_valid() -> str:
        if not records:
            return "header"
        r = records[-1]
        return f"line {r.line_no}: {lines[r.line_no - 1]}"

    for i, line in enumerate(lines[1:], start=2):
        if records and records[-1].kind == "end":
            raise TraceError(f"records after end marker; last valid record is {last_valid()}")
        try:
            records.append(parse_line(line, i))
        except ValueError as exc:
            raise TraceError(f"malformed record at line {i} ({exc}); "
                             f"last valid record is {last_valid()}") from None
    if not records or records[-1].kind != "end":
        raise TraceError(f"trace is truncated; last valid record is {last_valid()}")
    if records[-1].int("events") != len(records) - 1:
        raise TraceError(f"trace end marker counts {records[-1].fields['events']} records "
                         f"but {len(records) - 1} are present")
    return lines[0], records


def header_fields(header: str) -> dict:
    out = {}
    for item in header[len(HEADER):].split():
        k, _, v = item.partition("=")
        out[k] = v
    return out
