"""Uniform site container and wire formats.

A Site owns the visible text and delegates consistency work to an engine
through two calls: loh (local op -> wire message) and roh (wire message ->
position-based op to replay). Both shipped engines plug in here, so the
harness can run identical scenarios against either.

Wire layout (big-endian, length-prefixed):
  envelope  = origin u32 | seq u64 | nclock u32 | nclock * (site u32, count u64)
              | payload_len u32 | payload
  payloads  = 'T' op-text                      symmetric OT op
              'C' seen u64, op-text            OT client -> sequencer
              'S' index u64, op-text           sequencer -> OT clients
              'W' char, id, prev, next         WOOT insert (id = sid i64, seq u64)
              'X' target id                    WOOT delete
Op-text is the canonical `I <pos> <char>` / `D <pos>` / `N` form, UTF-8.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Optional, Union

from .model import ExternalOp, NoOp, SiteId, TimestampedOp, VectorClock, apply_external, format_op, parse_op
from .ot import ClientOpMsg, OtSite, SequencerClient, ServerOpMsg
from .woot import DeleteId, IdOp, InsertId, ObjectId, WootSite

WireMessage = Union[TimestampedOp, ClientOpMsg, ServerOpMsg, IdOp]


def message_meta(msg: WireMessage) -> tuple:
    """(origin, seq, clock) of the op carried by any wire message."""
    stamped = msg.stamped if isinstance(msg, (ClientOpMsg, ServerOpMsg)) else msg
    return stamped.origin, stamped.seq, stamped.clock


# ---------------------------------------------------------------------------
# serialization


def _encode_id(oid: ObjectId) -> bytes:
    return struct.pack(">qQ", oid.sid, oid.seq)


def _decode_id(data: bytes, off: int) -> tuple:
    sid, seq = struct.unpack_from(">qQ", data, off)
    return ObjectId(sid, seq), off + 16


def _encode_text(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack(">I", len(raw)) + raw


def _decode_text(data: bytes, off: int) -> tuple:
    (n,) = struct.unpack_from(">I", data, off)
    off += 4
    return data[off : off + n].decode("utf-8"), off + n


def encode_payload(msg: WireMessage) -> bytes:
    if isinstance(msg, TimestampedOp):
        return b"T" + _encode_text(format_op(msg.op))
    if isinstance(msg, ClientOpMsg):
        return b"C" + struct.pack(">Q", msg.seen) + _encode_text(format_op(msg.stamped.op))
    if isinstance(msg, ServerOpMsg):
        return b"S" + struct.pack(">Q", msg.index) + _encode_text(format_op(msg.stamped.op))
    if isinstance(msg, IdOp):
        if isinstance(msg.op, InsertId):
            return (
                b"W"
                + _encode_text(msg.op.character)
                + _encode_id(msg.op.id)
                + _encode_id(msg.op.prev)
                + _encode_id(msg.op.next)
            )
        return b"X" + _encode_id(msg.op.target)
    raise TypeError(f"not a wire message: {msg!r}")


def decode_payload(payload: bytes, origin: SiteId, seq: int, clock: VectorClock) -> WireMessage:
    kind, off = payload[:1], 1
    if kind == b"T":
        text, _ = _decode_text(payload, off)
        return TimestampedOp(parse_op(text), origin, seq, clock)
    if kind == b"C":
        (seen,) = struct.unpack_from(">Q", payload, off)
        text, _ = _decode_text(payload, off + 8)
        return ClientOpMsg(TimestampedOp(parse_op(text), origin, seq, clock), seen)
    if kind == b"S":
        (index,) = struct.unpack_from(">Q", payload, off)
        text, _ = _decode_text(payload, off + 8)
        return ServerOpMsg(TimestampedOp(parse_op(text), origin, seq, clock), index)
    if kind == b"W":
        char, off = _decode_text(payload, off)
        oid, off = _decode_id(payload, off)
        prev, off = _decode_id(payload, off)
        nxt, off = _decode_id(payload, off)
        return IdOp(InsertId(char, oid, prev, nxt), origin, seq, clock)
    if kind == b"X":
        target, _ = _decode_id(payload, off)
        return IdOp(DeleteId(target), origin, seq, clock)
    raise ValueError(f"unknown payload kind {kind!r}")


def encode_envelope(origin: SiteId, seq: int, clock: VectorClock, payload: bytes) -> bytes:
    items = clock.sorted_items()
    head = struct.pack(">IQI", origin, seq, len(items))
    body = b"".join(struct.pack(">IQ", s, n) for s, n in items)
    return head + body + struct.pack(">I", len(payload)) + payload


def decode_envelope(data: bytes) -> tuple:
    origin, seq, nclock = struct.unpack_from(">IQI", data, 0)
    off = 16
    entries = {}
    for _ in range(nclock):
        s, n = struct.unpack_from(">IQ", data, off)
        entries[s] = n
        off += 12
    (plen,) = struct.unpack_from(">I", data, off)
    off += 4
    payload = data[off : off + plen]
    return origin, seq, VectorClock(entries), payload


def encode_message(msg: WireMessage) -> bytes:
    origin, seq, clock = message_meta(msg)
    return encode_envelope(origin, seq, clock, encode_payload(msg))


def decode_message(data: bytes) -> WireMessage:
    origin, seq, clock, payload = decode_envelope(data)
    return decode_payload(payload, origin, seq, clock)


# ---------------------------------------------------------------------------
# site container


class EngineInvariantError(RuntimeError):
    """The engine's mirror of the document disagrees with the visible text."""


@dataclass
class Site:
    """Visible text plus an engine; enforces the call order of the framework.

    Local path: apply to external, then loh, then hand the message out.
    Remote path: roh, then apply the returned op to external.
    """

    id: SiteId
    engine: Union[OtSite, SequencerClient, WootSite]
    external: str = ""
    ablation: bool = False  # WOOT only: suppress conversion + external apply

    def generate(self, eo: ExternalOp) -> WireMessage:
        if isinstance(eo, NoOp):
            raise ValueError("NoOp has no effect and is not propagated")
        self.external = apply_external(self.external, eo)
        msg = self.engine.local(eo)
        self._check_mirror()
        return msg

    def deliver(self, msg: WireMessage) -> Optional[ExternalOp]:
        if isinstance(msg, IdOp):
            if msg.origin == self.id:
                raise ValueError("a site never delivers its own message")
            eo = self.engine.remote(msg, skip_conversion=self.ablation)
        elif isinstance(msg, ServerOpMsg):
            eo = self.engine.remote(msg)  # own echo yields None
        else:
            stamped = msg if isinstance(msg, TimestampedOp) else msg.stamped
            if stamped.origin == self.id:
                raise ValueError("a site never delivers its own message")
            eo = self.engine.remote(stamped)
        if eo is not None:
            self.external = apply_external(self.external, eo)
        if not self.ablation:
            self._check_mirror()
        return eo

    def _check_mirror(self) -> None:
        if self.engine.state != self.external:
            raise EngineInvariantError(
                f"site {self.id}: engine mirror {self.engine.state!r} != external {self.external!r}"
            )
        if isinstance(self.engine, WootSite) and self.engine.istate.value() != self.external:
            raise EngineInvariantError(
                f"site {self.id}: value(IS) {self.engine.istate.value()!r} != external {self.external!r}"
            )
