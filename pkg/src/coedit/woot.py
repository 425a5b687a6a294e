"""WOOT-style sequence CRDT engine: identifier-based ops over an internal
object sequence with tombstones.

Every character lives in an object carrying an immutable id and the ids of
the two objects that were its visible neighbours at creation time. Deletion
only hides an object; nothing is ever removed, so concurrent operations can
always resolve their anchors. Position <-> identifier conversions walk the
sequence and count visible objects (the search-count method), and the walk
lengths are recorded as the engine's cost metric.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Union

from .model import (
    BoundsError,
    Delete,
    ExternalOp,
    Insert,
    NoOp,
    SiteId,
    VectorClock,
    apply_external,
)

# Pseudo site id for objects created from the initial document; sorts below
# all real (non-negative) site ids so initial objects order deterministically.
INIT_SID = -1


@dataclass(frozen=True)
class ObjectId:
    """Totally ordered object identifier, with Start/End sentinels."""

    sid: int
    seq: int

    def sort_key(self) -> tuple:
        if self == START:
            return (0, 0, 0)
        if self == END:
            return (2, 0, 0)
        return (1, self.sid, self.seq)

    def __lt__(self, other: "ObjectId") -> bool:
        return self.sort_key() < other.sort_key()

    def __str__(self) -> str:
        if self == START:
            return "@s"
        if self == END:
            return "@e"
        return f"{self.sid}.{self.seq}"


START = ObjectId(-(2**31), 0)
END = ObjectId(2**31, 0)


@dataclass
class WObject:
    character: str
    id: ObjectId
    prev: ObjectId
    next: ObjectId
    visible: bool

    def is_sentinel(self) -> bool:
        return self.id == START or self.id == END

    def dump_line(self) -> str:
        if self.is_sentinel():
            return str(self.id)
        vis = "v" if self.visible else "iv"
        return f"{self.character}|{self.id}|prev={self.prev}|next={self.next}|{vis}"


@dataclass(frozen=True)
class InsertId:
    character: str
    id: ObjectId
    prev: ObjectId
    next: ObjectId


@dataclass(frozen=True)
class DeleteId:
    target: ObjectId


@dataclass(frozen=True)
class IdOp:
    """Identifier-based op plus delivery metadata."""

    op: Union[InsertId, DeleteId]
    origin: SiteId
    seq: int
    clock: VectorClock

    def key(self) -> tuple:
        return (self.origin, self.seq)


class NotExecutableError(RuntimeError):
    """The op's anchors are not present yet; the delivery layer must requeue."""


class UnknownTargetError(RuntimeError):
    """A delete names an id that does not exist in the sequence."""


class ObjectSequence:
    """The internal state: sentinel-bounded object list with tombstones."""

    def __init__(self):
        self.objects: List[WObject] = [
            WObject("", START, START, END, False),
            WObject("", END, START, END, False),
        ]
        self.search_steps = 0  # object visits across all scans

    @classmethod
    def from_text(cls, doc: str, creator: SiteId = INIT_SID) -> "ObjectSequence":
        seq = cls()
        ids = [START] + [ObjectId(creator, i + 1) for i in range(len(doc))] + [END]
        body = [
            WObject(ch, ids[i + 1], ids[i], ids[i + 2], True)
            for i, ch in enumerate(doc)
        ]
        seq.objects[1:1] = body
        return seq

    # -- scans (all counted as search steps) --------------------------------

    def index_of(self, oid: ObjectId) -> int:
        for i, obj in enumerate(self.objects):
            self.search_steps += 1
            if obj.id == oid:
                return i
        raise UnknownTargetError(f"object id {oid} not in sequence")

    def contains(self, oid: ObjectId) -> bool:
        for obj in self.objects:
            self.search_steps += 1
            if obj.id == oid:
                return True
        return False

    def nth_visible_index(self, n: int) -> int:
        """Index of the n-th (0-based) visible object."""
        count = 0
        for i, obj in enumerate(self.objects):
            self.search_steps += 1
            if obj.visible:
                if count == n:
                    return i
                count += 1
        raise BoundsError(f"visible index {n} out of range (only {count} visible)")

    def visible_rank(self, index: int) -> int:
        """Number of visible objects strictly before `index`."""
        rank = 0
        for obj in self.objects[:index]:
            self.search_steps += 1
            if obj.visible:
                rank += 1
        return rank

    # -- derived views ------------------------------------------------------

    def value(self) -> str:
        return "".join(o.character for o in self.objects if o.visible)

    def visible_count(self) -> int:
        return sum(1 for o in self.objects if o.visible)

    def total_count(self) -> int:
        """Non-sentinel objects, tombstones included."""
        return len(self.objects) - 2

    def dump(self) -> str:
        return "\n".join(o.dump_line() for o in self.objects)

    # -- conversions --------------------------------------------------------

    def pos_to_id(self, eo: ExternalOp, site: SiteId, next_seq: int) -> Union[InsertId, DeleteId]:
        """Convert a position-based op (not yet applied here) to identifier form."""
        if isinstance(eo, Delete):
            target = self.objects[self.nth_visible_index(eo.position)]
            return DeleteId(target.id)
        if isinstance(eo, Insert):
            if not 0 <= eo.position <= self.visible_count():
                raise BoundsError(f"insert position {eo.position} out of range for {self.visible_count()} visible objects")
            prev = START if eo.position == 0 else self.objects[self.nth_visible_index(eo.position - 1)].id
            nxt = END if eo.position == self.visible_count() else self.objects[self.nth_visible_index(eo.position)].id
            return InsertId(eo.character, ObjectId(site, next_seq), prev, nxt)
        raise ValueError(f"cannot convert {eo!r} to identifier form")

    def id_to_pos(self, op: Union[InsertId, DeleteId]) -> ExternalOp:
        """Convert an already-integrated identifier op back to position form."""
        if isinstance(op, DeleteId):
            index = self.index_of(op.target)
            # The target was visible the instant before it was tombstoned, so
            # its position is the count of visible objects in front of it.
            return Delete(self.visible_rank(index))
        index = self.index_of(op.id)
        return Insert(self.visible_rank(index), op.character)

    # -- integration --------------------------------------------------------

    def integrate_delete(self, op: DeleteId) -> None:
        """Tombstone the target; idempotent."""
        obj = self.objects[self.index_of(op.target)]
        obj.visible = False

    def executable(self, op: Union[InsertId, DeleteId]) -> bool:
        if isinstance(op, DeleteId):
            return self.contains(op.target)
        return self.contains(op.prev) and self.contains(op.next)

    def integrate_insert(self, op: InsertId) -> None:
        """Place the new object between its anchors.

        When other objects sit strictly between the anchors, the span is
        narrowed to the candidates whose own anchors enclose the whole span,
        the new id is ordered among them, and placement recurses into the
        chosen sub-span. All replicas resolve concurrent siblings identically.
        """
        if self.contains(op.id):  # duplicate delivery
            return
        new = WObject(op.character, op.id, op.prev, op.next, True)
        prev, nxt = op.prev, op.next
        while True:
            p = self.index_of(prev)
            n = self.index_of(nxt)
            if p >= n:
                raise NotExecutableError(f"anchor order violated for {op.id}: {prev} !< {nxt}")
            if n == p + 1:
                self.objects.insert(n, new)
                return
            candidates = [self.objects[p]]
            for obj in self.objects[p + 1 : n]:
                self.search_steps += 1
                o_prev, o_next = self._placement_anchors(obj)
                if self.index_of(o_prev) <= p and self.index_of(o_next) >= n:
                    candidates.append(obj)
            candidates.append(self.objects[n])
            if len(candidates) == 2:
                raise RuntimeError(
                    f"placement stalled for {op.id}: no candidate strictly between {prev} and {nxt}"
                )
            i = 1
            while i < len(candidates) - 1 and candidates[i].id < new.id:
                i += 1
            prev, nxt = candidates[i - 1].id, candidates[i].id

    @staticmethod
    def _placement_anchors(obj: WObject) -> tuple:
        """Anchors used by the recursive placement rule.

        Initial-document objects record their chain neighbours as (prev, next)
        so the dump matches the canonical initial sequence, but the sequence
        was not built by inserts with those anchors. For placement they behave
        as if typed left to right (each anchored on its predecessor and the
        end sentinel), which is a genuine operation history; without this the
        candidate narrowing can stall between two initial objects whose
        interior is all tombstones.
        """
        if obj.id.sid == INIT_SID:
            return obj.prev, END
        return obj.prev, obj.next


@dataclass
class WootMetrics:
    search_steps_per_op: list = field(default_factory=list)
    visible_counts: list = field(default_factory=list)
    total_counts: list = field(default_factory=list)
    init_cost: int = 0
    init_ns: int = 0


@dataclass
class WootSite:
    """One WOOT replica: object sequence plus a mirror of the visible text."""

    site: SiteId
    istate: ObjectSequence
    state: str = ""
    clock: VectorClock = field(default_factory=VectorClock)
    metrics: WootMetrics = field(default_factory=WootMetrics)

    @classmethod
    def create(cls, site: SiteId, doc: str) -> "WootSite":
        import time

        t0 = time.perf_counter_ns()
        istate = ObjectSequence.from_text(doc)
        init_ns = time.perf_counter_ns() - t0
        ws = cls(site=site, istate=istate, state=doc)
        ws.metrics.init_cost = istate.total_count()
        ws.metrics.init_ns = init_ns
        return ws

    def _sample(self, steps_before: int) -> None:
        self.metrics.search_steps_per_op.append(self.istate.search_steps - steps_before)
        self.metrics.visible_counts.append(self.istate.visible_count())
        self.metrics.total_counts.append(self.istate.total_count())

    def local(self, eo: ExternalOp) -> IdOp:
        """Convert a local position-based op, integrate it, and hand it back
        for propagation. The conversion runs against the pre-op sequence."""
        if isinstance(eo, NoOp):
            raise ValueError("NoOp is not propagated")
        steps0 = self.istate.search_steps
        self.clock = self.clock.tick(self.site)
        seq = self.clock.get(self.site)
        id_form = self.istate.pos_to_id(eo, self.site, seq)
        if isinstance(id_form, InsertId):
            self.istate.integrate_insert(id_form)
        else:
            self.istate.integrate_delete(id_form)
        self.state = apply_external(self.state, eo)
        self._sample(steps0)
        return IdOp(id_form, self.site, seq, self.clock)

    def remote(self, idop: IdOp, skip_conversion: bool = False) -> Optional[ExternalOp]:
        """Integrate a remote identifier-based op and return the position-based
        form for the visible text.

        `skip_conversion` stops after integration (the internal sequence is
        updated but the visible text is not), for demonstrating that the
        conversion step is load-bearing.
        """
        if not self.istate.executable(idop.op):
            raise NotExecutableError(f"op {idop.key()} anchors not present yet")
        steps0 = self.istate.search_steps
        already_gone = False
        if isinstance(idop.op, InsertId):
            self.istate.integrate_insert(idop.op)
        else:
            # a concurrent delete may have hit the same object first; then
            # this op has no external effect
            target = self.istate.objects[self.istate.index_of(idop.op.target)]
            already_gone = not target.visible
            self.istate.integrate_delete(idop.op)
        self.clock = self.clock.merge(idop.clock)
        if skip_conversion:
            self._sample(steps0)
            return None
        eo = NoOp() if already_gone else self.istate.id_to_pos(idop.op)
        self.state = apply_external(self.state, eo)
        self._sample(steps0)
        return eo
