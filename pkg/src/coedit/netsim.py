"""Deterministic discrete-event network: causal broadcast, optional sequencer.

Virtual integer ticks, a seeded RNG for latency draws, and a strict event
ordering (tick, insertion order) make every run a pure function of
(scenario, config, seed). Messages cross the wire as encoded envelopes so
the byte formats are exercised on every run.

Two modes:
  causal    - every message is broadcast to all other sites and held at each
              destination until causally ready (origin's next seq, nothing
              from other sites the receiver has not seen).
  sequencer - every message goes to a central virtual node first. The node
              hands each op to a handler (the OT sequencer server rebases it;
              a plain relay just stamps it), assigns a consecutive index, and
              broadcasts it to all sites, which deliver in index order.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple, Union

from .model import SiteId, VectorClock, format_op
from .framework import (
    WireMessage,
    decode_message,
    encode_message,
    message_meta,
)
from .ot import ClientOpMsg, SequencerServer, ServerOpMsg
from .woot import IdOp, NotExecutableError


@dataclass(frozen=True)
class FixedLatency:
    ticks: int = 1


@dataclass(frozen=True)
class UniformLatency:
    lo: int = 1
    hi: int = 10


@dataclass(frozen=True)
class MatrixLatency:
    """Per-link delays; keys are (src, dst) pairs, sequencer node is -1."""

    table: tuple  # of ((src, dst), ticks)

    def lookup(self, src: int, dst: int) -> int:
        for (s, d), t in self.table:
            if (s, d) == (src, dst):
                return t
        raise KeyError(f"no latency entry for link {src}->{dst}")


LatencyModel = Union[FixedLatency, UniformLatency, MatrixLatency]

SEQUENCER_NODE = -1


@dataclass(frozen=True)
class SimConfig:
    mode: str = "causal"  # "causal" | "sequencer"
    latency: LatencyModel = FixedLatency(1)
    seed: int = 0
    sites: int = 2

    def __post_init__(self):
        if self.mode not in ("causal", "sequencer"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class Envelope:
    origin: SiteId
    seq: int
    clock: VectorClock
    payload: bytes  # full encoded message
    send_time: int
    arrivals: Dict[int, int] = field(default_factory=dict)


def causally_ready(origin: SiteId, clock: VectorClock, local: VectorClock) -> bool:
    """The op is origin's next, and carries nothing the receiver lacks."""
    if clock.get(origin) != local.get(origin) + 1:
        return False
    return all(n <= local.get(s) for s, n in clock.entries.items() if s != origin)


class Simulator:
    """Owns the event loop; sites are invoked sequentially via callbacks.

    `generate_cb(site, tick)` returns a wire message (or None to skip);
    `deliver_cb(site, message, tick)` replays a remote message at a site and
    returns the position-based op actually applied (or None).
    `clock_of(site)` exposes the site's delivery clock for causal gating.
    """

    def __init__(
        self,
        config: SimConfig,
        site_ids: List[SiteId],
        generate_cb: Callable,
        deliver_cb: Callable,
        clock_of: Callable,
        sequencer_server: Optional[SequencerServer] = None,
    ):
        self.config = config
        self.site_ids = list(site_ids)
        self.generate_cb = generate_cb
        self.deliver_cb = deliver_cb
        self.clock_of = clock_of
        self.rng = random.Random(config.seed)
        self.events: list = []  # heap of (tick, counter, kind, data)
        self._counter = 0
        self.trace: List[str] = []
        self.now = 0
        # causal mode hold-back
        self.pending: Dict[SiteId, List[Envelope]] = {s: [] for s in site_ids}
        # woot executability hold-back (drains under causal delivery)
        self.requeued: Dict[SiteId, List[WireMessage]] = {s: [] for s in site_ids}
        self.requeue_events = 0
        # sequencer state
        self.sequencer_server = sequencer_server
        self.seq_hold: Dict[SiteId, dict] = {s: {} for s in site_ids}  # index -> Envelope
        self.seq_next: Dict[SiteId, int] = {s: 0 for s in site_ids}
        self.seq_fifo: Dict[SiteId, dict] = {s: {} for s in site_ids}  # per-origin seq hold-back
        self.seq_expected: Dict[SiteId, int] = {s: 1 for s in site_ids}

    # -- scheduling ---------------------------------------------------------

    def _push(self, tick: int, kind: str, data) -> None:
        heapq.heappush(self.events, (tick, self._counter, kind, data))
        self._counter += 1

    def schedule_generation(self, tick: int, site: SiteId) -> None:
        self._push(tick, "gen", site)

    def _draw_latency(self, src: int, dst: int) -> int:
        lat = self.config.latency
        if isinstance(lat, FixedLatency):
            d = lat.ticks
        elif isinstance(lat, UniformLatency):
            d = self.rng.randint(lat.lo, lat.hi)
        else:
            d = lat.lookup(src, dst)
        return max(1, d)

    def broadcast(self, msg: WireMessage, src: int, dests: List[int]) -> Envelope:
        origin, seq, clock = message_meta(msg)
        env = Envelope(origin, seq, clock, encode_message(msg), self.now)
        for dst in sorted(dests):
            delay = self._draw_latency(src, dst)
            env.arrivals[dst] = self.now + delay
            self._push(self.now + delay, "net", (dst, env))
        return env

    # -- event handling -----------------------------------------------------

    def _handle_generation(self, site: SiteId) -> None:
        msg = self.generate_cb(site, self.now)
        if msg is None:
            return
        origin, seq, clock = message_meta(msg)
        self.trace.append(f"tick={self.now} site={site} kind=gen op={self._op_text(msg)} key={origin}:{seq}")
        if self.config.mode == "sequencer":
            self.broadcast(msg, site, [SEQUENCER_NODE])
        else:
            self.broadcast(msg, site, [s for s in self.site_ids if s != site])

    def _op_text(self, msg: WireMessage) -> str:
        if isinstance(msg, IdOp):
            return str(msg.op).replace(" ", "")
        stamped = msg.stamped if isinstance(msg, (ClientOpMsg, ServerOpMsg)) else msg
        return format_op(stamped.op).replace(" ", "_")

    def _handle_sequencer(self, env: Envelope) -> None:
        msg = decode_message(env.payload)
        origin, seq, _ = message_meta(msg)
        # client -> server links are logically FIFO: process in per-origin seq order
        self.seq_fifo[origin][seq] = msg
        while self.seq_expected[origin] in self.seq_fifo[origin]:
            ready = self.seq_fifo[origin].pop(self.seq_expected[origin])
            self.seq_expected[origin] += 1
            if not isinstance(ready, ClientOpMsg) or self.sequencer_server is None:
                raise ValueError("sequencer mode requires the OT sequencer engine")
            out = self.sequencer_server.process(origin, ready)
            self.broadcast(out, SEQUENCER_NODE, self.site_ids)

    def _handle_arrival(self, dst: int, env: Envelope) -> None:
        if dst == SEQUENCER_NODE:
            self._handle_sequencer(env)
            return
        if self.config.mode == "sequencer":
            self._arrive_sequenced(dst, env)
        else:
            self.pending[dst].append(env)
            self._drain_causal(dst)

    def _arrive_sequenced(self, dst: int, env: Envelope) -> None:
        # messages leave the sequencer in index order; per-destination links
        # may reorder them, so hold back until the stream index matches
        msg = decode_message(env.payload)
        if not isinstance(msg, ServerOpMsg):
            raise ValueError("sequencer mode requires ServerOpMsg payloads")
        self.seq_hold[dst][msg.index] = msg
        while self.seq_next[dst] in self.seq_hold[dst]:
            ready = self.seq_hold[dst].pop(self.seq_next[dst])
            self.seq_next[dst] += 1
            self._deliver(dst, ready)

    def _deliver(self, dst: int, msg: WireMessage) -> None:
        origin, seq, _ = message_meta(msg)
        try:
            eo = self.deliver_cb(dst, msg, self.now)
        except NotExecutableError:
            self.requeued[dst].append(msg)
            self.requeue_events += 1
            return
        text = "none" if eo is None else format_op(eo).replace(" ", "_")
        self.trace.append(f"tick={self.now} site={dst} kind=deliver op={text} key={origin}:{seq}")
        self._retry_requeued(dst)

    def _retry_requeued(self, dst: int) -> None:
        progress = True
        while progress and self.requeued[dst]:
            progress = False
            still: List[WireMessage] = []
            for msg in self.requeued[dst]:
                try:
                    eo = self.deliver_cb(dst, msg, self.now)
                except NotExecutableError:
                    still.append(msg)
                    continue
                origin, seq, _ = message_meta(msg)
                text = "none" if eo is None else format_op(eo).replace(" ", "_")
                self.trace.append(f"tick={self.now} site={dst} kind=deliver op={text} key={origin}:{seq}")
                progress = True
            self.requeued[dst] = still

    def _drain_causal(self, dst: int) -> None:
        progress = True
        while progress:
            progress = False
            for i, env in enumerate(self.pending[dst]):
                if causally_ready(env.origin, env.clock, self.clock_of(dst)):
                    self.pending[dst].pop(i)
                    self._deliver(dst, decode_message(env.payload))
                    progress = True
                    break

    # -- main loop ----------------------------------------------------------

    def run(self) -> List[str]:
        while self.events:
            tick, _, kind, data = heapq.heappop(self.events)
            self.now = tick
            if kind == "gen":
                self._handle_generation(data)
            else:
                dst, env = data
                self._handle_arrival(dst, env)
        return self.trace

    def quiescent(self) -> bool:
        return (
            not self.events
            and all(not q for q in self.pending.values())
            and all(not q for q in self.requeued.values())
            and all(not h for h in self.seq_hold.values())
            and all(not f for f in self.seq_fifo.values())
        )

    def log_gc(self, site: SiteId, collected: int) -> None:
        self.trace.append(f"tick={self.now} site={site} kind=gc op=collected:{collected} key={site}:-")
