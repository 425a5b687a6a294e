"""Op-buffer engine: the four transformation functions, TP1, sites, GC,
and the sequencer (server-based) control path."""

import random

import pytest
from hypothesis import given, settings, strategies as st

from coedit.model import Delete, Insert, NoOp, VectorClock, apply_external
from coedit.ot import (
    ClientOpMsg,
    ContextMismatchError,
    OtSite,
    SequencerClient,
    SequencerServer,
    transform,
    transform_delete_delete,
    transform_delete_insert,
    transform_insert_delete,
    transform_insert_insert,
)

from conftest import both_orders, random_op, stamp


class TestTransformFunctions:
    # insert-insert -------------------------------------------------------
    def test_ii_left_of(self):
        assert transform_insert_insert(Insert(1, "x"), Insert(3, "y"), 1, 2) == Insert(1, "x")

    def test_ii_right_of(self):
        assert transform_insert_insert(Insert(3, "x"), Insert(1, "y"), 1, 2) == Insert(4, "x")
        assert both_orders("abcde", Insert(3, "x"), Insert(1, "y"))[0] == both_orders("abcde", Insert(3, "x"), Insert(1, "y"))[1]

    def test_ii_tie_lower_site_wins(self):
        assert transform_insert_insert(Insert(2, "x"), Insert(2, "y"), 1, 2) == Insert(2, "x")
        assert transform_insert_insert(Insert(2, "y"), Insert(2, "x"), 2, 1) == Insert(3, "y")

    # insert-delete -------------------------------------------------------
    def test_id_figure_walkthrough(self):
        assert transform_insert_delete(Insert(2, "c"), Delete(1)) == Insert(1, "c")

    def test_id_left_of_delete(self):
        assert transform_insert_delete(Insert(0, "x"), Delete(5)) == Insert(0, "x")

    def test_id_boundary_equal(self):
        assert transform_insert_delete(Insert(3, "x"), Delete(3)) == Insert(3, "x")

    # delete-insert -------------------------------------------------------
    def test_di_figure_walkthrough(self):
        assert transform_delete_insert(Delete(1), Insert(2, "c")) == Delete(1)

    def test_di_shift_right(self):
        assert transform_delete_insert(Delete(2), Insert(1, "x")) == Delete(3)
        one, two = both_orders("abcde", Delete(2), Insert(1, "x"))
        assert one == two

    def test_di_boundary_equal(self):
        assert transform_delete_insert(Delete(1), Insert(1, "x")) == Delete(2)
        one, two = both_orders("abcde", Delete(1), Insert(1, "x"))
        assert one == two

    # delete-delete -------------------------------------------------------
    def test_dd_left(self):
        assert transform_delete_delete(Delete(1), Delete(3)) == Delete(1)

    def test_dd_right_shifts(self):
        assert transform_delete_delete(Delete(3), Delete(1)) == Delete(2)
        one, two = both_orders("abcde", Delete(3), Delete(1))
        assert one == two

    def test_dd_same_target_noop(self):
        assert transform_delete_delete(Delete(2), Delete(2)) == NoOp()

    def test_noop_passthrough(self):
        assert transform(NoOp(), Insert(0, "x"), 1, 2) == NoOp()
        assert transform(Delete(1), NoOp(), 1, 2) == Delete(1)


@st.composite
def state_and_pair(draw):
    state = draw(st.text(alphabet="abcdef", max_size=12))
    def op(site_marker):
        if state and draw(st.booleans()):
            return Delete(draw(st.integers(0, len(state) - 1)))
        return Insert(draw(st.integers(0, len(state))), draw(st.sampled_from("xyz")))
    return state, op(1), op(2)


class TestTP1:
    @settings(max_examples=400, deadline=None)
    @given(state_and_pair())
    def test_both_orders_agree(self, case):
        state, a, b = case
        one, two = both_orders(state, a, b)
        assert one == two

    def test_all_four_combinations_sampled(self, rng):
        """Deterministic sweep covering every op-type pair at small lengths."""
        for length in range(0, 6):
            state = "abcdef"[:length]
            inserts = [Insert(p, "x") for p in range(length + 1)]
            deletes = [Delete(p) for p in range(length)]
            for a in inserts + deletes:
                for b in inserts + deletes:
                    b2 = Insert(b.position, "y") if isinstance(b, Insert) else b
                    one, two = both_orders(state, a, b2)
                    assert one == two, (state, a, b2)


class TestOtSite:
    def test_local_timestamps_and_buffers(self):
        a = OtSite(site=0, state="abe")
        o1 = a.local(Delete(1))
        assert a.state == "ae"
        assert o1.origin == 0 and o1.seq == 1 and o1.clock == VectorClock({0: 1})
        assert a.buffer == [o1]
        assert a.metrics.transform_count == 0

    def test_second_local_op_increments_seq(self):
        a = OtSite(site=0, state="abe")
        a.local(Delete(1))
        o2 = a.local(Insert(0, "x"))
        assert o2.seq == 2 and len(a.buffer) == 2

    def test_figure_walkthrough_both_sides(self):
        """Two sites on "abe": D(1) at A concurrent with I(2,'c') at B."""
        a = OtSite(site=0, state="abe")
        b = OtSite(site=1, state="abe")
        o1 = a.local(Delete(1))
        o2 = b.local(Insert(2, "c"))
        eo_a = a.remote(o2)
        assert eo_a == Insert(1, "c") and a.state == "ace"
        assert [t.op for t in a.buffer] == [Delete(1), Insert(1, "c")]
        eo_b = b.remote(o1)
        assert eo_b == Delete(1) and b.state == "ace"
        assert [t.op for t in b.buffer] == [Insert(2, "c"), Delete(1)]

    def test_remote_causally_after_applies_unchanged(self):
        a = OtSite(site=0, state="ab")
        o1 = a.local(Insert(2, "c"))
        later = stamp(Delete(0), 1, 1, {0: 1})
        assert a.remote(later) == Delete(0)
        assert a.metrics.transform_count == 0

    def test_context_mismatch_detected(self):
        """A buffered op causally *after* the remote op breaks the engine's
        precondition (causally-ready delivery) and must be reported."""
        a = OtSite(site=0, state="ab")
        buffered = stamp(Delete(0), 1, 2, {2: 1})
        a.buffer.append(buffered)
        a.frontier[buffered.key()] = buffered.op
        with pytest.raises(ContextMismatchError):
            a.remote(stamp(Insert(0, "q"), 2, 1))


class TestGc:
    def _two_site_session(self):
        a = OtSite(site=0, state="abe")
        b = OtSite(site=1, state="abe")
        o1 = a.local(Delete(1))
        o2 = b.local(Insert(2, "c"))
        a.remote(o2)
        b.remote(o1)
        return a, b

    def test_full_coverage_empties_buffer(self):
        a, b = self._two_site_session()
        stability = {0: a.clock, 1: b.clock}
        assert a.gc(stability) == 2
        assert a.buffer == [] and a.frontier == {}

    def test_partial_coverage_retains(self):
        a, b = self._two_site_session()
        stability = {0: a.clock, 1: VectorClock({1: 1})}  # site 1 missing O1
        assert a.gc(stability) == 1
        assert [t.key() for t in a.buffer] == [(0, 1)]

    def test_empty_buffer_returns_zero(self):
        a = OtSite(site=0, state="x")
        assert a.gc({0: VectorClock()}) == 0


class TestSequencer:
    def _session(self, n_sites, script, initial=""):
        """Run scripted (site, op) pairs through server+clients synchronously,
        interleaving delivery per the given schedule."""
        ids = list(range(n_sites))
        clients = {i: SequencerClient(site=i, state=initial) for i in ids}
        server = SequencerServer(client_ids=ids, state=initial)
        outbox = []
        for site, eo in script:
            outbox.append((site, clients[site].local(eo)))
        for site, msg in outbox:
            out = server.process(site, msg)
            for c in clients.values():
                c.remote(out)
        return server, clients

    def test_concurrent_pair_converges(self):
        server, clients = self._session(2, [(0, Delete(1)), (1, Insert(2, "c"))], initial="abe")
        states = {c.state for c in clients.values()}
        assert states == {"ace"} and server.state == "ace"

    def test_own_echo_returns_none(self):
        client = SequencerClient(site=0, state="ab")
        server = SequencerServer(client_ids=[0], state="ab")
        msg = client.local(Insert(2, "c"))
        out = server.process(0, msg)
        assert client.remote(out) is None
        assert client.pending == []

    def test_out_of_order_stream_rejected(self):
        client = SequencerClient(site=1, state="")
        other = SequencerClient(site=0, state="")
        server = SequencerServer(client_ids=[0, 1], state="")
        m1 = server.process(0, other.local(Insert(0, "a")))
        m2 = server.process(0, other.local(Insert(1, "b")))
        with pytest.raises(ContextMismatchError):
            client.remote(m2)

    def test_random_sessions_converge(self, rng):
        """Many small sessions at 2-5 sites with interleaved delivery."""
        for trial in range(40):
            n = rng.randint(2, 5)
            ids = list(range(n))
            initial = "abc"[: rng.randint(0, 3)]
            clients = {i: SequencerClient(site=i, state=initial) for i in ids}
            server = SequencerServer(client_ids=ids, state=initial)
            in_flight = []
            for _ in range(rng.randint(5, 25)):
                site = rng.randrange(n)
                op = random_op(rng, len(clients[site].state))
                in_flight.append((site, clients[site].local(op)))
                while in_flight and rng.random() < 0.5:
                    s, m = in_flight.pop(0)
                    out = server.process(s, m)
                    for c in clients.values():
                        c.remote(out)
            for s, m in in_flight:
                out = server.process(s, m)
                for c in clients.values():
                    c.remote(out)
            states = {c.state for c in clients.values()}
            assert len(states) == 1 and server.state in states, f"trial {trial}"

    def test_client_gc(self):
        server, clients = self._session(2, [(0, Delete(1)), (1, Insert(2, "c"))], initial="abe")
        c0 = clients[0]
        stability = {i: c.clock for i, c in clients.items()}
        assert c0.gc(stability) == 2
        assert c0.buffer == []
