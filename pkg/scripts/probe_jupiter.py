"""Throwaway probe: convergence of sequencer-server OT control at 2-5 sites."""

import random
import sys

sys.path.insert(0, "src")

from coedit.model import Insert, Delete
from coedit.ot import SequencerClient, SequencerServer


def run(seed, n_sites, n_ops=8, doc="abcd"):
    rng = random.Random(seed)
    clients = [SequencerClient(site=i, state=doc) for i in range(n_sites)]
    server = SequencerServer(client_ids=list(range(n_sites)), state=doc)
    to_server = []   # (sender, ClientOpMsg) in client send order, random service
    stream = []      # ServerOpMsg list; per-client pointer
    ptr = [0] * n_sites

    def gen(s):
        c = clients[s]
        if c.state and rng.random() < 0.4:
            eo = Delete(rng.randrange(len(c.state)))
        else:
            eo = Insert(rng.randrange(len(c.state) + 1), rng.choice("xyzw"))
        to_server.append((s, c.local(eo)))

    events = n_ops
    while events > 0 or to_server or any(p < len(stream) for p in ptr):
        choice = rng.random()
        if events > 0 and choice < 0.4:
            gen(rng.randrange(n_sites))
            events -= 1
        elif to_server and choice < 0.7:
            # serve FIFO per client but random across clients
            senders = sorted({s for s, _ in to_server})
            pick = rng.choice(senders)
            i = next(i for i, (s, _) in enumerate(to_server) if s == pick)
            s, msg = to_server.pop(i)
            stream.append(server.process(s, msg))
        else:
            s = rng.randrange(n_sites)
            if ptr[s] < len(stream):
                clients[s].remote(stream[ptr[s]])
                ptr[s] += 1
    states = [c.state for c in clients] + [server.state]
    assert all(not c.pending for c in clients)
    return states


for n in (2, 3, 4, 5):
    bad = 0
    first = None
    for seed in range(3000):
        try:
            states = run(seed, n)
        except Exception as e:
            bad += 1
            first = first or (seed, repr(e))
            continue
        if len(set(states)) != 1:
            bad += 1
            first = first or (seed, states)
    print(f"sites={n}: bad {bad}/3000, first={first}")
