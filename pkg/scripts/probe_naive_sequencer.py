"""Throwaway probe: convergence of naive total-order OT control with 3 sites."""

import random
import sys

sys.path.insert(0, "src")

from coedit.model import Insert, Delete, apply_external
from coedit.ot import OtSite, ContextMismatchError


def run(seed, n_sites=3, n_ops=6, doc="abcd"):
    rng = random.Random(seed)
    sites = [OtSite(site=i, state=doc) for i in range(n_sites)]
    log = []  # global sequencer log of TimestampedOps, in generation order
    ptr = [0] * n_sites  # next log index each site will look at

    def gen(s):
        site = sites[s]
        if site.state and rng.random() < 0.4:
            eo = Delete(rng.randrange(len(site.state)))
        else:
            eo = Insert(rng.randrange(len(site.state) + 1), rng.choice("xyzw"))
        log.append((s, site.local(eo)))

    def deliver(s):
        while ptr[s] < len(log):
            origin, top = log[ptr[s]]
            ptr[s] += 1
            if origin != s:
                sites[s].remote(top)
                return True
        return False

    events = n_ops
    while events > 0 or any(p < len(log) for p in ptr):
        if events > 0 and rng.random() < 0.5:
            gen(rng.randrange(n_sites))
            events -= 1
        else:
            s = rng.randrange(n_sites)
            if not deliver(s) and events > 0:
                gen(rng.randrange(n_sites))
                events -= 1
    return [s.state for s in sites]


from coedit.model import BoundsError

for n in (2, 3):
    bad = 0
    first = None
    for seed in range(5000):
        try:
            states = run(seed, n_sites=n)
        except (ContextMismatchError, BoundsError) as e:
            bad += 1
            first = first or (seed, repr(e))
            continue
        if len(set(states)) != 1:
            bad += 1
            first = first or (seed, states)
    print(f"sites={n}: divergent/failed runs: {bad}/5000, first={first}")
