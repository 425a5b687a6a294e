"""Step-by-step walkthrough of the two-site golden scenario on both engines.

Site 0 deletes 'b' from "abe" while site 1 concurrently inserts 'c' after it;
both engines must converge on "ace". Prints every intermediate state.
"""

import sys

sys.path.insert(0, "src")

from coedit.model import Delete, Insert
from coedit.ot import OtSite
from coedit.woot import WootSite


def ot_walkthrough():
    print("== op-buffer engine ==")
    a, b = OtSite(site=0, state="abe"), OtSite(site=1, state="abe")
    o1 = a.local(Delete(1))
    print(f"site 0 local  D(1)        -> state {a.state!r}  buffer {[f'{t.key()}:{t.op}' for t in a.buffer]}")
    o2 = b.local(Insert(2, "c"))
    print(f"site 1 local  I(2,'c')    -> state {b.state!r}  buffer {[f'{t.key()}:{t.op}' for t in b.buffer]}")
    eo = a.remote(o2)
    print(f"site 0 remote I(2,'c')    -> transformed to {eo}, state {a.state!r}")
    eo = b.remote(o1)
    print(f"site 1 remote D(1)        -> transformed to {eo}, state {b.state!r}")
    assert a.state == b.state == "ace"


def woot_walkthrough():
    print("\n== identifier-sequence engine ==")
    a, b = WootSite.create(0, "abe"), WootSite.create(1, "abe")
    o1 = a.local(Delete(1))
    print(f"site 0 local  D(1)        -> propagates {o1.op}")
    o2 = b.local(Insert(2, "c"))
    print(f"site 1 local  I(2,'c')    -> propagates {o2.op}")
    print(f"site 1 remote delete      -> applies {b.remote(o1)}, state {b.state!r}")
    print(f"site 0 remote insert      -> applies {a.remote(o2)}, state {a.state!r}")
    assert a.istate.dump() == b.istate.dump()
    print("final internal sequence (identical at both sites):")
    for line in a.istate.dump().splitlines():
        print(f"  {line}")


if __name__ == "__main__":
    ot_walkthrough()
    woot_walkthrough()
    print("\nconverged: both engines end at 'ace'")
