"""Measure how often the two engines agree byte-for-byte on the same scenario.

Usage: python3 scripts/cross_engine_agreement.py [n_scenarios] [base_seed]

Concurrent insert-insert ties at the same position are resolved by different
(both valid) policies in the two engines, so tied scenarios are excluded and
counted separately; on the tie-free remainder the equality rate is reported.
"""

import random
import sys

sys.path.insert(0, "src")

from coedit.harness import FuzzSpec, Scenario, cross_engine_compare
from coedit.netsim import UniformLatency


def main(argv):
    n = int(argv[1]) if len(argv) > 1 else 200
    base = int(argv[2]) if len(argv) > 2 else 0
    ties = equal = unequal = 0
    for seed in range(base, base + n):
        rng = random.Random(f"xcmp-{seed}")
        scenario = Scenario(
            initial="".join(rng.choice("abcdef") for _ in range(rng.randint(0, 10))),
            sites=2,
            mode="causal",
            latency=UniformLatency(1, rng.randint(2, 8)),
            seed=seed,
            fuzz=FuzzSpec(n_ops=rng.randint(5, 30), insert_ratio=rng.uniform(0.5, 0.8)),
        )
        result = cross_engine_compare(scenario)
        if not result["both_converged"]:
            print(f"seed {seed}: an engine failed to converge")
            return 1
        if result["tie"]:
            ties += 1
        elif result["equal"]:
            equal += 1
        else:
            unequal += 1
            print(f"seed {seed}: tie-free disagreement {result['ot']!r} vs {result['woot']!r}")
    compared = equal + unequal
    rate = equal / compared if compared else float("nan")
    print(f"{n} scenarios: {ties} excluded (insert ties), "
          f"{equal}/{compared} agree (rate {rate:.3f})")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
