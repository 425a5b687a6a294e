"""Cost comparison of the two engines across workload shapes.

Usage: python3 scripts/bench_costs.py [doc_len] [sites] [n_ops]

Reports init cost, sequential-only and concurrent workload costs in abstract
units (transformation invocations / object visits) plus wall times, and the
engine-asymmetry checks (zero transforms when sequential, per-op search
steps, contents >> concurrency).
"""

import json
import sys

sys.path.insert(0, "src")

from coedit.metrics import Workload, bench, measure_init


def main(argv):
    doc_len = int(argv[1]) if len(argv) > 1 else 10_000
    sites = int(argv[2]) if len(argv) > 2 else 3
    n_ops = int(argv[3]) if len(argv) > 3 else 100

    print("init cost by document size:")
    for n in (1_000, doc_len):
        row = measure_init(n)
        print(f"  doc_len={n:>7}  buffer_entries={row['ot_init_entries']}  "
              f"objects={row['woot_init_objects']}  "
              f"ot_ns={row['ot_init_ns']}  woot_ns={row['woot_init_ns']}")

    result = bench(Workload(doc_len=doc_len, sites=sites, n_ops=n_ops))
    print("\nworkload table:")
    for row in result["table"]:
        print(f"  {row['workload']:<16} max_c={row['max_c']:<3} C={row['C']:<6} C_t={row['C_t']:<6} "
              f"transforms={row['transform_total']:<5} search_steps={row['search_steps_total']:<9} "
              f"local_ns={row['local_ns_mean']:<8} remote_ns={row['remote_ns_mean']}")
    print("\nchecks:", json.dumps(result["checks"], indent=2))
    return 0 if result["ok"] else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))
