"""Run the randomized convergence suite and write a JSON summary.

Usage: python3 scripts/run_fuzz_suite.py [n_scenarios] [base_seed] [out.json]

Each seed produces one scenario per engine (op-buffer engine through the
sequencer, identifier-sequence engine under causal broadcast); every run must
converge, preserve the intention proxies, and drain its queues.
"""

import json
import sys
import time

sys.path.insert(0, "src")

from coedit.harness import fuzz


def main(argv):
    n = int(argv[1]) if len(argv) > 1 else 500
    seed = int(argv[2]) if len(argv) > 2 else 0
    out = argv[3] if len(argv) > 3 else None
    t0 = time.perf_counter()
    result = fuzz(n, base_seed=seed)
    result["elapsed_s"] = round(time.perf_counter() - t0, 2)
    text = json.dumps(result, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    print(text if not out else f"{result['runs']} runs, ok={result['ok']}, {result['elapsed_s']}s -> {out}")
    return 0 if result["ok"] else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv))
