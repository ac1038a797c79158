"""Scratch tuning harness (not part of the package)."""
import logging
import sys
import time

import numpy as np

logging.disable(logging.WARNING)

from cvarcert.bench import replication_seed, run_replication
from cvarcert.config import BenchmarkConfig
from cvarcert.simulate import ScenarioConfig, ShiftConfig


def trial(config, reps, methods, scenarios, seed=0):
    out = {}
    for m in methods:
        for s in scenarios:
            rows = [run_replication(m, s, config, replication_seed(seed, m, s, r)) for r in range(reps)]
            act = [r for r in rows if not r.abstained]
            feas = np.mean([r.feasible for r in act]) if act else float("nan")
            out[(m, s)] = dict(
                feas=feas,
                abst=np.mean([r.abstained for r in rows]),
                delta=np.nanmean([r.delta_selected for r in act]) if act else float("nan"),
                cvar=np.nanmean([r.test_cvar for r in act]) if act else float("nan"),
                rt=np.median([r.runtime_seconds for r in rows]),
            )
    return out


if __name__ == "__main__":
    reps = int(sys.argv[1]) if len(sys.argv) > 1 else 40
    t0 = time.time()
    config = BenchmarkConfig()
    res = trial(config, reps, ("NEW", "OLD_NGS"), (1, 2))
    for k, v in res.items():
        print(k, {kk: round(float(vv), 4) for kk, vv in v.items()}, flush=True)
    print(f"total {time.time()-t0:.0f}s")
