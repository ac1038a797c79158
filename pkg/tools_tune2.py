"""Scratch: variant grid for frozen-default selection."""
import logging
import time

import numpy as np

logging.disable(logging.WARNING)

from cvarcert.bench import replication_seed, run_replication
from cvarcert.config import BenchmarkConfig, CandidateConfig
from cvarcert.simulate import ScenarioConfig, ShiftConfig


def trial(tag, config, reps=30):
    t0 = time.time()
    for m, s in (("NEW", 1), ("NEW", 2), ("OLD_NGS", 2)):
        rows = [run_replication(m, s, config, replication_seed(0, m, s, r)) for r in range(reps)]
        act = [r for r in rows if not r.abstained]
        feas = np.mean([r.feasible for r in act]) if act else float("nan")
        abst = np.mean([r.abstained for r in rows])
        dlt = np.mean([r.delta_selected for r in act]) if act else float("nan")
        print(f"{tag} {m:<8} s{s}: feas={feas:.3f} abst={abst:.3f} delta={dlt:.4f}", flush=True)
    print(f"{tag} done in {time.time()-t0:.0f}s", flush=True)


variants = {
    "A_wide":      BenchmarkConfig(scenario=ScenarioConfig(vols=tuple(np.linspace(0.004, 0.10, 8)),
                                                           shift=ShiftConfig(delta_mu=0.012))),
    "B_wide_menu": BenchmarkConfig(scenario=ScenarioConfig(vols=tuple(np.linspace(0.004, 0.10, 8)),
                                                           shift=ShiftConfig(delta_mu=0.012)),
                                   candidates=CandidateConfig(n_dirichlet=12)),
    "C_lowshift":  BenchmarkConfig(scenario=ScenarioConfig(shift=ShiftConfig(delta_mu=0.008))),
}
for tag, config in variants.items():
    trial(tag, config)
