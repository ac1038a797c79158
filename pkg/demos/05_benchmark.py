"""A miniature Monte Carlo benchmark run.

Three replications per method on shrunken folds, written to a temp
directory: the raw per-replication CSV plus the aggregated table in the
benchmark's Feas./Obj./CVaR/LHS/delta/Runtime layout.  The same run is
available from the command line:

    bench run --scenario all --methods new,old-ngs --reps 3 --out results/
"""
import tempfile
from pathlib import Path

from cvarcert.bench import emit_report, run_benchmark
from cvarcert.config import BenchmarkConfig, CandidateConfig, ValidatorConfig
from cvarcert.simulate import ScenarioConfig

config = BenchmarkConfig(
    scenario=ScenarioConfig(n_train=400, n_val=600, n_test=2000),
    validator=ValidatorConfig(bootstrap_draws=400),
    candidates=CandidateConfig(delta_grid_size=4, n_dirichlet=4),
)

out = Path(tempfile.mkdtemp(prefix="cvarcert-demo-"))
summary, results = run_benchmark(
    config,
    reps=3,
    methods=("NEW", "OLD_NGS"),
    scenarios=(1, 2),
    master_seed=0,
    out_dir=out,
)

print(f"wrote {out}/raw.csv, summary.md, summary.csv\n")
print(emit_report(summary, "markdown"))
print("per-replication rows:")
for r in results:
    flag = "abstained" if r.abstained else ("feasible" if r.feasible else "violated")
    print(f"  {r.method:<8} scenario {r.scenario} rep {r.rep}: {flag:>9}, runtime {r.runtime_seconds:.2f}s")
