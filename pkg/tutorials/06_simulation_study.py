"""
A small simulation study
========================

Rows of the reference table double as pseudo-observed datasets with known
parameters. Leaving each one out, calibrating on the rest and comparing
with the truth gives coverage, relative absolute error and failure rates
per method. Results do not depend on the number of worker processes.
"""
import tempfile
from pathlib import Path

from cpfabc import pipeline as pl
from cpfabc.config import RunConfig

cfg = RunConfig.from_dict({
    "seed": 2,
    "landscape": {"synthetic": {"count": 2, "width": 24, "height": 24, "seed": 1}},
    "design": {"habitats": [1, 2, 4], "transects_per_habitat": 2, "years": [0, 1]},
    "table": {"M": 600, "chunk": 200},
    "simstudy": {"n_ref": 8},
    "abc": {"n_trees": 60, "gbm_stages": 60, "nn_max_iter": 100, "anlh_min_retained": 10,
            "runs": [{"method": "rej", "epsilon": 0.05}, {"method": "loclh", "epsilon": 0.05},
                     {"method": "rfa", "epsilon": 0.05}, {"method": "uwqrf"}]},
})
out = Path(tempfile.mkdtemp())
table = pl.generate_table(cfg, out / "table.csv")
rep = pl.simstudy(cfg, table, out, workers=2)

print(f"{'method':8s} {'cov beta1':>9s} {'RAE beta1':>9s} {'failures':>8s}")
for m in rep.methods:
    print(f"{m:8s} {rep.coverage(m, 'beta1'):9.2f} {rep.median_rae(m, 'beta1'):9.3f} {rep.failure_rate(m):8.2f}")
print("average ranks:", {m: round(float(r), 2) for m, r in rep.ranks().items()})

# %%
# A markdown summary of everything in the run directory.
print((pl.report(out)).read_text()[:600])

# %%
# Command-line equivalent:
#   cpfabc simulate --config run.yaml --workers 4
#   cpfabc simstudy --config run.yaml --workers 4
#   cpfabc report   --run-dir <output_dir>
