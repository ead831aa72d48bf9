"""Mask QA on a synthetic data set.

Generates 100 two-lobe masks, plants a few broken ones, then runs the
robust box-centre analysis and the lobe-ratio check.

    python demos/qa_walkthrough.py [out_dir]
"""
import os
import sys
import tempfile

from lungqa.manifest import QaConfig, read_manifest
from lungqa.pipeline import run_qa
from lungqa.plots import plot_cbb, plot_ratio
from lungqa.synthetic import make_dataset

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="lungqa_qa_")
planted = {7: "displaced", 23: "third_blob", 41: "displaced", 66: "third_blob", 88: "displaced"}
manifest = make_dataset(os.path.join(out, "data"), n=100, anomalies=planted, seed=5)
print("manifest:", manifest)

# %% fit
report = run_qa(read_manifest(manifest), QaConfig(seed=0))
mcd = report.summary["mcd"]
print("MCD status:", mcd["status"], " h =", mcd["h"], "of", mcd["n"])
print("robust centre:", [round(v, 2) for v in mcd["location"]])
print("cutoff (robust distance):", round(mcd["cutoff"], 3))

# %% who got flagged, and why
for r in report.records:
    if r.flagged:
        why = []
        if r.mcd_outlier:
            why.append(f"box centre d={r.robust_distance:.1f}")
        if r.off_identity:
            why.append(f"{r.region_count} regions")
        print(f"  {r.image_id}  planted={planted.get(int(r.image_id[3:]))!s:10}  {', '.join(why)}")

# %% per-class table
for cls, row in report.summary["classes"].items():
    print(f"{cls:9} n={row['images']:4}  mcd {row['mcd_outliers']:3} ({row['mcd_outliers_percent']})"
          f"  off-identity {row['off_identity']:3} ({row['off_identity_percent']})")

# the plots are plain SVG strings
for name, fn in (("cbb.svg", plot_cbb), ("ratio.svg", plot_ratio)):
    with open(os.path.join(out, name), "w") as fh:
        fh.write(fn(report))
print("plots written to", out)
