"""Recovering confusion matrices from rounded metric tables.

A table of accuracy / sensitivity / precision / F1 at three decimals,
together with the class sizes of the test split, usually pins down the
underlying counts. Here the test split has 694 abnormal and 885 normal
images.
"""
from lungqa.classify_eval import MetricsRow, metrics, reconstruct_counts

rows = {
    "NSM -> NSDS": MetricsRow(0.946, 0.935, 0.942, 0.939),
    "NSM -> SDS": MetricsRow(0.870, 0.973, 0.783, 0.868),
    "SM -> SDS": MetricsRow(0.946, 0.931, 0.944, 0.938),
    "SM -> NSDS": MetricsRow(0.928, 0.860, 0.974, 0.914),
}

for name, row in rows.items():
    cm = reconstruct_counts(row, n_pos=694, n_neg=885)
    m = metrics(cm)
    print(f"{name:12} tp={cm.tp:3} fp={cm.fp:3} fn={cm.fn:3} tn={cm.tn:3}  "
          f"-> {m.accuracy:.3f} {m.sensitivity:.3f} {m.precision:.3f} {m.f1:.3f}")

# F1 recomputed from the rounded precision and sensitivity can miss the
# printed value by one unit in the last place
p, s = 0.942, 0.935
print("harmonic mean of rounded values:", round(2 * p * s / (p + s), 5))

# an impossible row has no solution
print(reconstruct_counts((0.5, 1.0, 1.0, 1.0), 694, 885))
