"""
Accuracy against the number of ranked features
==============================================

Cross-validated random-forest accuracy using the top-k mRMR features, for the
five-class, four-class and binary label schemes. A small suite and 30 trees
keep this to well under a minute; the acceptance suite runs the full size.
"""

from vrurqa.forest import ForestConfig
from vrurqa.ingest import format_log, load_streams
from vrurqa.pipeline import accuracy_curve, build_feature_table, epoch_windows, rank_for
from vrurqa.synth import generate_suite

suite = generate_suite(epochs_per_mode=150, trip_seconds=50, seed=1)
table = build_feature_table(epoch_windows(load_streams(format_log(suite.samples))), suite.labels)
forest = ForestConfig(n_trees=30, seed=0)
grid = [5, 10, 20, 40, 80, 180]

print("k     " + "  ".join(f"{k:>6d}" for k in grid))
for scheme in ("binary", "four_class", "five_class"):
    curve = accuracy_curve(table, rank_for(table, scheme), scheme, forest, 5, grid)
    print(f"{scheme:10s}" + "  ".join(f"{a:6.3f}" for _, a in curve))
