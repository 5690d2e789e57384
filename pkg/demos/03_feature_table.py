"""
From a raw log to a ranked feature table
========================================

A synthetic log goes through the same path as a phone recording: parsing,
resampling to 100 Hz, one-second windows, 126 time features plus 54 RQA
features, then an mRMR ranking.
"""

from vrurqa.ingest import format_log, load_streams
from vrurqa.pipeline import build_feature_table, epoch_windows, rank_for
from vrurqa.synth import generate_suite

suite = generate_suite(epochs_per_mode=60, trip_seconds=20, seed=0)
log_text = format_log(suite.samples)
print(log_text.splitlines()[:3])

data = epoch_windows(load_streams(log_text))
table = build_feature_table(data, suite.labels)
print("rows x features:", table.values.shape)

for scheme in ("binary", "five_class"):
    ranking = rank_for(table, scheme)
    top = [table.names[i] for i in ranking.top(8)]
    print(f"{scheme:10s}", ", ".join(top))
