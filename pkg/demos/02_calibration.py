"""
Choosing delay and dimension
============================

The delay is the first minimum of the mutual information between a signal
and its shifted copy, averaged over windows. The dimension is the first one
at which almost no nearest neighbours are false.
"""

import warnings

import numpy as np

from vrurqa.embed import UnconvergedDimensionWarning, calibrate_channel
from vrurqa.ingest import Channel
from vrurqa.synth import DEFAULT_PROFILES, generate

streams, _ = generate(DEFAULT_PROFILES["walk"], duration_s=60, seed=3)
x = streams[Channel.acc_x].values
windows = x[: x.size // 100 * 100].reshape(-1, 100)
print(len(windows), "one-second windows")

with warnings.catch_warnings(record=True) as caught:
    warnings.simplefilter("always", UnconvergedDimensionWarning)
    calib = calibrate_channel(windows, max_lag=30, max_dim=6)

print("averaged AMI, lags 1..15:", np.round(calib.ami_curve[:15], 3))
print("delay:", calib.delay)
print("FNN fraction by dimension:", np.round(calib.fnn_fractions, 3))
print("dimension:", calib.dimension, "(converged)" if calib.converged else "(did not converge)")
for w in caught:
    print("warning:", w.message)
