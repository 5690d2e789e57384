"""
Recurrence plots of a periodic signal and of noise
==================================================

A delay embedding turns one sensor axis into a trajectory; thresholding the
pairwise distances gives a recurrence plot, and line statistics on that plot
give the six RQA measures.
"""

import numpy as np

from vrurqa.embed import EmbeddingParams, embed
from vrurqa.rqa import RecurrencePlot, format_rp, recurrence_plot, rqa_features

t = np.arange(100)
periodic = np.sin(2 * np.pi * t / 25)
noise = np.random.default_rng(0).normal(size=100)

# three coordinates, six samples apart: 100 samples give 88 points
params = EmbeddingParams(delay=6, dimension=3)
traj = embed(periodic, params)
print("trajectory:", traj.points.shape)

# a small corner of the plot, printed in the text dump format
rp = recurrence_plot(traj, 0.5)
print(format_rp(RecurrencePlot(rp.matrix[:12, :12])))

# compare the measures at a matched recurrence rate (10% of pairs)
for name, x in (("periodic", periodic), ("noise", noise)):
    tr = embed(x, params)
    d = np.linalg.norm(tr.points[:, None] - tr.points[None], axis=2)
    f = rqa_features(recurrence_plot(tr, np.quantile(d, 0.1)))
    print(f"{name:9s} RR={f.rr:.3f} DET={f.det:.3f} Lmax={f.lmax:.0f} "
          f"ENT={f.ent:.2f} LAM={f.lam:.3f} TT={f.tt:.2f}")
