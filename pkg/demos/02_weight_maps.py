"""Visualize the two weighting signals: spatial saliency and channel rarity.

The spatial map is the channel-summed response, normalized and root-damped;
locations where many channels fire get boosted.  The channel weights are a
log inverse-document-frequency over per-channel response sparsity; channels
that fire everywhere get damped.
"""

import os
import tempfile

import numpy as np

from crow import (
    channel_sparsities,
    channel_weights,
    spatial_weights,
    write_pgm,
)
from crow.synthetic import make_corpus


def ascii_map(m, levels=" .:-=+*#%@"):
    """Render a 2-d weight map as coarse ascii art (rows = height)."""
    a = np.asarray(m, dtype=float)
    if a.max() > 0:
        a = a / a.max()
    idx = np.minimum((a * (len(levels) - 1)).astype(int), len(levels) - 1)
    # first axis is x (width), second is y: transpose so printed rows are y
    return "\n".join("".join(levels[v] for v in row) for row in idx.T)


corpus = make_corpus(per_class=4, width=12, height=8, seed=5)
t = corpus[0]
print("tensor:", t.id, t.shape)

sw = spatial_weights(t)  # default: L2-normalized sum map, square root damping
print("\nspatial weight map (bright = many channels agree):")
print(ascii_map(sw.weights))

out = os.path.join(tempfile.mkdtemp(prefix="crow_demo_"), "saliency.pgm")
write_pgm(sw, out)
print("\nwrote 16-bit PGM:", out, "(%d bytes)" % os.path.getsize(out))

xi = channel_sparsities(t)  # fraction of silent locations per channel
cw = channel_weights(t)
order = np.argsort(cw.weights)
print("\nchannel occupancy Q_k -> weight (5 highest / 5 lowest):")
for k in list(order[-5:][::-1]) + list(order[:5]):
    q = 1.0 - xi[k]
    tag = "silent" if q == 0 else ("dense" if q > 0.9 else "sparse")
    print("  ch %2d  Q=%.3f  w=%+.3f  %s" % (k, q, cw.weights[k], tag))

# The last channels of the synthetic corpus fire at every location on every
# image; rarity weighting pushes them to the bottom.
dense = np.arange(t.channels - 8, t.channels)
print("\nmean weight, dense channels: %.3f   all channels: %.3f"
      % (cw.weights[dense].mean(), cw.weights.mean()))
