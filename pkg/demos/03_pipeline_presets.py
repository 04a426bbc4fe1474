"""Run one tensor through the three aggregation presets and compare.

All presets share the same skeleton -- local pooling, per-location weights,
per-channel weights, weighted sum, normalization -- and differ only in which
weighting they plug in:

  crow    response-derived spatial map + rarity channel weights
  ucrow   uniform everything (plain sum pooling)
  spoc    fixed center-prior Gaussian spatial map, uniform channels
"""

import numpy as np

from crow import (
    FeatureTensor,
    channel_weights,
    local_pool,
    pnorm,
    preset,
    run_pipeline,
    spatial_weights,
    sum_aggregate,
    weight_tensor,
)
from crow.synthetic import make_corpus

t = make_corpus(per_class=1, width=10, height=10, seed=11)[0]

descs = {}
for name in ("crow", "ucrow", "spoc"):
    cfg = preset(name, layer="pool5")
    d = run_pipeline(t, cfg)
    descs[name] = d
    print("%-6s stage=%s dim=%d ||f||=%.6f" % (name, d.stage, d.dim,
                                               np.linalg.norm(d.values)))

print("\ncosine similarity between preset outputs:")
names = list(descs)
for i, a in enumerate(names):
    for b in names[i + 1:]:
        print("  %-5s vs %-5s  %.4f" % (a, b, float(descs[a].values @ descs[b].values)))

# The pipeline is literally the composition of the stage functions, so the
# manual chain reproduces it bit for bit.
cfg = preset("crow", layer="pool5")
pooled = local_pool(t, cfg.pooling)  # pool5 preset -> no-op pooling
alpha = spatial_weights(pooled, cfg.spatial_norm)
beta = channel_weights(pooled, cfg.epsilon)
manual = pnorm(sum_aggregate(weight_tensor(pooled, alpha, beta)),
               order=cfg.norm_order, power=cfg.power)
print("\nmanual stage chain == run_pipeline:",
      bool(np.array_equal(manual.values, descs["crow"].values)))

# For a pre-pooling layer the preset swaps in a 2x2/2 max pool first.
conv = preset("crow", layer="conv5_3")
print("conv5_3 pooling: %s %dx%d stride %d -> dim %d"
      % (conv.pooling.kind, conv.pooling.window_w, conv.pooling.window_h,
         conv.pooling.stride, run_pipeline(t, conv).dim))

# Scaling the input tensor does not move the normalized descriptor: the
# weights are scale-free and the final norm divides the scale back out.
scaled = run_pipeline(FeatureTensor(t.data * 37.0, id="scaled"), cfg)
print("scale invariance max drift: %.2e"
      % np.abs(scaled.values - descs["crow"].values).max())
