"""Fit a whitening + dimension-reduction model and inspect what it learned.

Aggregated descriptors have strongly correlated dimensions; whitening rotates
to the covariance eigenbasis and rescales each retained direction to unit
variance, so dot products stop being dominated by a few loud directions.
"""

import os
import tempfile

import numpy as np

from crow import fit_whitening, apply_whitening, finalize, preset, read_model, run_pipeline, write_model
from crow.synthetic import make_corpus

cfg = preset("ucrow")
corpus = make_corpus(per_class=30, seed=42)
train = [run_pipeline(t, cfg) for t in corpus]
print("training descriptors: %d, dim %d, stage %s" % (len(train), train[0].dim, train[0].stage))

model = fit_whitening(train, output_dim=16, config_tag="ucrow-demo")
print("model: %d -> %d, delta %.3g (default: 1e-9 * top eigenvalue)"
      % (model.input_dim, model.output_dim, model.delta))
print("fingerprint:", model.fingerprint.hex()[:16], "...")
print("top eigenvalues:", np.round(model.eigenvalues[:4], 5))

# Whitened training data has unit variance along every kept axis.
w = np.stack([apply_whitening(d, model).values for d in train])
print("per-axis variance after whitening: min %.3f  max %.3f"
      % (w.var(axis=0, ddof=1).min(), w.var(axis=0, ddof=1).max()))

# Correlation collapses to ~identity off the diagonal.
c = np.corrcoef(w.T)
off = np.abs(c - np.eye(len(c))).max()
print("max |off-diagonal correlation|: %.3f" % off)

# The eigenvalue floor delta trades exact whitening for stability: with a
# larger floor, directions whose variance is small against delta stay small
# instead of being blown up to unit size.
damped = fit_whitening(train, output_dim=16, delta=0.01, config_tag="ucrow-demo")
wd = np.stack([apply_whitening(d, damped).values for d in train])
print("with delta=0.01 the same axes span variance %.3f .. %.3f"
      % (wd.var(axis=0, ddof=1).min(), wd.var(axis=0, ddof=1).max()))

# The final stage re-normalizes so descriptors are comparable by dot product.
f = finalize(apply_whitening(train[0], model))
print("final descriptor: stage=%s dim=%d ||f||=%.6f" % (f.stage, f.dim, np.linalg.norm(f.values)))

# Round trip through the .croww container: float32 parameters, exact delta,
# eigenvalues live only in memory.
path = os.path.join(tempfile.mkdtemp(prefix="crow_demo_"), "model.croww")
write_model(model, path)
back = read_model(path)
print("reloaded: %d bytes, delta exact %s, eigenvalues %s"
      % (os.path.getsize(path), back.delta == model.delta, back.eigenvalues))
print("projection drift after f32 round trip: %.2e"
      % np.abs(back.projection - model.projection).max())
