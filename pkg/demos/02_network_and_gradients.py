"""
A small network, checked by finite differences
==============================================
"""
# %%
import numpy as np

from stdw import forward, gradient_check, init_model, model_from_bytes, model_to_bytes

rng = np.random.default_rng(0)
model = init_model([2, 16, 16], 3, seed=0)
x = rng.normal(size=(8, 2))
y = rng.integers(0, 3, 8)
print("logits shape:", forward(model, x).shape)

# %%
# Analytic gradients agree with central differences to well below 1e-4.
print("max relative error:", gradient_check(model, x, y, h=1e-5))

# %%
# Per-sample weights enter the loss as a weighted mean.
w = rng.uniform(0.5, 2.0, 8)
print("weighted max relative error:", gradient_check(model, x, y, w, h=1e-5))

# %%
# Models round-trip through a compact binary format.
blob = model_to_bytes(model)
again = model_from_bytes(blob)
print(len(blob), "bytes; identical:", model_to_bytes(again) == blob)
