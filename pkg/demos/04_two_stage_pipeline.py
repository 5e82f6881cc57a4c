"""
The two-stage detector
======================

Stage 1 learns an attack probability; stage 2 encodes the features plus that
probability and hands the codes to a random forest.
"""

# %%
import numpy as np

from tsnids.core import RandomSource
from tsnids.pipeline import PipelineConfig, evaluate, predict, stratified_split, train_pipeline
from tsnids.synth import generate, separable_two_class, to_dataset

ds = to_dataset(generate(separable_two_class(n_rows=2000, seed=0, defects=True)))
train, test = stratified_split(ds.labels.binary, 0.2, RandomSource(0).child(1))
print(len(train), "train rows,", len(test), "test rows")

# %%
cfg = PipelineConfig(seed=0)
model = train_pipeline(ds.features.take(train), ds.labels.take(train), cfg)
print("stage 1:", model.stage1.dsae.input_dim, "->", model.stage1.dsae.hidden_dims)
print("stage 2:", model.stage2.dsae.input_dim, "->", model.stage2.dsae.hidden_dims)
print("trees:", len(model.stage2.forest.trees))

# %%
codes, p_attack = predict(model, ds.features.take(test))
print("first predictions:", codes[:8], p_attack[:8].round(3))
print(evaluate(model, ds.features.take(test), ds.labels.take(test)).as_dict())

# %%
# Multi-class target: the forest predicts the original class names.
multi = train_pipeline(ds.features.take(train), ds.labels.take(train), PipelineConfig(target="multiclass"))
codes, _ = predict(multi, ds.features.take(test))
print([multi.classes[c] for c in codes[:4]])
