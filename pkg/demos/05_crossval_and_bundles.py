"""
Cross-validation, ablations and saved models
============================================
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from tsnids.bundle import load_model, save_model
from tsnids.forest import ForestConfig
from tsnids.neuralnet import TrainConfig
from tsnids.pipeline import ABLATIONS, PipelineConfig, cross_validate, predict, train_pipeline
from tsnids.report import render
from tsnids.synth import generate, separable_two_class, to_dataset

ds = to_dataset(generate(separable_two_class(n_rows=1000, n_features=20, seed=3, defects=True)))
cfg = PipelineConfig(pretrain=TrainConfig(epochs=20), finetune=TrainConfig(epochs=20),
                     forest=ForestConfig(n_trees=30), seed=3)

# %%
# Each fold refits the scaler and both stages on the other nine folds.
rep = cross_validate(ds.features, ds.labels, cfg)
print(render("crossval", {k: v for k, v in rep.as_dict().items() if k != "config"}))

# %%
for kind in ABLATIONS:
    r = cross_validate(ds.features, ds.labels, cfg, kind, n_folds=5)
    print(f"{kind:18s} " + "  ".join(f"{m}={v:.3f}" for m, v in r.mean.items()))

# %%
# A bundle is one checksummed file; reloading gives identical predictions.
model = train_pipeline(ds.features, ds.labels, cfg)
path = save_model(model, Path(tempfile.mkdtemp()) / "model.bin")
back = load_model(path)
x = np.random.default_rng(0).uniform(0, 1e4, (1000, ds.schema.n_features))
print(path.stat().st_size, "bytes;", np.array_equal(predict(model, x)[0], predict(back, x)[0]))
