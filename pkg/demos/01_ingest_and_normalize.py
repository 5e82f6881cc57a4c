"""
Reading messy flow CSVs
=======================

Generate a small CICIDS-shaped file with the usual defects, read it back,
and scale the features.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from tsnids.ingest import load_dataset
from tsnids.preprocess import apply_normalizer, fit_normalizer
from tsnids.synth import generate, separable_two_class

workdir = Path(tempfile.mkdtemp())
result = generate(separable_two_class(n_rows=500, n_features=12, seed=0, defects=True))
path = result.write(workdir / "flows.csv")
print(path.read_text().splitlines()[0][:80])
print("injected:", result.defects)

# %%
# Header cells lose their leading spaces, the broken label separator is
# repaired and the Infinity/NaN cells are imputed with zero.
ds = load_dataset(path)
print(ds.report.as_dict())
print(ds.labels.classes)
print("any non-finite left?", not np.isfinite(ds.features.values).all())

# %%
# Fit the scaler on a training slice only, then apply it to everything.
train = ds.features.values[:400]
model = fit_normalizer(train)
u = apply_normalizer(model, ds.features.values)
print("range:", u.min(), u.max())

# %%
# The alternative mode maps into [-1, 0] instead.
lit = apply_normalizer(fit_normalizer(train, "paper-literal"), ds.features.values)
print("range:", lit.min(), lit.max())
