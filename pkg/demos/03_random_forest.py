"""
A from-scratch random forest
============================
"""

# %%
import numpy as np

from tsnids.forest import ForestConfig, forest_votes, gini, predict_forest, train_forest

print(gini([5, 5]), gini([1, 2, 3]))

rng = np.random.default_rng(0)
x = np.vstack([rng.normal(0, 1, (500, 5)), rng.normal(3, 1, (500, 5))])
y = np.r_[np.zeros(500, int), np.ones(500, int)]
order = rng.permutation(1000)
train, test = order[:500], order[500:]

# %%
model = train_forest(x[train], y[train], ForestConfig(n_trees=50, seed=0))
print("test accuracy:", np.mean(predict_forest(model, x[test]) == y[test]))
print("features searched per split:", model.feature_subset_size)
print("depths:", sorted(t.depth for t in model.trees)[:10], "...")

# %%
# Vote counts per class, useful as a confidence signal.
print(forest_votes(model, x[test[:5]]))

# %%
# Rows are put in a canonical order first, so shuffling the training set
# leaves every tree unchanged.
perm = rng.permutation(train)
again = train_forest(x[perm], y[perm], ForestConfig(n_trees=50, seed=0))
print(all(np.array_equal(a.threshold, b.threshold) for a, b in zip(model.trees, again.trees)))
