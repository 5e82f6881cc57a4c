"""
Tied-weight autoencoders
========================

Greedy layer-wise pretraining, then supervised fine-tuning with a softmax head.
"""

# %%
import numpy as np

from tsnids.core import RandomSource
from tsnids.neuralnet import (TrainConfig, encode, finetune_supervised, init_autoencoder, init_head,
                              init_stack, predict_proba, pretrain_layer, stack_pretrain)

rng = np.random.default_rng(0)
z = rng.uniform(size=(500, 3))
x = z @ rng.uniform(size=(3, 8)) + 0.05 * rng.standard_normal((500, 8))
x = (x - x.min(0)) / (x.max(0) - x.min(0))

# %%
# One 8 -> 4 layer. The history starts with the error before any update.
ae = init_autoencoder(8, 4, RandomSource(0))
ae, hist = pretrain_layer(ae, x, TrainConfig(epochs=200))
print(f"MSE {hist[0]:.4f} -> {hist[-1]:.4f}")

# Encoder and decoder share one weight matrix.
print(np.shares_memory(ae.decoder_weight, ae.encoder.weight))

# %%
# A two-layer stack: layer 1 is trained on layer 0's codes.
stack = init_stack(8, [6, 3], RandomSource(1))
stack, histories = stack_pretrain(stack, x, TrainConfig(epochs=100), decoder_activation="linear")
for k, h in enumerate(histories):
    print(f"layer {k}: {h[0]:.4f} -> {h[-1]:.4f}")
print(encode(stack, x[:3]).round(3))

# %%
# Fine-tune the stack and a head against a simple labelling of the data.
y = (z[:, 0] > 0.5).astype(int)
head = init_head(3, 2, RandomSource(2))
stack, head, loss = finetune_supervised(stack, head, x, y, TrainConfig(learning_rate=0.1, epochs=200))
proba = predict_proba(stack, head, x)
print(f"cross-entropy {loss[0]:.3f} -> {loss[-1]:.3f}, accuracy {np.mean(proba.argmax(1) == y):.3f}")
