"""Learned operator: graph network, moment loss, training, checkpoints and inference."""
