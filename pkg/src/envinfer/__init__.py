"""Annotation-free environment inference for invariant learning on a
color-correlated digit benchmark: dataset synthesis, ERM reference training,
representation clustering, environment construction, invariance-penalty
training and robustness evaluation."""

__version__ = "0.1.0"
