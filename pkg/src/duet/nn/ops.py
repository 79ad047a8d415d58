"""Dispatch helpers so one math implementation serves Tensor and ndarray."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


def is_tensor(x):
    return isinstance(x, Tensor)


def value_of(x):
    return x.value if is_tensor(x) else np.asarray(x, dtype=np.float64)


def exp(x):
    return x.exp() if is_tensor(x) else np.exp(x)


def log(x):
    return x.log() if is_tensor(x) else np.log(x)


def tanh(x):
    return x.tanh() if is_tensor(x) else np.tanh(x)


def sigmoid(x):
    if is_tensor(x):
        return x.sigmoid()
    a = np.abs(x)
    e = np.exp(-a)
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def relu(x):
    return x.relu() if is_tensor(x) else np.maximum(x, 0.0)


def clip(x, lo, hi):
    return x.clip(lo, hi) if is_tensor(x) else np.clip(x, lo, hi)


def sum_last(x):
    return x.sum(axis=-1) if is_tensor(x) else np.sum(x, axis=-1)


def mean_axis0(x):
    return x.mean(axis=0) if is_tensor(x) else np.mean(x, axis=0)


def logaddexp(a, b):
    if is_tensor(a):
        return a.logaddexp(b)
    if is_tensor(b):
        return b.logaddexp(a)
    return np.logaddexp(a, b)


def transpose2d(w):
    return w.transpose() if is_tensor(w) else w.T


def matvec(w, x):
    """w (out,in) applied to x of shape (in,) or batched (batch,in)."""
    if value_of(x).ndim == 1:
        return w @ x
    return x @ transpose2d(w)
