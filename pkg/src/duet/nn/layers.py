"""Dense layers, Gaussian heads, and a single-layer GRU over param dicts.

Parameters live in flat dicts keyed "<prefix>.<name>" with weights shaped
(out, in). Forward functions accept single frames (dim,) or batches
(batch, dim) and run on Tensors or plain ndarrays alike.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .gaussian import GaussianParams

_ACTIVATIONS = {"identity": lambda y: y, "tanh": ops.tanh, "relu": ops.relu}


def glorot_uniform(rng, out_dim, in_dim):
    bound = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-bound, bound, size=(out_dim, in_dim))


def dense_init(rng, in_dim, out_dim, prefix):
    return {
        f"{prefix}.W": glorot_uniform(rng, out_dim, in_dim),
        f"{prefix}.b": np.zeros(out_dim),
    }


def dense(params, prefix, x, activation="identity"):
    w = params[f"{prefix}.W"]
    b = params[f"{prefix}.b"]
    if ops.value_of(x).shape[-1] != ops.value_of(w).shape[1]:
        raise ValueError(
            f"dense '{prefix}': input dim {ops.value_of(x).shape[-1]} != weight inner dim {ops.value_of(w).shape[1]}"
        )
    return _ACTIVATIONS[activation](ops.matvec(w, x) + b)


def gaussian_head_init(rng, in_dim, hidden_dims, out_dim, prefix):
    """A tanh MLP trunk with separate mean / log_var output layers."""
    params = {}
    d = in_dim
    for i, h in enumerate(hidden_dims):
        params.update(dense_init(rng, d, h, f"{prefix}.h{i}"))
        d = h
    params.update(dense_init(rng, d, out_dim, f"{prefix}.mean"))
    params.update(dense_init(rng, d, out_dim, f"{prefix}.log_var"))
    return params


def gaussian_head(params, prefix, x, num_hidden):
    for i in range(num_hidden):
        x = dense(params, f"{prefix}.h{i}", x, "tanh")
    return GaussianParams.of(
        dense(params, f"{prefix}.mean", x),
        dense(params, f"{prefix}.log_var", x),
    )


def gru_init(rng, in_dim, state_dim, prefix):
    params = {}
    for gate in ("z", "r", "n"):
        params[f"{prefix}.W{gate}"] = glorot_uniform(rng, state_dim, in_dim)
        params[f"{prefix}.U{gate}"] = glorot_uniform(rng, state_dim, state_dim)
        params[f"{prefix}.b{gate}"] = np.zeros(state_dim)
    return params


def gru_step(params, prefix, h, x):
    """Gated recurrent update h' = (1 - z) * n + z * h."""
    if ops.value_of(x).shape[-1] != ops.value_of(params[f"{prefix}.Wz"]).shape[1]:
        raise ValueError(f"gru '{prefix}': input dim mismatch")
    if ops.value_of(h).shape[-1] != ops.value_of(params[f"{prefix}.Uz"]).shape[1]:
        raise ValueError(f"gru '{prefix}': state dim mismatch")

    def gate(name, inp, state):
        return ops.matvec(params[f"{prefix}.W{name}"], inp) + ops.matvec(params[f"{prefix}.U{name}"], state) + params[f"{prefix}.b{name}"]

    z = ops.sigmoid(gate("z", x, h))
    r = ops.sigmoid(gate("r", x, h))
    n = ops.tanh(ops.matvec(params[f"{prefix}.Wn"], x) + ops.matvec(params[f"{prefix}.Un"], r * h) + params[f"{prefix}.bn"])
    return (1.0 - z) * n + z * h
