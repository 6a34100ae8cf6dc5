"""Minimal fully-connected network with hand-written reverse-mode gradients.

Everything downstream (actors, critics, value functions) is built from the
``Mlp`` class defined here.  The architecture is deliberately fixed -- a stack
of linear layers with relu/tanh hidden activations and optional per-layer
normalization -- so the backward pass can be written out explicitly instead of
relying on a general autodiff tape.  All math is float64; parameters are only
narrowed to float32 at checkpoint time.
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("relu", "tanh")

# Normalization epsilon.  Small enough that normalized rows have unit variance
# to ~1e-6 for typical activation scales.
_LN_EPS = 1e-8


def _check_activation(name: str) -> str:
    if name not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}, expected one of {ACTIVATIONS}")
    return name


class Mlp:
    """Feed-forward network: linear -> activation [-> layer norm] per hidden layer.

    Parameters
    ----------
    widths:
        Layer widths including input and output, e.g. ``[3, 256, 256, 1]``.
    activation:
        Hidden activation, ``"relu"`` or ``"tanh"``.  The output layer is linear.
    layer_norm:
        If true, hidden post-activation rows are normalized to zero mean and
        unit variance (no learnable affine, so the parameter count is
        unchanged).  Applied after the activation.
    rng:
        Generator used for weight initialization (uniform +-1/sqrt(fan_in),
        the usual torch-style default).
    dtype:
        Compute precision.  float64 is the exactness-first default; desk-run
        configs switch to float32, which roughly halves step time on
        memory-bound CPUs.
    """

    def __init__(self, widths, activation="relu", layer_norm=False, rng=None,
                 dtype=np.float64):
        widths = [int(w) for w in widths]
        if len(widths) < 2 or any(w <= 0 for w in widths):
            raise ValueError(f"widths must be >=2 positive integers, got {widths}")
        self.widths = widths
        self.activation = _check_activation(activation)
        self.layer_norm = bool(layer_norm)
        self.dtype = np.dtype(dtype)
        if self.dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
            raise ValueError("dtype must be float32 or float64")
        if rng is None:
            rng = np.random.default_rng(0)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(
                rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(self.dtype))
            self.biases.append(
                rng.uniform(-bound, bound, size=(fan_out,)).astype(self.dtype))

    # -- structure ---------------------------------------------------------

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def in_dim(self) -> int:
        return self.widths[0]

    @property
    def out_dim(self) -> int:
        return self.widths[-1]

    def param_count(self) -> int:
        """Total parameter count: sum over layers of (fan_in + 1) * fan_out."""
        return sum((i + 1) * o for i, o in zip(self.widths[:-1], self.widths[1:]))

    def parameters(self):
        """Flat list of parameter arrays (weights interleaved with biases)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def zero_grads(self):
        return [np.zeros_like(p) for p in self.parameters()]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=self.dtype)
        if flat.size != self.param_count():
            raise ValueError(f"expected {self.param_count()} parameters, got {flat.size}")
        i = 0
        for p in self.parameters():
            p[...] = flat[i : i + p.size].reshape(p.shape)
            i += p.size

    def copy(self) -> "Mlp":
        other = Mlp.__new__(Mlp)
        other.widths = list(self.widths)
        other.activation = self.activation
        other.layer_norm = self.layer_norm
        other.dtype = self.dtype
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        return other

    # -- forward / backward --------------------------------------------------

    def _activate(self, z):
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def forward(self, x, return_cache=False):
        """Run the network on ``x`` (a single vector or a (batch, in_dim) array).

        Raises ``ValueError`` on an input-width mismatch.  When
        ``return_cache`` is true, also returns the intermediates needed by
        :meth:`backward`.
        """
        x = np.asarray(x, dtype=self.dtype)
        squeeze = x.ndim == 1
        if squeeze:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"input width {x.shape} incompatible with net input {self.in_dim}")

        cache = {"inputs": [], "pre": [], "post": [], "ln": []}
        h = x
        last = self.n_layers - 1
        for li, (w, b) in enumerate(zip(self.weights, self.biases)):
            cache["inputs"].append(h)
            z = h @ w + b
            if li == last:
                h = z
                cache["pre"].append(z)
                cache["post"].append(None)
                cache["ln"].append(None)
                continue
            a = self._activate(z)
            cache["pre"].append(z)
            cache["post"].append(a)
            if self.layer_norm:
                d = a - a.mean(axis=1, keepdims=True)
                var = (d * d).mean(axis=1, keepdims=True)
                inv = 1.0 / np.sqrt(var + _LN_EPS)
                y = d * inv
                cache["ln"].append((y, inv))
                h = y
            else:
                cache["ln"].append(None)
                h = a
        out = h[0] if squeeze else h
        if return_cache:
            cache["squeeze"] = squeeze
            return out, cache
        return out

    def backward(self, cache, grad_out):
        """Backpropagate ``grad_out`` (d loss / d output) through the cache.

        Returns ``(grads, grad_in)`` where ``grads`` matches
        :meth:`parameters` ordering and ``grad_in`` is the gradient with
        respect to the network input.
        """
        g = np.asarray(grad_out, dtype=self.dtype)
        if cache["squeeze"]:
            g = g[None, :]
        grads_w = [None] * self.n_layers
        grads_b = [None] * self.n_layers
        last = self.n_layers - 1
        for li in range(last, -1, -1):
            if li != last:
                if self.layer_norm:
                    y, inv = cache["ln"][li]
                    # d/da of y = (a - mean(a)) * inv with inv = (var+eps)^-1/2
                    gy = g
                    g = inv * (gy - gy.mean(axis=1, keepdims=True)
                               - y * (gy * y).mean(axis=1, keepdims=True))
                if self.activation == "relu":
                    g = g * (cache["pre"][li] > 0.0)
                else:
                    post = cache["post"][li]
                    g = g * (1.0 - post * post)
            x_in = cache["inputs"][li]
            grads_w[li] = x_in.T @ g
            grads_b[li] = g.sum(axis=0)
            g = g @ self.weights[li].T
        grads = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        grad_in = g[0] if cache["squeeze"] else g
        return grads, grad_in


def polyak_update(target: Mlp, source: Mlp, rate: float) -> None:
    """In-place soft update: target <- (1 - rate) * target + rate * source."""
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"polyak rate must be in (0, 1], got {rate}")
    for t, s in zip(target.parameters(), source.parameters()):
        t *= 1.0 - rate
        t += rate * s


def add_grads(acc, grads, scale=1.0):
    """Accumulate ``grads`` into ``acc`` in place (``acc += scale * grads``)."""
    for a, g in zip(acc, grads):
        a += scale * g
    return acc
