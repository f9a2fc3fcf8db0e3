"""Deep non-overlapping convolutional networks with scalar kernels per layer.

A layer with kernel ``k`` of length ``d`` maps a vector of length ``p`` (a
multiple of ``d``) to one of length ``p/d``: output unit ``i`` is the inner
product of ``k`` with the ``i``-th block of ``d`` consecutive inputs.  The
network alternates these convolutions with entrywise activations and ends
with a single scalar output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "Activation",
    "IDENTITY",
    "RELU",
    "SOFTPLUS",
    "leaky_relu",
    "parse_activation",
    "Kernel",
    "CnnNetwork",
    "ForwardTrace",
    "kernel_matrix",
    "non_overlapping_convolve",
    "forward",
    "forward_batch",
    "path_gain_vector",
    "estimate_cnn_gain",
    "diffuseness",
    "gain_condition_holds",
]

Kernel = np.ndarray
"""A layer kernel is a 1-D float array of its weights."""


@dataclass(frozen=True)
class Activation:
    """Entrywise activation function.

    Supported kinds: ``identity``, ``relu``, ``leaky_relu`` (with slope
    ``beta`` in [0, 1] for negative inputs) and ``softplus``.

    ``smoothness`` is the second-derivative bound where one exists: 0 for
    identity, 1 for softplus, None for the kinked ReLU family.
    """

    kind: str
    beta: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("identity", "relu", "leaky_relu", "softplus"):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "leaky_relu" and not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"leaky_relu slope must be in [0, 1], got {self.beta}")

    @property
    def smoothness(self) -> float | None:
        if self.kind == "identity":
            return 0.0
        if self.kind == "softplus":
            return 1.0
        return None

    def value(self, z: np.ndarray | float) -> np.ndarray:
        """Apply the activation entrywise."""
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "identity":
            return z
        if self.kind == "relu":
            return np.maximum(z, 0.0)
        if self.kind == "leaky_relu":
            return np.where(z > 0.0, z, self.beta * z)
        # Softplus, written to stay finite for large |z|.
        return np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z)))

    def derivative(self, z: np.ndarray | float) -> np.ndarray:
        """Entrywise derivative; the ReLU family uses phi'(0) = beta (0 for relu)."""
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "identity":
            return np.ones_like(z)
        if self.kind == "relu":
            return np.where(z > 0.0, 1.0, 0.0)
        if self.kind == "leaky_relu":
            return np.where(z > 0.0, 1.0, self.beta)
        # Logistic sigmoid via tanh keeps the tails accurate.
        return 0.5 * (1.0 + np.tanh(0.5 * z))


IDENTITY = Activation("identity")
RELU = Activation("relu")
SOFTPLUS = Activation("softplus")


def leaky_relu(beta: float) -> Activation:
    """Leaky ReLU with the given negative-side slope."""
    return Activation("leaky_relu", beta=float(beta))


def parse_activation(text: str) -> Activation:
    """Parse ``"identity"``, ``"relu"``, ``"softplus"`` or ``"leaky_relu:<beta>"``."""
    name, sep, arg = text.strip().partition(":")
    name = name.strip().lower()
    if name == "leaky_relu":
        if not sep:
            raise ValueError("leaky_relu needs a slope, e.g. 'leaky_relu:0.1'")
        try:
            beta = float(arg)
        except ValueError:
            raise ValueError(f"bad leaky_relu slope {arg!r}") from None
        return leaky_relu(beta)
    if sep:
        raise ValueError(f"activation {name!r} takes no argument")
    if name in ("identity", "relu", "softplus"):
        return Activation(name)
    raise ValueError(f"unknown activation {text!r}")


def _check_kernel(k: np.ndarray, layer: int) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    if k.ndim != 1 or k.size == 0:
        raise ValueError(f"kernel {layer} must be a nonempty 1-D vector")
    if not np.all(np.isfinite(k)):
        raise ValueError(f"kernel {layer} has non-finite entries")
    return k


@dataclass
class CnnNetwork:
    """A deep non-overlapping CNN: one kernel and one activation per layer.

    The input dimension is ``prod(len(k_l))`` and each layer divides the
    width by its kernel length, so the final layer emits a single scalar.
    """

    kernels: tuple[Kernel, ...]
    activations: tuple[Activation, ...]
    widths: tuple[int, ...] = field(init=False)

    def __post_init__(self) -> None:
        kernels = tuple(
            _check_kernel(k, l) for l, k in enumerate(self.kernels)
        )
        if len(kernels) == 0:
            raise ValueError("network needs at least one layer")
        if len(self.activations) != len(kernels):
            raise ValueError(
                f"{len(kernels)} kernels but {len(self.activations)} activations"
            )
        self.kernels = kernels
        self.activations = tuple(self.activations)
        # Widths after each layer; p_0 = prod(d_l) makes every division exact
        # and leaves a single scalar after the last layer.
        widths = [math.prod(k.size for k in kernels)]
        for k in kernels:
            widths.append(widths[-1] // k.size)
        self.widths = tuple(widths)

    @property
    def depth(self) -> int:
        return len(self.kernels)

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def dims(self) -> tuple[int, ...]:
        """Kernel lengths (d_1, ..., d_D)."""
        return tuple(k.size for k in self.kernels)


@dataclass
class ForwardTrace:
    """Output of a forward pass plus the pre-activation of every layer."""

    output: float
    pre_activations: list[np.ndarray]


def non_overlapping_convolve(kernel: Kernel, h: np.ndarray) -> np.ndarray:
    """Stride-``d`` convolution: entry ``i`` is ``<k, h[i*d:(i+1)*d]>``."""
    kernel = np.asarray(kernel, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    d = kernel.size
    if h.ndim != 1:
        raise ValueError("input must be a 1-D vector")
    if h.size % d:
        raise ValueError(f"input length {h.size} not divisible by {d}")
    return h.reshape(-1, d) @ kernel


def kernel_matrix(kernel: Kernel, p: int) -> np.ndarray:
    """The ``(p/d) x p`` matrix of the non-overlapping convolution.

    Equals ``I_{p/d} (x) k^T``: block-diagonal with copies of the kernel row.
    """
    kernel = np.asarray(kernel, dtype=np.float64)
    d = kernel.size
    if p % d:
        raise ValueError(f"width {p} not divisible by kernel length {d}")
    return np.kron(np.eye(p // d), kernel.reshape(1, d))


def forward(network: CnnNetwork, x: np.ndarray) -> ForwardTrace:
    """Evaluate the network on one input, keeping every pre-activation."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (network.input_dim,):
        raise ValueError(
            f"input has shape {x.shape}, network expects ({network.input_dim},)"
        )
    h = x
    pres: list[np.ndarray] = []
    for k, act in zip(network.kernels, network.activations):
        hbar = h.reshape(-1, k.size) @ k
        pres.append(hbar)
        h = act.value(hbar)
    return ForwardTrace(output=float(h[0]), pre_activations=pres)


def forward_batch(
    network: CnnNetwork, xs: np.ndarray, keep_pre: bool = False
) -> np.ndarray | tuple[np.ndarray, list[np.ndarray]]:
    """Evaluate the network on a batch of rows.

    Parameters
    ----------
    xs : ndarray, shape (n, p)
    keep_pre : bool
        When True also return the per-layer pre-activation batches.

    Returns
    -------
    ys : ndarray, shape (n,)
        Network outputs, or ``(ys, pre_activations)`` if ``keep_pre``.
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != network.input_dim:
        raise ValueError(
            f"batch has shape {xs.shape}, expected (n, {network.input_dim})"
        )
    n = xs.shape[0]
    h = xs
    pres: list[np.ndarray] = []
    for k, act in zip(network.kernels, network.activations):
        hbar = h.reshape(n, -1, k.size) @ k
        if keep_pre:
            pres.append(hbar)
        h = act.value(hbar)
    ys = h[:, 0]
    return (ys, pres) if keep_pre else ys


def path_gain_vector(network: CnnNetwork) -> np.ndarray:
    """Per-input-coordinate product of kernel weights along the network.

    Coordinate ``i`` gets ``prod_l k_l[j_l]`` where ``(j_1, ..., j_D)`` is
    the mixed-radix expansion of ``i`` in bases ``(d_1, ..., d_D)``, least
    significant digit first.  For a fully linear network this vector ``g``
    satisfies ``f(x) = <g, x>``.
    """
    rem = np.arange(network.input_dim)
    gains = np.ones(network.input_dim)
    for k in network.kernels:
        digits = rem % k.size
        rem = rem // k.size
        gains = gains * k[digits]
    return gains


def estimate_cnn_gain(
    network: CnnNetwork,
    mc_samples: int = 100_000,
    seed: int | None = None,
) -> float:
    """Monte-Carlo estimate of the network gain.

    The gain is the product over layers of ``E[phi_l'(hbar_l[0])]`` where
    the pre-activations come from a standard normal input.  It is the factor
    by which the rank-1 structure of the data tensor is scaled.

    Parameters
    ----------
    mc_samples : int
        Number of standard normal inputs to average over.
    seed : int, optional
        Seed for the sampling generator.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be positive")
    rng = np.random.default_rng(seed)
    p = network.input_dim
    sums = np.zeros(network.depth)
    done = 0
    # Chunk the batch so the (rows, p) workspace stays modest.
    block = max(1, min(mc_samples, 4_000_000 // p))
    while done < mc_samples:
        rows = min(block, mc_samples - done)
        xs = rng.standard_normal((rows, p))
        _, pres = forward_batch(network, xs, keep_pre=True)
        for l, act in enumerate(network.activations):
            sums[l] += float(np.sum(act.derivative(pres[l][:, 0])))
        done += rows
    return float(np.prod(sums / mc_samples))


def diffuseness(kernels: Sequence[Kernel]) -> float:
    """Max over layers of ``sqrt(d_l) * ||k_l||_inf / ||k_l||_2``.

    Equals 1 for kernels with equal-magnitude weights and grows towards
    ``sqrt(d_l)`` as the mass concentrates on few weights.
    """
    if len(kernels) == 0:
        raise ValueError("need at least one kernel")
    worst = 0.0
    for l, k in enumerate(kernels):
        k = _check_kernel(k, l)
        nrm = float(np.linalg.norm(k))
        if nrm == 0.0:
            raise ValueError(f"kernel {l} is zero")
        worst = max(worst, math.sqrt(k.size) * float(np.max(np.abs(k))) / nrm)
    return worst


def gain_condition_holds(kernel: Kernel) -> bool:
    """Whether ``sum(k) >= 4 * ||k||_2``, a diagnostic for healthy gains."""
    k = _check_kernel(kernel, 0)
    return bool(np.sum(k) >= 4.0 * np.linalg.norm(k))
