"""Sign and scale resolution for kernel estimates.

A rank-1 decomposition recovers each unit kernel only up to sign, and no
scale.  The routines here fix both from training data: a greedy sweep flips
one layer at a time while the absolute correlation between labels and
predictions improves, and a least-squares slope supplies the global scale.
An oracle variant, for evaluation only, picks each sign by comparing with
the true kernel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cnn import Activation, CnnNetwork, forward_batch

__all__ = [
    "SignedEstimate",
    "corr",
    "greedy_sign_resolve",
    "oracle_sign_resolve",
    "apply_signs",
    "scaled_estimate",
    "predict",
]


@dataclass
class SignedEstimate:
    """Signed unit kernels plus a global scale.

    ``kernels[l] = signs[l] * factors[l]`` for the raw factors the estimate
    was built from, and predictions are ``gamma`` times the network output.
    ``degenerate`` marks a scale fit against constant predictions (gamma is
    0 there); ``non_homogeneous`` marks activation sets (softplus) for which
    a sign flip is not equivalent to any output change, so sign resolution
    is heuristic.  ``sweeps`` counts greedy passes, 0 for oracle signs.
    """

    kernels: tuple[np.ndarray, ...]
    gamma: float
    signs: tuple[int, ...]
    degenerate: bool = False
    non_homogeneous: bool = False
    sweeps: int = 0


def _check_inputs(
    xs: np.ndarray,
    ys: np.ndarray,
    kernels: Sequence[np.ndarray],
    activations: Sequence[Activation],
) -> tuple[np.ndarray, np.ndarray, list[np.ndarray]]:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    ks = [np.asarray(k, dtype=np.float64) for k in kernels]
    if len(ks) != len(activations):
        raise ValueError(f"{len(ks)} kernels but {len(activations)} activations")
    p = math.prod(k.size for k in ks)
    if xs.ndim != 2 or xs.shape[1] != p:
        raise ValueError(f"inputs have shape {xs.shape}, expected (n, {p})")
    if ys.shape != (xs.shape[0],):
        raise ValueError(f"labels have shape {ys.shape}, expected ({xs.shape[0]},)")
    return xs, ys, ks


def _forward_from(
    hs: list[np.ndarray],
    layer: int,
    kernels: Sequence[np.ndarray],
    activations: Sequence[Activation],
) -> list[np.ndarray]:
    """Recompute layer outputs from ``layer`` on, reusing the cached prefix.

    ``hs[l]`` is the batch after ``l`` layers (``hs[0]`` the inputs); the
    return value is the replacement tail ``hs[layer+1:]``.
    """
    n = hs[0].shape[0]
    h = hs[layer]
    tail: list[np.ndarray] = []
    for l in range(layer, len(kernels)):
        h = activations[l].value(h.reshape(n, -1, kernels[l].size) @ kernels[l])
        tail.append(h)
    return tail


def corr(
    xs: np.ndarray,
    ys: np.ndarray,
    kernels: Sequence[np.ndarray],
    activations: Sequence[Activation],
    opt: int,
) -> float:
    """Centered correlation between labels and network predictions.

    With ``opt=0`` returns ``sum_i y_c[i] * yhat_c[i]`` where both label and
    prediction vectors are centered by their means.  With ``opt=1`` divides
    by ``sum_i yhat_c[i]^2``, giving the least-squares slope of labels on
    predictions; constant predictions make that slope 0.
    """
    if opt not in (0, 1):
        raise ValueError(f"opt must be 0 or 1, got {opt}")
    xs, ys, ks = _check_inputs(xs, ys, kernels, activations)
    yhat = forward_batch(CnnNetwork(tuple(ks), tuple(activations)), xs)
    return _corr_from_predictions(ys, yhat, opt)


def _corr_from_predictions(ys: np.ndarray, yhat: np.ndarray, opt: int) -> float:
    yc = ys - ys.mean()
    yhat_c = yhat - yhat.mean()
    rho = float(yc @ yhat_c)
    if opt == 0:
        return rho
    denom = float(yhat_c @ yhat_c)
    if denom == 0.0:
        return 0.0
    return rho / denom


def greedy_sign_resolve(
    xs: np.ndarray,
    ys: np.ndarray,
    factors: Sequence[np.ndarray],
    activations: Sequence[Activation],
) -> SignedEstimate:
    """Resolve signs by greedy single-layer flips, then fit the scale.

    Starting from the raw factors, sweep the layers in order and flip a
    kernel whenever that strictly increases the absolute centered
    correlation between labels and predictions; repeat until a full sweep
    makes no flip.  The scale is then the least-squares slope of the labels
    on the settled predictions.

    For a network with a linear output layer, negating the last kernel
    exactly negates every prediction, so the slope carries that layer's
    sign information: a negative slope is folded into the last kernel,
    which leaves the predictor unchanged and keeps the reported scale
    non-negative.
    """
    xs, ys, ks = _check_inputs(xs, ys, factors, activations)
    D = len(ks)
    signs = [1] * D
    yc = ys - ys.mean()

    hs = [xs] + _forward_from([xs], 0, ks, activations)
    rho_best = abs(_corr_from_predictions(ys, hs[-1][:, 0], 0))
    sweeps = 0
    improved = True
    while improved:
        improved = False
        sweeps += 1
        for l in range(D):
            flipped = -ks[l]
            tail = _forward_from(hs, l, [*ks[:l], flipped, *ks[l + 1:]], activations)
            rho = abs(_corr_from_predictions(ys, tail[-1][:, 0], 0))
            if rho > rho_best:
                ks[l] = flipped
                signs[l] = -signs[l]
                hs[l + 1:] = tail
                rho_best = rho
                improved = True

    yhat = hs[-1][:, 0]
    gamma = _corr_from_predictions(ys, yhat, 1)
    degenerate = float((yhat - yhat.mean()) @ (yhat - yhat.mean())) == 0.0
    if gamma < 0.0 and activations[-1].kind == "identity":
        ks[-1] = -ks[-1]
        signs[-1] = -signs[-1]
        gamma = -gamma
    return SignedEstimate(
        kernels=tuple(ks),
        gamma=gamma,
        signs=tuple(signs),
        degenerate=degenerate,
        non_homogeneous=any(a.kind == "softplus" for a in activations),
        sweeps=sweeps,
    )


def oracle_sign_resolve(
    factors: Sequence[np.ndarray], true_kernels: Sequence[np.ndarray]
) -> tuple[int, ...]:
    """Sign per layer that aligns each factor with the true kernel.

    Returns +1 where the inner product with the truth is non-negative and
    -1 otherwise.  Evaluation helper; uses information no estimator has.
    """
    if len(factors) != len(true_kernels):
        raise ValueError(
            f"{len(factors)} factors but {len(true_kernels)} true kernels"
        )
    signs = []
    for f, k in zip(factors, true_kernels):
        f = np.asarray(f, dtype=np.float64)
        k = np.asarray(k, dtype=np.float64)
        if f.shape != k.shape:
            raise ValueError(f"factor shape {f.shape} != kernel shape {k.shape}")
        signs.append(1 if float(f @ k) >= 0.0 else -1)
    return tuple(signs)


def apply_signs(
    factors: Sequence[np.ndarray], signs: Sequence[int]
) -> tuple[np.ndarray, ...]:
    """Multiply each factor by its sign."""
    if len(factors) != len(signs):
        raise ValueError(f"{len(factors)} factors but {len(signs)} signs")
    return tuple(s * np.asarray(f, dtype=np.float64) for f, s in zip(factors, signs))


def scaled_estimate(
    xs: np.ndarray,
    ys: np.ndarray,
    factors: Sequence[np.ndarray],
    signs: Sequence[int],
    activations: Sequence[Activation],
) -> SignedEstimate:
    """Attach a least-squares scale to factors with already-decided signs."""
    ks = apply_signs(factors, signs)
    xs, ys, _ = _check_inputs(xs, ys, ks, activations)
    yhat = forward_batch(CnnNetwork(ks, tuple(activations)), xs)
    gamma = _corr_from_predictions(ys, yhat, 1)
    yhat_c = yhat - yhat.mean()
    return SignedEstimate(
        kernels=ks,
        gamma=gamma,
        signs=tuple(int(s) for s in signs),
        degenerate=float(yhat_c @ yhat_c) == 0.0,
        non_homogeneous=any(a.kind == "softplus" for a in activations),
        sweeps=0,
    )


def predict(
    estimate: SignedEstimate,
    activations: Sequence[Activation],
    xs: np.ndarray,
) -> np.ndarray | float:
    """Scaled network prediction ``gamma * f(x)`` for one input or a batch."""
    net = CnnNetwork(estimate.kernels, tuple(activations))
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim == 1:
        ys = forward_batch(net, xs[None, :])
        return float(estimate.gamma * ys[0])
    return estimate.gamma * forward_batch(net, xs)
