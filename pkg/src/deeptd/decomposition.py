"""Kernel recovery via a moment tensor and its best rank-1 approximation.

For data ``(x_i, y_i)`` with standard normal inputs, the centered moment
vector ``(1/n) sum_i (y_i - ybar) x_i`` tensorizes into an array whose best
rank-1 approximation has factors aligned with the (unit) layer kernels of
the generating network.  The alternating least squares routine here computes
that approximation with random restarts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensors import (
    DenseTensor,
    TensorShape,
    contract_all_but,
    frobenius_norm,
    outer_product,
    tensorize,
)

__all__ = [
    "AlsOptions",
    "DecompositionResult",
    "empirical_tensor",
    "orient_factors",
    "rank1_decompose",
    "deeptd_estimate",
    "approx_spectral_norm",
    "rank1_residual",
]


@dataclass(frozen=True)
class AlsOptions:
    """Settings for the rank-1 alternating least squares solver.

    Parameters
    ----------
    restarts : int
        Number of independent random initializations; the best is kept.
    max_iters : int
        Sweep budget per restart.
    rel_tol : float
        Stop a restart once the objective changes by less than this
        relative amount between sweeps.
    seed : int or None
        Seed for the initialization generator.
    """

    restarts: int = 10
    max_iters: int = 500
    rel_tol: float = 1e-9
    seed: int | None = 0

    def __post_init__(self) -> None:
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0.0:
            raise ValueError("rel_tol must be positive")


@dataclass
class DecompositionResult:
    """Best rank-1 approximation ``weight * outer(factors)`` found by ALS.

    ``factors`` are unit vectors, ``weight >= 0`` equals the objective
    ``<T, outer(factors)>`` at the solution, and ``objective_history``
    records that objective after each sweep of the winning restart.
    """

    factors: tuple[np.ndarray, ...]
    weight: float
    converged: bool
    objective_history: list[float] = field(default_factory=list)
    restarts_used: int = 0


def empirical_tensor(
    xs: np.ndarray,
    ys: np.ndarray,
    shape: TensorShape,
    centered: bool = True,
) -> DenseTensor:
    """Weighted input average ``(1/n) sum_i w_i x_i`` folded into a tensor.

    With ``centered=True`` the weights are the centered labels
    ``y_i - mean(y)``; otherwise the raw labels.  Centering removes the
    mean response, which would otherwise bias the rank-1 structure for
    networks whose output is not centered (e.g. with ReLU outputs).

    Parameters
    ----------
    xs : ndarray, shape (n, p)
        Inputs, one per row, with ``p = shape.size``.
    ys : ndarray, shape (n,)
        Labels.
    shape : TensorShape
        Mode sizes, matching the kernel lengths of the network layer by
        layer.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.ndim != 2:
        raise ValueError("xs must be a 2-D array of row samples")
    if ys.shape != (xs.shape[0],):
        raise ValueError(f"ys has shape {ys.shape}, expected ({xs.shape[0]},)")
    if xs.shape[0] < 1:
        raise ValueError("need at least one sample")
    if xs.shape[1] != shape.size:
        raise ValueError(
            f"inputs have dimension {xs.shape[1]}, shape {shape.dims} "
            f"needs {shape.size}"
        )
    weights = ys - ys.mean() if centered else ys
    moment = xs.T @ weights / xs.shape[0]
    return tensorize(moment, shape)


def orient_factors(factors: tuple[np.ndarray, ...]) -> tuple[np.ndarray, ...]:
    """Resolve the sign indeterminacy of rank-1 factors deterministically.

    A rank-1 outer product is unchanged when an even number of factors flip
    sign, so ALS output carries an arbitrary orientation per factor.  This
    picks a fixed representative: every factor except the last is flipped,
    if needed, to have a nonnegative entry sum (falling back to the sign of
    its largest-magnitude entry when the sum is exactly zero), and the
    accumulated sign lands on the last factor.  The total number of flips
    is even, so ``outer_product(factors)`` is preserved exactly.

    The entry sum is the right statistic here: kernels of networks that
    survive the operational filter are biased toward positive sums (that is
    what keeps ReLU units alive), so this orientation starts the downstream
    sign search close to the working configuration.  The leftover sign on
    the last factor only scales the network output when the final layer is
    linear, and the fitted output scale recovers it.
    """
    oriented = [np.array(v, dtype=np.float64) for v in factors]
    carry = 1.0
    for v in oriented[:-1]:
        s = float(v.sum())
        if s == 0.0:
            s = float(v[np.argmax(np.abs(v))])
        if s < 0.0:
            v *= -1.0
            carry = -carry
    oriented[-1] *= carry
    return tuple(oriented)


def _unit_gaussian(rng: np.random.Generator, d: int) -> np.ndarray:
    v = rng.standard_normal(d)
    nrm = np.linalg.norm(v)
    while nrm == 0.0:
        v = rng.standard_normal(d)
        nrm = np.linalg.norm(v)
    return v / nrm


def rank1_decompose(
    tensor: DenseTensor, options: AlsOptions = AlsOptions()
) -> DecompositionResult:
    """Best rank-1 approximation by alternating least squares.

    Each restart draws uniform random unit factors and cyclically replaces
    factor ``l`` with the normalized contraction of the tensor against all
    other factors, which maximizes the objective ``<T, outer(v)>`` over
    that factor.  The objective is non-decreasing across sweeps; a restart
    stops when its relative change drops below ``options.rel_tol``.

    A contraction that is exactly zero leaves the next factor undefined;
    such a restart is abandoned and the solver moves on to a fresh random
    initialization.  If every restart degenerates (the zero tensor), the
    result has ``weight`` 0 and ``converged`` False.

    Returned factors follow the :func:`orient_factors` sign convention;
    the rank-1 model ``weight * outer(factors)`` is unaffected.
    """
    dims = tensor.shape.dims
    D = len(dims)
    rng = np.random.default_rng(options.seed)
    best: DecompositionResult | None = None
    for _ in range(options.restarts):
        factors: list[np.ndarray | None] = [
            _unit_gaussian(rng, d) for d in dims
        ]
        history: list[float] = []
        converged = False
        degenerate = False
        objective = 0.0
        for _ in range(options.max_iters):
            for mode in range(D):
                w = contract_all_but(tensor, factors, mode)
                nrm = float(np.linalg.norm(w))
                if nrm == 0.0:
                    degenerate = True
                    break
                factors[mode] = w / nrm
            if degenerate:
                break
            # After the last mode update the norm of the contraction is
            # exactly the objective at the current factors.
            prev = objective
            objective = nrm
            history.append(objective)
            if len(history) > 1 and abs(objective - prev) <= options.rel_tol * objective:
                converged = True
                break
        if degenerate:
            continue
        if best is None or objective > best.weight:
            best = DecompositionResult(
                factors=tuple(factors),  # type: ignore[arg-type]
                weight=objective,
                converged=converged,
                objective_history=history,
            )
    if best is None:
        best = DecompositionResult(
            factors=tuple(_basis_vector(d) for d in dims),
            weight=0.0,
            converged=False,
            objective_history=[],
        )
    best.factors = orient_factors(best.factors)
    best.restarts_used = options.restarts
    return best


def _basis_vector(d: int) -> np.ndarray:
    e = np.zeros(d)
    e[0] = 1.0
    return e


def deeptd_estimate(
    xs: np.ndarray,
    ys: np.ndarray,
    dims: tuple[int, ...],
    options: AlsOptions = AlsOptions(),
    centered: bool = True,
) -> DecompositionResult:
    """Estimate the unit kernels of a deep CNN from data.

    Builds the (centered) empirical tensor with mode sizes ``dims`` and
    returns its best rank-1 approximation; the factors estimate the unit
    layer kernels up to sign.  ``centered=False`` gives the naive variant
    that skips label centering.
    """
    tensor = empirical_tensor(xs, ys, TensorShape(tuple(dims)), centered=centered)
    return rank1_decompose(tensor, options)


def approx_spectral_norm(
    tensor: DenseTensor, options: AlsOptions = AlsOptions()
) -> float:
    """Spectral norm estimate: the weight of the best rank-1 approximation."""
    return rank1_decompose(tensor, options).weight


def rank1_residual(tensor: DenseTensor, result: DecompositionResult) -> float:
    """Frobenius norm of ``T - weight * outer(factors)``."""
    approx = outer_product(result.factors)
    diff = DenseTensor(
        tensor.shape, tensor.data - result.weight * approx.data
    )
    return frobenius_norm(diff)
