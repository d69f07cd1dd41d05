"""Soft debiasing: learn a linear map that trades inner-product fidelity
against residual bias of neutral words.

The objective is ``|(AW)'(AW) - W'W|_F^2 + lambda * |(AN)'(AB)|_F^2`` with
W the full-vocabulary embedding columns, N the neutral-word columns and B
the subspace basis columns. Both terms reduce to d x d traces:

    fidelity = tr((M C)^2)        M = A'A - I,  C = W W'
    bias     = tr(G P G Q)        G = A'A,  P = N N',  Q = B B'

so each optimizer iteration costs O(d^3) regardless of vocabulary size;
the vocabulary enters only through the one-time gram precompute.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .debias import DebiasResult, build_provenance, neutral_tokens
from .errors import DataError
from .lexicon import ResolvedLexicon
from .store import UNIT_NORM_TOL, EmbeddingStore
from .subspace import BiasSubspace

_ARMIJO = 1e-4
_MIN_STEP = 1e-20
_ZERO_GRAD = 1e-30

TraceFn = Callable[[int, float, float, float, float], None]


@dataclass(frozen=True)
class SoftDebiasConfig:
    lambda_: float = 0.2
    max_iters: int = 10000
    rel_tol: float = 1e-6
    step_init: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.lambda_ < 0:
            raise DataError("bad-lambda", f"lambda must be >= 0, got {self.lambda_}")
        if self.rel_tol <= 0:
            raise DataError("bad-tolerance", f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_iters < 0:
            raise DataError("bad-count", f"max_iters must be >= 0, got {self.max_iters}")
        if self.step_init <= 0:
            raise DataError("bad-step", f"step_init must be > 0, got {self.step_init}")


@dataclass(frozen=True)
class ObjectiveBreakdown:
    total: float
    fidelity_term: float
    bias_term: float
    iterations: int = 0
    converged: bool = False


def _as_basis_columns(basis: BiasSubspace | np.ndarray) -> np.ndarray:
    rows = basis.basis if isinstance(basis, BiasSubspace) else np.asarray(basis, dtype=np.float64)
    if rows.ndim != 2:
        raise DataError("bad-matrix-shape", f"basis must be k x d, got shape {rows.shape}")
    return rows.T


def _grams(W: np.ndarray, N: np.ndarray, B: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    d = W.shape[0]
    if N.size and N.shape[0] != d:
        raise DataError("dimension-mismatch", f"W rows {d} but N rows {N.shape[0]}")
    if B.shape[0] != d:
        raise DataError("dimension-mismatch", f"W rows {d} but basis rows {B.shape[0]}")
    C = W @ W.T
    P = N @ N.T if N.size else np.zeros((d, d))
    Q = B @ B.T
    return C, P, Q


def _gram_objective(
    A: np.ndarray, C: np.ndarray, P: np.ndarray, Q: np.ndarray, lambda_: float
) -> tuple[float, float, float]:
    G = A.T @ A
    M = G - np.eye(A.shape[0])
    MC = M @ C
    fidelity = float((MC * MC.T).sum())
    GP = G @ P
    GQ = G @ Q
    bias = float((GP * GQ.T).sum())
    return fidelity + lambda_ * bias, fidelity, bias


def _gram_gradient(
    A: np.ndarray, C: np.ndarray, P: np.ndarray, Q: np.ndarray, lambda_: float
) -> np.ndarray:
    G = A.T @ A
    M = G - np.eye(A.shape[0])
    grad = 4.0 * A @ (C @ M @ C)
    if lambda_ != 0.0:
        grad = grad + 2.0 * lambda_ * A @ (P @ G @ Q + Q @ G @ P)
    return grad


def objective(
    A: np.ndarray,
    W: np.ndarray,
    N: np.ndarray,
    basis: BiasSubspace | np.ndarray,
    lambda_: float,
) -> ObjectiveBreakdown:
    """Evaluate the objective at A. W and N hold embeddings as columns."""
    A = np.asarray(A, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    N = np.asarray(N, dtype=np.float64)
    B = _as_basis_columns(basis)
    d = W.shape[0]
    if A.shape != (d, d):
        raise DataError("dimension-mismatch", f"A must be {d} x {d}, got {A.shape}")
    total, fidelity, bias = _gram_objective(A, *_grams(W, N, B), lambda_)
    return ObjectiveBreakdown(total, fidelity, bias)


def gradient(
    A: np.ndarray,
    W: np.ndarray,
    N: np.ndarray,
    basis: BiasSubspace | np.ndarray,
    lambda_: float,
) -> np.ndarray:
    """Analytic gradient of the objective with respect to A."""
    A = np.asarray(A, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    N = np.asarray(N, dtype=np.float64)
    B = _as_basis_columns(basis)
    d = W.shape[0]
    if A.shape != (d, d):
        raise DataError("dimension-mismatch", f"A must be {d} x {d}, got {A.shape}")
    return _gram_gradient(A, *_grams(W, N, B), lambda_)


def _minimize(
    C: np.ndarray,
    P: np.ndarray,
    Q: np.ndarray,
    config: SoftDebiasConfig,
    trace: TraceFn | None = None,
) -> tuple[np.ndarray, ObjectiveBreakdown]:
    """Gradient descent from the identity with backtracking line search.

    Operates purely on the d x d gram matrices. Accepted objective values
    are non-increasing by construction (Armijo sufficient decrease).
    """
    d = C.shape[0]
    lam = config.lambda_
    A = np.eye(d)
    total, fidelity, bias = _gram_objective(A, C, P, Q, lam)
    if not np.isfinite(total):
        raise DataError("non-finite-objective", "objective is non-finite at iteration 0")
    if trace is not None:
        trace(0, total, fidelity, bias, 0.0)

    iterations = 0
    converged = False
    step = config.step_init
    for it in range(1, config.max_iters + 1):
        grad = _gram_gradient(A, C, P, Q, lam)
        grad_sq = float((grad * grad).sum())
        if grad_sq <= _ZERO_GRAD:
            converged = True
            break

        accepted = None
        saw_finite = False
        while step >= _MIN_STEP:
            candidate = A - step * grad
            cand_total, cand_fid, cand_bias = _gram_objective(candidate, C, P, Q, lam)
            if np.isfinite(cand_total):
                saw_finite = True
                if cand_total <= total - _ARMIJO * step * grad_sq:
                    accepted = (candidate, cand_total, cand_fid, cand_bias)
                    break
            step *= 0.5
        if accepted is None:
            if not saw_finite:
                raise DataError("non-finite-objective", f"objective diverged at iteration {it}")
            # No finite step achieves sufficient decrease: numerically stationary.
            converged = True
            break

        A, new_total, fidelity, bias = accepted
        iterations = it
        if trace is not None:
            trace(it, new_total, fidelity, bias, step)
        decrease = total - new_total
        total = new_total
        if decrease < config.rel_tol * max(abs(total), 1e-300):
            converged = True
            break
        step *= 2.0

    return A, ObjectiveBreakdown(total, fidelity, bias, iterations=iterations, converged=converged)


def optimize(
    store: EmbeddingStore,
    resolved: ResolvedLexicon,
    subspace: BiasSubspace,
    config: SoftDebiasConfig = SoftDebiasConfig(),
    trace: TraceFn | None = None,
) -> tuple[np.ndarray, ObjectiveBreakdown]:
    """Learn the debiasing transform for a store under a lexicon's neutral policy."""
    if not store.normalized:
        raise DataError("store-not-normalized", "soft debiasing requires unit-normalized embeddings")
    W = store.matrix.T
    neutral = neutral_tokens(store, resolved)
    N = store.matrix[[store.index[w] for w in neutral]].T if neutral else np.zeros((store.dim, 0))
    C, P, Q = _grams(W, N, _as_basis_columns(subspace))
    return _minimize(C, P, Q, config, trace)


def apply_transform(
    A: np.ndarray,
    store: EmbeddingStore,
    renormalize: bool = False,
    *,
    k: int = 0,
    lambda_: float | None = None,
    resolved: ResolvedLexicon | None = None,
    extra_provenance: dict | None = None,
) -> DebiasResult:
    """Replace every embedding w by A w (optionally rescaled to unit length)."""
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (store.dim, store.dim):
        raise DataError("dimension-mismatch", f"A must be {store.dim} x {store.dim}, got {A.shape}")
    matrix = store.matrix @ A.T
    norms = np.linalg.norm(matrix, axis=1)
    if renormalize:
        if (norms == 0.0).any():
            bad = store.vocab[int(np.argmax(norms == 0.0))]
            raise DataError("zero-norm-row", f"transform maps {bad!r} to the zero vector")
        matrix = matrix / norms[:, None]
        normalized = True
    else:
        normalized = bool(np.abs(norms - 1.0).max(initial=0.0) <= UNIT_NORM_TOL)

    params = {
        "k": int(k),
        "lambda": lambda_,
        "renormalize": renormalize,
        "condition_number": float(np.linalg.cond(A)),
    }
    if extra_provenance:
        params.update(extra_provenance)
    if resolved is not None:
        provenance = build_provenance("soft", resolved, params)
        neutralized = neutral_tokens(store, resolved)
    else:
        provenance = {"method": "soft", **params}
        neutralized = ()
    return DebiasResult(
        store=EmbeddingStore(store.vocab, matrix, normalized=normalized),
        method="soft",
        k=int(k),
        lambda_=lambda_,
        neutralized=tuple(neutralized),
        equalized=(),
        provenance=provenance,
        warnings=resolved.warnings if resolved is not None else (),
    )


def soft_debias(
    store: EmbeddingStore,
    resolved: ResolvedLexicon,
    subspace: BiasSubspace,
    config: SoftDebiasConfig = SoftDebiasConfig(),
    renormalize: bool = False,
    trace: TraceFn | None = None,
) -> tuple[DebiasResult, ObjectiveBreakdown]:
    """Optimize the transform and apply it to the store."""
    A, breakdown = optimize(store, resolved, subspace, config, trace)
    result = apply_transform(
        A,
        store,
        renormalize,
        k=subspace.k,
        lambda_=config.lambda_,
        resolved=resolved,
        extra_provenance={
            "iterations": breakdown.iterations,
            "converged": breakdown.converged,
            "final_total": breakdown.total,
            "final_fidelity": breakdown.fidelity_term,
            "final_bias": breakdown.bias_term,
            "max_iters": config.max_iters,
            "rel_tol": config.rel_tol,
            "step_init": config.step_init,
            "seed": config.seed,
        },
    )
    return result, breakdown
