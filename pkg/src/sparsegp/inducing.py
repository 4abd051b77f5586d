"""Inducing-set construction.

Selection of inducing points by uniform sampling, greedy determinant
maximization, and a lazy Metropolis exchange chain whose stationary law is
the k-DPP over principal submatrices of the training Gram matrix.  The chain
keeps a Cholesky factor of the current submatrix and evaluates every
determinant ratio through an O(M^2) delete/append edit.  Also provides the
provable step budget for epsilon-close sampling, an exact enumerator used as
a desk-scale oracle, and the two spectral feature families.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import chol, kernels, svgp
from .errors import (
    DegenerateKernelError,
    EigenFailureError,
    EnumerationTooLargeError,
    InvalidEpsilonError,
    MTooLargeError,
    NotPositiveDefiniteError,
    NumericalInconsistencyError,
    QuadratureTooCoarseError,
)

# Incremental log-determinants are checked against a fresh factorization
# this often; drift beyond DRIFT_TOL aborts the chain.
REFACTOR_PERIOD = 10_000
DRIFT_TOL = 1e-6

ENUMERATION_LIMIT = 1_000_000


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    # Counter-based generator so chains keyed by (seed, stream) are independent.
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), int(stream)))))


def _as_2d(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return X[:, None] if X.ndim == 1 else X


def uniform_subset(N: int, M: int, seed: int) -> np.ndarray:
    """Uniform size-M subset of range(N) without replacement, sorted."""
    if not 1 <= M <= N:
        raise MTooLargeError(f"cannot choose {M} indices from {N}")
    return np.sort(_rng(seed).choice(N, size=M, replace=False))


def _greedy_selection(
    kernel: kernels.KernelSpec, X: np.ndarray, M: int, allow_truncation: bool = False
) -> tuple[list[int], chol.LowerFactor]:
    """Greedy determinant maximization; returns selection order and K_S factor."""
    N = X.shape[0]
    if not 1 <= M <= N:
        raise MTooLargeError(f"cannot choose {M} indices from {N}")
    diag = kernels.gram_diag(kernel, X)
    resid = diag.copy()
    C = np.zeros((M, N))
    chosen: list[int] = []
    for step in range(M):
        masked = resid.copy()
        if chosen:
            masked[chosen] = -np.inf
        best = int(np.argmax(masked))
        gain = float(masked[best])
        if gain <= chol.PIVOT_FLOOR * diag[best]:
            if allow_truncation and step > 0:
                C = C[:step]
                break
            raise DegenerateKernelError(
                f"only {step} independent columns available, {M} requested"
            )
        col = kernels.gram(kernel, X, X[best : best + 1])[:, 0]
        if step:
            c_new = (col - C[:step].T @ C[:step, best]) / math.sqrt(gain)
        else:
            c_new = col / math.sqrt(gain)
        C[step] = c_new
        resid -= c_new * c_new
        chosen.append(best)
    L = np.tril(C[:, chosen].T)
    return chosen, chol.LowerFactor(L, 0.0)


def greedy_det_init(
    kernel: kernels.KernelSpec, X, M: int, allow_truncation: bool = False
) -> np.ndarray:
    """Greedy max-determinant initialization, returned in selection order.

    Each step adds the index maximizing the determinant of the resulting
    principal submatrix (equivalently the largest conditional-variance gain),
    breaking ties toward the lowest index.  Total cost O(N M^2).  When the
    Gram matrix has numerical rank below M the default is to raise
    DegenerateKernelError; ``allow_truncation`` instead returns the shorter
    selection that exhausted the numerically independent columns.
    """
    chosen, _ = _greedy_selection(kernel, _as_2d(X), M, allow_truncation)
    return np.asarray(chosen)


@dataclass
class SamplerState:
    """Mutable state of the exchange chain: subset, factor and determinant."""

    indices: list[int]
    factor: chol.LowerFactor
    log_det: float
    rng: np.random.Generator
    step_count: int = 0
    complement: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))


def init_sampler(
    kernel: kernels.KernelSpec, X, M: int, seed: int, allow_truncation: bool = False
) -> SamplerState:
    """Greedy-initialized chain state over the rows of X."""
    X = _as_2d(X)
    chosen, f = _greedy_selection(kernel, X, M, allow_truncation)
    in_set = np.zeros(X.shape[0], dtype=bool)
    in_set[chosen] = True
    return SamplerState(
        indices=list(chosen),
        factor=f,
        log_det=chol.log_det(f),
        rng=_rng(seed),
        complement=np.flatnonzero(~in_set),
    )


def advance(
    state: SamplerState,
    kernel: kernels.KernelSpec,
    X,
    steps: int,
    refactor_every: int = REFACTOR_PERIOD,
    on_state=None,
) -> SamplerState:
    """Run `steps` transitions of the lazy exchange chain, mutating `state`.

    Each transition proposes swapping a uniformly chosen member i for a
    uniformly chosen outsider j and accepts with probability
    (1/2) min(1, det(K_T)/det(K_S)); a proposal whose extension is not
    positive definite has ratio 0 and is always rejected.
    """
    X = _as_2d(X)
    M = len(state.indices)
    n_out = state.complement.shape[0]
    rng = state.rng
    for _ in range(steps):
        pos_i = int(rng.integers(M))
        pos_j = int(rng.integers(n_out))
        j = int(state.complement[pos_j])
        ratio = 0.0
        try:
            if M > 1:
                f_minus = chol.remove_index(state.factor, pos_i)
                remaining = state.indices[:pos_i] + state.indices[pos_i + 1 :]
                k_cross = kernels.gram(kernel, X[remaining], X[j : j + 1])[:, 0]
            else:
                f_minus = chol.LowerFactor(np.zeros((0, 0)), state.factor.jitter_used)
                k_cross = np.zeros(0)
            f_T = chol.append_index(f_minus, k_cross, kernel.variance)
            log_det_T = chol.log_det(f_T)
            ratio = math.exp(min(log_det_T - state.log_det, 0.0))
        except NotPositiveDefiniteError:
            ratio = 0.0
        p_accept = 0.5 * min(1.0, ratio)
        if rng.random() < p_accept:
            i = state.indices.pop(pos_i)
            state.indices.append(j)
            state.complement[pos_j] = i
            state.factor = f_T
            state.log_det = log_det_T
        state.step_count += 1
        if refactor_every and state.step_count % refactor_every == 0:
            fresh = chol.factor(kernels.gram(kernel, X[state.indices]))
            fresh_log_det = chol.log_det(fresh)
            if abs(fresh_log_det - state.log_det) > DRIFT_TOL:
                raise NumericalInconsistencyError(
                    f"incremental log-det drifted by "
                    f"{abs(fresh_log_det - state.log_det):.3e}"
                )
            state.factor = fresh
            state.log_det = fresh_log_det
        if on_state is not None:
            on_state(state)
    return state


def kdpp_mcmc(
    kernel: kernels.KernelSpec,
    X,
    M: int,
    steps: int,
    seed: int,
    refactor_every: int = REFACTOR_PERIOD,
    allow_truncation: bool = False,
) -> np.ndarray:
    """Approximate k-DPP sample: greedy start, `steps` exchange transitions.

    Returns the sorted index set after the final step; deterministic for a
    fixed seed.  Use :func:`mixing_steps` for the budget that provably gets
    within a prescribed total-variation distance of the exact k-DPP.
    """
    X = _as_2d(X)
    if M >= X.shape[0]:
        raise MTooLargeError("exchange chain needs M < N")
    if steps < 0:
        raise MTooLargeError("step count must be nonnegative")
    state = init_sampler(kernel, X, M, seed, allow_truncation)
    advance(state, kernel, X, steps, refactor_every=refactor_every)
    return np.sort(np.asarray(state.indices))


def mixing_steps(N: int, M: int, epsilon: float) -> int:
    """Provable step budget: ceil(N M^2 log N + N M log(1/epsilon))."""
    if not 0.0 < epsilon < 1.0:
        raise InvalidEpsilonError(f"epsilon must lie in (0, 1), got {epsilon}")
    return math.ceil(N * M * M * math.log(N) + N * M * math.log(1.0 / epsilon))


def exact_kdpp_enumeration_matrix(K: np.ndarray, M: int) -> dict[tuple[int, ...], float]:
    """Exact subset probabilities P(S) proportional to det(K[S, S])."""
    K = np.asarray(K, dtype=float)
    N = K.shape[0]
    if not 1 <= M <= N:
        raise MTooLargeError(f"cannot choose {M} indices from {N}")
    if math.comb(N, M) > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"C({N},{M}) = {math.comb(N, M)} subsets exceed the enumeration limit"
        )
    table: dict[tuple[int, ...], float] = {}
    total = 0.0
    for subset in itertools.combinations(range(N), M):
        d = max(float(np.linalg.det(K[np.ix_(subset, subset)])), 0.0)
        table[subset] = d
        total += d
    if total <= 0.0:
        raise DegenerateKernelError("all size-M principal minors vanish")
    return {s: d / total for s, d in table.items()}


def exact_kdpp_enumeration(
    kernel: kernels.KernelSpec, X, M: int
) -> dict[tuple[int, ...], float]:
    """Exact k-DPP probability table over all C(N, M) subsets of the rows of X."""
    return exact_kdpp_enumeration_matrix(kernels.gram(kernel, _as_2d(X)), M)


def eigenvector_features(
    kernel: kernels.KernelSpec, X, M: int
) -> svgp.EigenvectorFeatures:
    """Top-M eigenpairs of the training Gram matrix as interdomain features."""
    X = _as_2d(X)
    if not 1 <= M <= X.shape[0]:
        raise MTooLargeError(f"cannot extract {M} eigenpairs from N={X.shape[0]}")
    K = kernels.gram(kernel, X)
    try:
        w, V = np.linalg.eigh(K)
    except np.linalg.LinAlgError as exc:
        raise EigenFailureError(str(exc)) from exc
    lam = w[::-1][:M].copy()
    W = V[:, ::-1][:, :M].copy()
    if lam[-1] <= 0:
        raise EigenFailureError(
            f"eigenvalue {M} of the Gram matrix is nonpositive ({lam[-1]:.3e})"
        )
    return svgp.EigenvectorFeatures(lam, W, X)


def eigenfunction_features(
    kernel: kernels.KernelSpec,
    density: kernels.DensitySpec,
    M: int,
    quadrature_size: int = 2048,
) -> svgp.EigenfunctionFeatures:
    """Operator eigenfunction features under the assumed input density.

    Eigenvalues use the closed form when one exists (1-D squared exponential
    kernel with Gaussian inputs); eigenfunctions always come from the numeric
    spectral oracle.
    """
    spectrum = kernels.nystrom_spectrum(kernel, density, M, quadrature_size)
    lam = spectrum.eigenvalues
    if (
        kernel.family == kernels.SQUARED_EXPONENTIAL
        and isinstance(density, kernels.GaussianDensity)
        and kernel.dim == 1
    ):
        lam = kernels.se_gaussian_eigenvalues(
            kernel.variance,
            float(kernel.lengthscales[0]),
            float(density.std[0]),
            M,
        )
    if np.any(lam <= 0):
        raise QuadratureTooCoarseError(
            "operator rank below the requested number of features"
        )
    return svgp.EigenfunctionFeatures(lam, spectrum.eigenfunctions)


def selection_csv_line(run_id: str, method: str, seed: int, indices) -> str:
    """Serialize a selected index set as `run-id,method,seed,sorted indices`."""
    idx = " ".join(str(i) for i in sorted(int(i) for i in indices))
    return f"{run_id},{method},{seed},{idx}"
