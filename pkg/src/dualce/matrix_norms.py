"""Dual-valued matrix norms, trace, and determinant.

Unitarily invariant kinds (Ky Fan p-k, Ky Fan k, spectral, Schatten p,
nuclear, Frobenius) take the closed forms built from the SVD of the standard
part, with repeated singular values handled through the same block grouping
as the dual SVD so the two modules agree on multiplicity splits.  Operator
1- and infinity-norms are lexicographic maxima of dual column / row 1-norms.

Every kind returns ||A_i|| eps (same real norm of the infinitesimal part)
when A_s is exactly zero.  Inputs with m < n are transposed first for the
unitarily invariant kinds; operator norms keep their row/column meaning and
are never transposed.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import DualMatrix, DualScalar, DualVector, sym
from .svd import GROUP_TOL, RANK_TOL, group_singular_values
from .vector_norms import dual_vector_norm

ADJUGATE_COND_LIMIT = 1e8


class RankDeficiencyWarning(UserWarning):
    """A Ky Fan p-k norm was evaluated with sigma_k = 0 and 1 < p < inf.

    The closed form is applied with a vanishing block term; the general
    subdifferential construction only covers this regime for p = 1, so the
    value is the natural limit rather than a proved formula.
    """


def _inner(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.sum(x * y))


def _full_svd(a_s: np.ndarray):
    u, s, vt = np.linalg.svd(a_s, full_matrices=True)
    v = vt.T
    # Deterministic sign convention on the leading pairs, matching cdsvd.
    for j in range(len(s)):
        idx = int(np.argmax(np.abs(u[:, j])))
        if u[idx, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return u, s, v


def _real_kyfan_pk(a: np.ndarray, k: int, p: float) -> float:
    s = np.linalg.svd(a, compute_uv=False)
    top = s[:k]
    if math.isinf(p):
        return float(top[0]) if top.size else 0.0
    return float(np.sum(top**p) ** (1.0 / p))


def _split_at_k(s: np.ndarray, k: int, group_tol: float, rank_tol: float):
    """Block structure around the k-th singular value (1-based k).

    Returns (a, b, zero) where [a, b) is the block containing index k-1
    under the dual-SVD grouping and zero says whether sigma_k is below the
    rank threshold.
    """
    grouping = group_singular_values(s, group_tol)
    a, b = grouping.block_of(k - 1)
    zero = s[0] <= 0.0 or s[k - 1] <= rank_tol * s[0]
    return a, b, zero


def ky_fan_pk_norm(
    a: DualMatrix,
    k: int,
    p: float,
    group_tol: float = GROUP_TOL,
    rank_tol: float = RANK_TOL,
) -> DualScalar:
    """Dual-valued Ky Fan p-k norm, 1 < p < inf, 1 <= k <= min(m, n).

    The infinitesimal part is
    [<U1 Sigma1^(p-1) V1^T, A_i> + sigma_k^(p-1) sum_{l<=t} lambda_l(M)]
    divided by ||A_s||_{(k,p)}^(p-1), where U2/V2 span the singular subspace
    of the block containing sigma_k, M = sym(U2^T A_i V2), and t counts the
    block positions at or before k.
    """
    p = float(p)
    if not 1.0 < p < math.inf:
        raise ValueError(f"ky_fan_pk_norm requires 1 < p < inf, got {p}")
    m, n = a.shape
    if m < n:
        return ky_fan_pk_norm(a.T, k, p, group_tol=group_tol, rank_tol=rank_tol)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if not a.s.any():
        return DualScalar(0.0, _real_kyfan_pk(a.i, k, p))

    u, s, v = _full_svd(a.s)
    value = float(np.sum(s[:k] ** p) ** (1.0 / p))
    blk_a, blk_b, zero = _split_at_k(s, k, group_tol, rank_tol)

    if zero:
        warnings.warn(
            f"Ky Fan ({k},{p}) norm at sigma_{k} = 0: block term vanishes",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        r = int(np.count_nonzero(s > rank_tol * s[0]))
        ratios = (s[:r] / value) ** (p - 1.0)
        deriv = _inner(u[:, :r] * ratios[None, :] @ v[:, :r].T, a.i)
        return DualScalar(value, deriv)

    # Ratios (sigma / value) keep every power in [0, 1].
    ratios = (s[:blk_a] / value) ** (p - 1.0)
    head = _inner(u[:, :blk_a] * ratios[None, :] @ v[:, :blk_a].T, a.i)
    mm = sym(u[:, blk_a:blk_b].T @ a.i @ v[:, blk_a:blk_b])
    lam = np.sort(np.linalg.eigvalsh(mm))[::-1]
    t = k - blk_a
    deriv = head + (s[k - 1] / value) ** (p - 1.0) * float(np.sum(lam[:t]))
    return DualScalar(value, deriv)


def ky_fan_norm(
    a: DualMatrix,
    k: int,
    group_tol: float = GROUP_TOL,
    rank_tol: float = RANK_TOL,
) -> DualScalar:
    """Dual-valued Ky Fan k-norm (sum of the k largest singular values).

    With sigma_k > 0 the infinitesimal part is
    <U1 V1^T, A_i> + sum_{l<=t} lambda_l(sym(U2^T A_i V2)); at sigma_k = 0
    the block eigenvalues are replaced by the leading singular values of
    N = U(:, a+1:m)^T A_i V(:, a+1:n), which accounts for the rank of A_s
    growing in the direction A_i.
    """
    m, n = a.shape
    if m < n:
        return ky_fan_norm(a.T, k, group_tol=group_tol, rank_tol=rank_tol)
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    if not a.s.any():
        s_i = np.linalg.svd(a.i, compute_uv=False)
        return DualScalar(0.0, float(np.sum(s_i[:k])))

    u, s, v = _full_svd(a.s)
    value = float(np.sum(s[:k]))
    blk_a, blk_b, zero = _split_at_k(s, k, group_tol, rank_tol)
    t = k - blk_a
    head = _inner(u[:, :blk_a] @ v[:, :blk_a].T, a.i)

    if zero:
        nn = u[:, blk_a:].T @ a.i @ v[:, blk_a:]
        sing = np.linalg.svd(nn, compute_uv=False)
        return DualScalar(value, head + float(np.sum(sing[:t])))

    mm = sym(u[:, blk_a:blk_b].T @ a.i @ v[:, blk_a:blk_b])
    lam = np.sort(np.linalg.eigvalsh(mm))[::-1]
    return DualScalar(value, head + float(np.sum(lam[:t])))


def spectral_norm(
    a: DualMatrix, group_tol: float = GROUP_TOL, rank_tol: float = RANK_TOL
) -> DualScalar:
    """Dual-valued spectral norm: sigma_1 + lambda_max(sym(U_r1^T A_i V_r1)) eps."""
    m, n = a.shape
    if m < n:
        return spectral_norm(a.T, group_tol=group_tol, rank_tol=rank_tol)
    if not a.s.any():
        return DualScalar(0.0, float(np.linalg.norm(a.i, ord=2)))
    u, s, v = _full_svd(a.s)
    grouping = group_singular_values(s, group_tol)
    r1 = grouping.multiplicities[0]
    rr = sym(u[:, :r1].T @ a.i @ v[:, :r1])
    return DualScalar(float(s[0]), float(np.max(np.linalg.eigvalsh(rr))))


def schatten_norm(a: DualMatrix, p: float, rank_tol: float = RANK_TOL) -> DualScalar:
    """Dual-valued Schatten p-norm for 1 <= p < inf.

    For p > 1 the infinitesimal part is <U_r Sigma_r^(p-1) V_r^T, A_i>
    normalized by ||A_s||_{S_p}^(p-1), with the compact factors of A_s.
    p = 1 is the nuclear norm (which carries an extra complement term).
    """
    p = float(p)
    if not 1.0 <= p < math.inf:
        raise ValueError(f"schatten_norm requires 1 <= p < inf, got {p}")
    if p == 1.0:
        return nuclear_norm(a, rank_tol=rank_tol)
    m, n = a.shape
    if m < n:
        return schatten_norm(a.T, p, rank_tol=rank_tol)
    if not a.s.any():
        s_i = np.linalg.svd(a.i, compute_uv=False)
        return DualScalar(0.0, float(np.sum(s_i**p) ** (1.0 / p)))
    u, s, v = _full_svd(a.s)
    value = float(np.sum(s**p) ** (1.0 / p))
    r = int(np.count_nonzero(s > rank_tol * s[0]))
    ratios = (s[:r] / value) ** (p - 1.0)
    deriv = _inner(u[:, :r] * ratios[None, :] @ v[:, :r].T, a.i)
    return DualScalar(value, deriv)


def nuclear_norm(a: DualMatrix, rank_tol: float = RANK_TOL) -> DualScalar:
    """Dual-valued nuclear norm.

    The infinitesimal part <U_r V_r^T, A_i> + ||U_c^T A_i V_c||_* uses the
    orthogonal complements U_c, V_c of the compact factors from the full
    SVD; the complement term is how growth of rank in the direction A_i
    shows up.
    """
    m, n = a.shape
    if m < n:
        return nuclear_norm(a.T, rank_tol=rank_tol)
    if not a.s.any():
        s_i = np.linalg.svd(a.i, compute_uv=False)
        return DualScalar(0.0, float(np.sum(s_i)))
    u, s, v = _full_svd(a.s)
    value = float(np.sum(s))
    r = int(np.count_nonzero(s > rank_tol * s[0]))
    deriv = _inner(u[:, :r] @ v[:, :r].T, a.i)
    if r < min(m, n) or m > r:
        comp = u[:, r:].T @ a.i @ v[:, r:]
        if comp.size:
            deriv += float(np.sum(np.linalg.svd(comp, compute_uv=False)))
    return DualScalar(value, deriv)


def frobenius_norm(a: DualMatrix) -> DualScalar:
    """Dual-valued Frobenius norm: ||A_s||_F + <A_s, A_i> / ||A_s||_F eps."""
    if not a.s.any():
        return DualScalar(0.0, float(np.linalg.norm(a.i)))
    value = float(np.linalg.norm(a.s))
    return DualScalar(value, _inner(a.s, a.i) / value)


def operator_one_norm(a: DualMatrix) -> DualScalar:
    """Max dual 1-norm over columns (lexicographic max of dual numbers)."""
    best = None
    for j in range(a.shape[1]):
        cand = dual_vector_norm(DualVector(a.s[:, j], a.i[:, j]), 1.0)
        if best is None or cand > best:
            best = cand
    if best is None:
        raise ValueError("operator norm of an empty matrix")
    return best


def operator_inf_norm(a: DualMatrix) -> DualScalar:
    """Max dual 1-norm over rows (lexicographic max of dual numbers)."""
    return operator_one_norm(a.T)


def dual_trace(a: DualMatrix) -> DualScalar:
    """tr(A_s) + tr(A_i) eps for square dual matrices."""
    m, n = a.shape
    if m != n:
        raise ValueError("trace requires a square matrix")
    return DualScalar(float(np.trace(a.s)), float(np.trace(a.i)))


def _adjugate(a_s: np.ndarray) -> np.ndarray:
    n = a_s.shape[0]
    if n == 1:
        return np.ones((1, 1))
    cond = np.linalg.cond(a_s)
    if np.isfinite(cond) and cond <= ADJUGATE_COND_LIMIT:
        return np.linalg.det(a_s) * np.linalg.inv(a_s)
    # Singular or ill-conditioned: fall back to cofactors.  adj is still
    # well-defined there, unlike det * inv.
    adj = np.empty((n, n))
    rows = np.arange(n)
    cols = np.arange(n)
    for j in range(n):
        for k in range(n):
            minor = a_s[np.ix_(rows != k, cols != j)]
            adj[j, k] = (-1.0) ** (j + k) * np.linalg.det(minor)
    return adj


def dual_det(a: DualMatrix) -> DualScalar:
    """Dual determinant det(A_s) + <adj(A_s)^T, A_i> eps."""
    m, n = a.shape
    if m != n:
        raise ValueError("determinant requires a square matrix")
    if n == 0:
        return DualScalar(1.0, 0.0)
    det_s = float(np.linalg.det(a.s))
    adj = _adjugate(a.s)
    return DualScalar(det_s, _inner(adj.T, a.i))


@dataclass(frozen=True)
class OperatorNormCheck:
    """Sampling report for the induced-norm inequality of an operator norm."""

    norm: DualScalar
    trials: int
    violations: int
    witness_attains: bool


def operator_norm_ratio_check(
    a: DualMatrix,
    alpha: float,
    beta: float,
    trials: int = 100,
    seed: int = 0,
) -> OperatorNormCheck:
    """Check ||A x||_alpha <= ||A||_(alpha,beta) ||x||_beta on random duals.

    Only the implemented operator norms are accepted: (alpha, beta) = (1, 1)
    for the operator 1-norm and (inf, inf) for the operator infinity-norm.
    Also builds the attaining vector (standard-part maximizer, x_i = 0) and
    reports whether it achieves equality in both parts.
    """
    alpha, beta = float(alpha), float(beta)
    if (alpha, beta) == (1.0, 1.0):
        norm = operator_one_norm(a)
        work = a
    elif (alpha, beta) == (math.inf, math.inf):
        norm = operator_inf_norm(a)
        work = a.T  # rows of a are columns of a.T
    else:
        raise ValueError("only (1, 1) and (inf, inf) operator norms are implemented")

    rng = np.random.default_rng(seed)
    n = a.shape[1]
    violations = 0
    for _ in range(trials):
        x = DualVector(rng.standard_normal(n), rng.standard_normal(n))
        lhs = dual_vector_norm(a @ x, alpha)
        rhs = norm * dual_vector_norm(x, beta)
        # Tolerate roundoff at the scale of the bound itself.
        slack = 1e-10 * max(1.0, abs(rhs.s), abs(rhs.i))
        if lhs.s > rhs.s + slack or (
            abs(lhs.s - rhs.s) <= slack and lhs.i > rhs.i + slack
        ):
            violations += 1

    # Attaining vector.  For the column norm it is the basis vector of the
    # lexicographically maximal column; for the row norm, the sign pattern
    # of the maximal row (zeros filled from A_i so the infinitesimal part is
    # picked up too).
    cols = [
        dual_vector_norm(DualVector(work.s[:, j], work.i[:, j]), 1.0)
        for j in range(work.shape[1])
    ]
    j_star = max(range(len(cols)), key=lambda j: (cols[j].s, cols[j].i))
    if alpha == 1.0:
        x_s = np.zeros(n)
        x_s[j_star] = 1.0
    else:
        row_s = a.s[j_star, :]
        row_i = a.i[j_star, :]
        x_s = np.sign(row_s)
        fill = x_s == 0.0
        x_s[fill] = np.where(np.sign(row_i[fill]) == 0.0, 1.0, np.sign(row_i[fill]))
    witness = DualVector(x_s, np.zeros(n))
    attained = dual_vector_norm(a @ witness, alpha)
    bound = norm * dual_vector_norm(witness, beta)
    tol = 1e-10 * max(1.0, abs(bound.s), abs(bound.i))
    witness_attains = (
        abs(attained.s - bound.s) <= tol and abs(attained.i - bound.i) <= tol
    )
    return OperatorNormCheck(norm, trials, violations, witness_attains)

