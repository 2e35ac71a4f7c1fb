"""Compact dual singular value decomposition (CDSVD).

A dual matrix A = A_s + A_i eps is factored as U Sigma V^T with dual factors
built by first-order perturbation of the standard-part SVD.  Repeated
singular values are handled in blocks: within a block of equal sigma the
infinitesimal singular values are the descending eigenvalues of
sym(U_g^T A_i V_g), and the block's singular vector basis is rotated into
that eigenbasis.  Off-block first-order coupling fixes the rest of U_i, V_i.

Whether an exact CDSVD exists is reported through the residual (the norm of
the part of A_i that no first-order factor choice can reproduce), never as
an exception.

Sensitivity note: two singular values whose gap is slightly above
group_tol * sigma_1 are treated as distinct, and the coupling denominators
sigma_k**2 - sigma_j**2 then produce large rotations.  There is no canonical
normalization for that regime; widen group_tol to treat such pairs as one
block instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DualMatrix, DualVector, sym

RANK_TOL = 1e-12
GROUP_TOL = 1e-8


@dataclass(frozen=True)
class BlockGrouping:
    """Partition of 1..r into blocks of equal (within tolerance) sigma.

    boundaries are half-open index ranges (start, stop) into the singular
    value vector; distinct_values are the per-block representative values in
    strictly decreasing order; multiplicities are the block sizes.
    """

    boundaries: tuple[tuple[int, int], ...]
    distinct_values: tuple[float, ...]
    multiplicities: tuple[int, ...]
    group_tol: float

    def block_of(self, index: int) -> tuple[int, int]:
        """The (start, stop) block containing a 0-based singular value index."""
        for a, b in self.boundaries:
            if a <= index < b:
                return (a, b)
        raise IndexError(f"index {index} outside grouped range")


@dataclass(frozen=True)
class CdsvdResult:
    U: DualMatrix
    S: DualVector
    V: DualMatrix
    grouping: BlockGrouping
    residual: float


def group_singular_values(s: np.ndarray, group_tol: float) -> BlockGrouping:
    """Chain consecutive singular values with gap <= group_tol * s[0]."""
    r = len(s)
    if r == 0:
        return BlockGrouping((), (), (), group_tol)
    thresh = group_tol * s[0]
    boundaries = []
    start = 0
    for j in range(1, r):
        if s[j - 1] - s[j] > thresh:
            boundaries.append((start, j))
            start = j
    boundaries.append((start, r))
    values = tuple(float(np.mean(s[a:b])) for a, b in boundaries)
    mults = tuple(b - a for a, b in boundaries)
    return BlockGrouping(tuple(boundaries), values, mults, group_tol)


def _signfix_columns(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Largest-magnitude entry of each left vector made positive, flipping the
    # paired right vector too, so outputs are reproducible across runs.
    u = u.copy()
    v = v.copy()
    for j in range(u.shape[1]):
        idx = int(np.argmax(np.abs(u[:, j])))
        if u[idx, j] < 0:
            u[:, j] = -u[:, j]
            v[:, j] = -v[:, j]
    return u, v


def cdsvd(
    a: DualMatrix,
    group_tol: float = GROUP_TOL,
    rank_tol: float = RANK_TOL,
) -> CdsvdResult:
    """Compact dual SVD of a dual matrix.

    Steps: thin SVD of A_s truncated at rank_tol * sigma_1; block grouping
    at group_tol * sigma_1; per-block rotation into the eigenbasis of
    sym(U_g^T A_i V_g) with descending eigenvalues as the block's
    infinitesimal singular values; off-block entries of the rotation
    generators from the first-order coupling equations; complement
    components of A_i folded into U_i, V_i where the compact spans allow.
    A zero standard part yields empty factors and residual ||A_i||_F.
    """
    m, n = a.shape
    if m < n:
        res = cdsvd(a.T, group_tol=group_tol, rank_tol=rank_tol)
        return CdsvdResult(res.V, res.S, res.U, res.grouping, res.residual)

    u_full, s_full, vt_full = np.linalg.svd(a.s, full_matrices=False)
    if s_full.size == 0 or s_full[0] <= 0.0:
        r = 0
    else:
        r = int(np.count_nonzero(s_full > rank_tol * s_full[0]))
    u = u_full[:, :r]
    v = vt_full[:r].T
    s = s_full[:r].copy()
    grouping = group_singular_values(s, group_tol)

    if r == 0:
        empty_u = DualMatrix(np.zeros((m, 0)), np.zeros((m, 0)))
        empty_v = DualMatrix(np.zeros((n, 0)), np.zeros((n, 0)))
        empty_s = DualVector(np.zeros(0), np.zeros(0))
        return CdsvdResult(
            empty_u, empty_s, empty_v, grouping, float(np.linalg.norm(a.i))
        )

    # Rotate each block into the eigenbasis of its symmetrized projection of
    # A_i; the eigenvalues, descending, are the block's S.i entries.
    s_i = np.zeros(r)
    for (blk_a, blk_b) in grouping.boundaries:
        ug = u[:, blk_a:blk_b]
        vg = v[:, blk_a:blk_b]
        mg = sym(ug.T @ a.i @ vg)
        w, q = np.linalg.eigh(mg)
        w, q = w[::-1], q[:, ::-1]
        u[:, blk_a:blk_b] = ug @ q
        v[:, blk_a:blk_b] = vg @ q
        s_i[blk_a:blk_b] = w

    u, v = _signfix_columns(u, v)

    # First-order coupling.  With B = U^T A_i V the generators satisfy
    # B = Omega_U Sigma + Sigma_i - Sigma Omega_V on the compact block.
    b = u.T @ a.i @ v
    omega_u = np.zeros((r, r))
    omega_v = np.zeros((r, r))
    for gi, (ga, gb) in enumerate(grouping.boundaries):
        for gj, (ha, hb) in enumerate(grouping.boundaries):
            if gi == gj:
                blk = b[ga:gb, ha:hb]
                half_skew = 0.5 * (blk - blk.T) / (2.0 * grouping.distinct_values[gi])
                omega_u[ga:gb, ha:hb] = half_skew
                omega_v[ga:gb, ha:hb] = -half_skew
            else:
                sj = s[ga:gb][:, None]
                sk = s[ha:hb][None, :]
                bjk = b[ga:gb, ha:hb]
                bkj = b[ha:hb, ga:gb].T
                denom = sk**2 - sj**2
                omega_u[ga:gb, ha:hb] = (sk * bjk + sj * bkj) / denom
                omega_v[ga:gb, ha:hb] = (sj * bjk + sk * bkj) / denom

    # Components of A_i orthogonal to the compact column spans are folded in
    # where a first-order factor can carry them; what remains is the
    # genuinely unreconstructable corner.
    u_i = u @ omega_u + (a.i @ v - u @ b) / s[None, :]
    v_i = v @ omega_v + (a.i.T @ u - v @ b.T) / s[None, :]

    recon = u_i @ (s[:, None] * v.T) + u @ np.diag(s_i) @ v.T + u @ (s[:, None] * v_i.T)
    residual = float(np.linalg.norm(a.i - recon))

    return CdsvdResult(
        DualMatrix(u, u_i),
        DualVector(s, s_i),
        DualMatrix(v, v_i),
        grouping,
        residual,
    )


def dual_singular_values(
    a: DualMatrix, k: int, group_tol: float = GROUP_TOL
) -> DualVector:
    """First k dual singular values of a, 1 <= k <= rank(A_s)."""
    res = cdsvd(a, group_tol=group_tol)
    r = len(res.S)
    if not 1 <= k <= r:
        raise ValueError(f"k must be in 1..{r}, got {k}")
    return DualVector(res.S.s[:k], res.S.i[:k])
