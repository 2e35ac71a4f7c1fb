"""Shared generators and comparison helpers for the test suite."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dualce import DualMatrix, DualScalar, DualVector

settings.register_profile(
    "suite",
    derandomize=True,
    max_examples=50,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def assert_dual_close(value, s, i, tol_s=1e-10, tol_i=1e-8):
    __tracebackinfo__ = False
    assert abs(value.s - s) <= tol_s, f"standard part {value.s} != {s}"
    assert abs(value.i - i) <= tol_i, f"infinitesimal part {value.i} != {i}"


def random_dual_vector(rng, n, zero_prob=0.0):
    s = rng.standard_normal(n)
    if zero_prob:
        s[rng.random(n) < zero_prob] = 0.0
    return DualVector(s, rng.standard_normal(n))


def random_dual_matrix(rng, m, n, min_gap=0.0):
    """Random dense dual matrix; optionally resample until the standard
    part's singular values are pairwise separated by min_gap (keeps
    finite-difference oracles away from unintended near-crossings)."""
    while True:
        a = DualMatrix(rng.standard_normal((m, n)), rng.standard_normal((m, n)))
        if not min_gap:
            return a
        s = np.linalg.svd(a.s, compute_uv=False)
        if s[-1] > min_gap and np.all(np.diff(-s) > min_gap):
            return a


def matrix_with_sigmas(rng, m, n, sigmas):
    """Dual matrix whose standard part has the prescribed singular values."""
    sigmas = np.asarray(sigmas, dtype=float)
    r = len(sigmas)
    u, _ = np.linalg.qr(rng.standard_normal((m, r)))
    v, _ = np.linalg.qr(rng.standard_normal((n, r)))
    s_part = u @ np.diag(sigmas) @ v.T
    return DualMatrix(s_part, rng.standard_normal((m, n)))


def random_tpm(rng, n):
    m = rng.uniform(0.1, 1.0, size=(n, n))
    return m / m.sum(axis=0, keepdims=True)


def random_dtpm(rng, n):
    """Dense random dual TPM: full support, so the sign mask is empty and
    any column-sum-zero infinitesimal part is admissible."""
    p_i = rng.standard_normal((n, n))
    p_i -= p_i.mean(axis=0, keepdims=True)
    return DualMatrix(random_tpm(rng, n), p_i)


def random_permutation_matrix(rng, n):
    perm = rng.permutation(n)
    m = np.zeros((n, n))
    m[perm, np.arange(n)] = 1.0
    return m


def fd_check(closed, estimate, tol=None):
    """Compare a closed-form infinitesimal part against an FdEstimate."""
    __tracebackinfo__ = False
    if tol is None:
        tol = max(1e-4, 1e-3 * abs(closed.i))
    gap = abs(closed.i - estimate.value)
    assert gap <= tol, (
        f"closed form {closed.i} vs finite difference {estimate.value} "
        f"(gap {gap:.3e} > {tol:.3e})"
    )


@pytest.fixture(scope="session")
def tiny_config():
    from dualce import PipelineConfig

    return PipelineConfig(far_weight=2, near_weight=2, bar=1, t=50, seed=7)
