"""End-to-end causal-emergence analysis over a dual transition matrix.

Stages: generate the dumbbell benchmark, simulate a trajectory, fit the dual
transition matrix, sweep the dual Ky Fan norms over (k, p), detect the
optimal class count from the infinitesimal parts, and coarse-grain by
clustering singular-vector projections of the columns.  Every stage is a
pure function of the configuration, so later stages re-derive earlier ones
deterministically from the seed instead of reading intermediate files.

All artifacts are written with stable ordering and 17-significant-digit
floats; two runs with the same configuration produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .core import DualMatrix
from .fitting import FitOptions, FitReport, build_snapshots, fit_dtpm
from .markov import (
    DumbbellConfig,
    STOCHASTIC_TOL,
    delta_gamma,
    dumbbell_tpm,
    effective_information,
    matrix_to_dict,
    simulate,
    validate_tpm,
    write_matrix_csv,
)
from .matrix_norms import ky_fan_norm, ky_fan_pk_norm
from .svd import GROUP_TOL, RANK_TOL, cdsvd

WITH_INFINITESIMAL = "with_infinitesimal"
WITHOUT_INFINITESIMAL = "without_infinitesimal"


@dataclass(frozen=True)
class SweepRecord:
    k: int
    p: float
    standard: float
    infinitesimal: float
    delta_gamma: float


@dataclass(frozen=True)
class SweepTable:
    """Complete (k, p) grid of dual Ky Fan norm evaluations."""

    records: tuple
    p_list: tuple
    rank: int
    provenance: dict = field(default_factory=dict)

    def column(self, p: float):
        """Records for one p, ordered by k."""
        return [r for r in self.records if r.p == p]


def norm_sweep(p: DualMatrix, p_list, group_tol: float = GROUP_TOL) -> SweepTable:
    """Dual Ky Fan (k, p) norms for k = 1..rank(P_s) and every p in p_list.

    p = 1 uses the Ky Fan k-norm closed form (it also covers sigma_k = 0);
    1 < p < 2 uses the Ky Fan p-k form.  delta_gamma of the standard part
    rides along for the vague-emergence report.
    """
    p_list = tuple(float(q) for q in p_list)
    if not p_list:
        raise ValueError("p_list must be nonempty")
    for q in p_list:
        if not 1.0 <= q < 2.0:
            raise ValueError(f"sweep p values must lie in [1, 2), got {q}")
    sigma = np.linalg.svd(p.s, compute_uv=False)
    rank = int(np.count_nonzero(sigma > RANK_TOL * sigma[0])) if sigma[0] > 0 else 0
    if rank == 0:
        raise ValueError("norm sweep needs a nonzero standard part")
    records = []
    for q in p_list:
        for k in range(1, rank + 1):
            if q == 1.0:
                val = ky_fan_norm(p, k, group_tol=group_tol)
            else:
                val = ky_fan_pk_norm(p, k, q, group_tol=group_tol)
            records.append(
                SweepRecord(k, q, val.s, val.i, delta_gamma(p.s, k, q))
            )
    return SweepTable(tuple(records), p_list, rank)


@dataclass(frozen=True)
class DetectionResult:
    k_star: int
    per_p: tuple  # (p, argmax_k, degenerate) triples
    unanimous: bool

    def to_dict(self) -> dict:
        return {
            "k_star": self.k_star,
            "per_p": [
                {"p": p, "k": k, "degenerate": flag} for p, k, flag in self.per_p
            ],
            "unanimous": self.unanimous,
        }


def detect_k(table: SweepTable) -> DetectionResult:
    """Argmax over k of the infinitesimal norm part, per p, then the mode.

    Ties go to the smallest k.  A p whose infinitesimal column is constant
    (a permutation input gives all zeros) is flagged degenerate; its argmax
    is still the tie-broken smallest k.  k_star is the most common per-p
    argmax, smallest k winning equal counts.
    """
    per_p = []
    for q in table.p_list:
        col = table.column(q)
        values = [r.infinitesimal for r in col]
        best = max(values)
        k_best = min(r.k for r in col if r.infinitesimal == best)
        degenerate = best == min(values)
        per_p.append((q, k_best, degenerate))
    counts = Counter(k for _, k, _ in per_p)
    top = max(counts.values())
    k_star = min(k for k, c in counts.items() if c == top)
    unanimous = len(counts) == 1
    return DetectionResult(k_star, tuple(per_p), unanimous)


class EmptyClusterError(RuntimeError):
    """Lloyd iteration produced a cluster with no members."""


def kmeans(points, k: int, seed: int, max_iter: int = 300) -> np.ndarray:
    """k-means++ seeding plus Lloyd iterations to an assignment fixpoint.

    Deterministic for a given (points, k, seed).  Raises EmptyClusterError
    if an update empties a cluster; callers reseed and retry.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-D array (one row per point)")
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in 1..{n}, got {k}")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, pts.shape[1]))
    centers[0] = pts[rng.integers(n)]
    d2 = np.sum((pts - centers[0]) ** 2, axis=1)
    for c in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[c] = pts[idx]
        d2 = np.minimum(d2, np.sum((pts - centers[c]) ** 2, axis=1))

    labels = np.full(n, -1)
    for _ in range(max_iter):
        dist = np.sum((pts[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(dist, axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            members = pts[labels == c]
            if members.shape[0] == 0:
                raise EmptyClusterError(f"cluster {c} lost all members")
            centers[c] = members.mean(axis=0)
    return labels


@dataclass(frozen=True)
class CoarseGraining:
    """Hard assignment of micro states to k macro states."""

    phi: np.ndarray  # n x k, one-hot rows
    upsilon: np.ndarray  # k x k reduced TPM
    labels: np.ndarray
    method: str
    k: int
    kmeans_seed: int

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "k": self.k,
            "kmeans_seed": self.kmeans_seed,
            "labels": self.labels.tolist(),
            "upsilon": matrix_to_dict(self.upsilon),
        }


def coarse_grain(
    p: DualMatrix,
    k: int,
    method: str = WITH_INFINITESIMAL,
    seed: int = 0,
    max_iter: int = 300,
    retries: int = 5,
    group_tol: float = GROUP_TOL,
) -> CoarseGraining:
    """Cluster the columns of the singular-projection matrix into k classes.

    With the infinitesimal method the clustered matrix stacks
    U_s(:,1:k)^T P_s over U_s(:,1:k)^T P_i + U_i(:,1:k)^T P_s; without it,
    the same top block over zeros.  The zero padding keeps the two methods
    seed-for-seed identical whenever P_i = O.  The reduced matrix is
    Phi^T P_s Phi with columns renormalized, which is exactly stochastic
    because column sums equal the (positive) cluster sizes.
    """
    if method not in (WITH_INFINITESIMAL, WITHOUT_INFINITESIMAL):
        raise ValueError(f"unknown method {method!r}")
    n = p.shape[0]
    result = cdsvd(p, group_tol=group_tol)
    r = len(result.S)
    if not 1 <= k <= r:
        raise ValueError(f"k must be in 1..rank={r}, got {k}")
    u_s = result.U.s[:, :k]
    u_i = result.U.i[:, :k]
    top = u_s.T @ p.s
    if method == WITH_INFINITESIMAL:
        bottom = u_s.T @ p.i + u_i.T @ p.s
    else:
        bottom = np.zeros_like(top)
    q = np.vstack([top, bottom])

    labels = None
    seed_used = seed
    last_err = None
    for attempt in range(retries + 1):
        seed_used = seed + attempt
        try:
            labels = kmeans(q.T, k, seed_used, max_iter=max_iter)
            break
        except EmptyClusterError as err:
            last_err = err
    if labels is None:
        raise RuntimeError(
            f"k-means produced an empty cluster in {retries + 1} attempts"
        ) from last_err

    phi = np.zeros((n, k))
    phi[np.arange(n), labels] = 1.0
    raw = phi.T @ p.s @ phi
    upsilon = raw / raw.sum(axis=0, keepdims=True)
    validate_tpm(upsilon)
    return CoarseGraining(phi, upsilon, labels, method, k, seed_used)


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved settings for a full analysis run.

    The master seed derives independent child seeds for topology, the
    initial state, and clustering, so stages never share random streams.
    """

    far_weight: int = 25
    near_weight: int = 15
    bar: int = 5
    coupling_density: float = 0.1
    coupling_scale: float = 0.05
    t: int = 500
    p_list: tuple = (1.3, 1.6, 1.9)
    group_tol: float = GROUP_TOL
    seed: int = 0
    fit_tol: float = 1e-10
    fit_max_iter: int = 20000
    zero_threshold: float = 1e-13
    kmeans_max_iter: int = 300
    kmeans_retries: int = 5

    def child_seeds(self) -> dict:
        ss = np.random.SeedSequence(self.seed)
        topo, x1, km = (int(c.generate_state(1)[0]) for c in ss.spawn(3))
        return {"topology": topo, "x1": x1, "kmeans": km}

    def dumbbell(self) -> DumbbellConfig:
        return DumbbellConfig(
            far_weight=self.far_weight,
            near_weight=self.near_weight,
            bar=self.bar,
            coupling_density=self.coupling_density,
            coupling_scale=self.coupling_scale,
            seed=self.child_seeds()["topology"],
        )

    def fit_options(self) -> FitOptions:
        return FitOptions(
            tol=self.fit_tol,
            max_iter=self.fit_max_iter,
            zero_threshold=self.zero_threshold,
        )

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["p_list"] = list(self.p_list)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "p_list" in d:
            d = dict(d)
            d["p_list"] = tuple(float(q) for q in d["p_list"])
        return cls(**d)


@dataclass(frozen=True)
class PipelineResult:
    config: PipelineConfig
    m: np.ndarray
    p: DualMatrix
    report: FitReport
    sweep: SweepTable
    detection: DetectionResult
    coarse: dict  # method -> CoarseGraining
    ei_micro: float
    ei_macro: dict  # method -> float


def random_initial_state(n: int, seed: int) -> np.ndarray:
    """Random probability vector: uniform draws, normalized."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=n)
    return x / x.sum()


class StageError(RuntimeError):
    """A pipeline stage failed; the message names the stage."""


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except Exception as err:
        raise StageError(f"stage '{name}' failed: {err}") from err


def analyze(cfg: PipelineConfig) -> PipelineResult:
    """Run every stage in memory and return the assembled result."""
    seeds = cfg.child_seeds()
    with _stage("generate"):
        m = dumbbell_tpm(cfg.dumbbell())
    with _stage("simulate"):
        x1 = random_initial_state(m.shape[0], seeds["x1"])
        traj = simulate(m, x1, cfg.t)
    with _stage("fit"):
        pair = build_snapshots(traj)
        report = fit_dtpm(pair, cfg.fit_options())
    with _stage("sweep"):
        sweep = norm_sweep(report.p, cfg.p_list, group_tol=cfg.group_tol)
    with _stage("detect"):
        detection = detect_k(sweep)
    coarse = {}
    ei_macro = {}
    with _stage("coarse-grain"):
        for method in (WITH_INFINITESIMAL, WITHOUT_INFINITESIMAL):
            cg = coarse_grain(
                report.p,
                detection.k_star,
                method=method,
                seed=seeds["kmeans"],
                max_iter=cfg.kmeans_max_iter,
                retries=cfg.kmeans_retries,
                group_tol=cfg.group_tol,
            )
            coarse[method] = cg
            ei_macro[method] = effective_information(cg.upsilon)
        ei_micro = effective_information(report.p.s)
    return PipelineResult(
        cfg, m, report.p, report, sweep, detection, coarse, ei_micro, ei_macro
    )


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_sweep_csv(path: Path, table: SweepTable) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("k,p,standard,infinitesimal,delta_gamma\n")
        for r in table.records:
            fh.write(
                "%d,%.17g,%.17g,%.17g,%.17g\n"
                % (r.k, r.p, r.standard, r.infinitesimal, r.delta_gamma)
            )


def _write_matrix(out: Path, name: str, matrix: np.ndarray, fmt: str) -> Path:
    if fmt == "csv":
        path = out / f"{name}.csv"
        write_matrix_csv(path, matrix)
    else:
        path = out / f"{name}.json"
        _write_json(path, matrix_to_dict(matrix))
    return path


def manifest_payload(result: PipelineResult) -> dict:
    """Everything needed to reproduce the run; deliberately no timestamps."""
    cfg = result.config
    return {
        "config": cfg.to_dict(),
        "child_seeds": cfg.child_seeds(),
        "tolerances": {
            "rank_tol": RANK_TOL,
            "group_tol": cfg.group_tol,
            "stochastic_tol": STOCHASTIC_TOL,
            "zero_threshold": cfg.zero_threshold,
            "fit_tol": cfg.fit_tol,
        },
        "versions": {
            "package": __version__,
            "numpy": np.__version__,
            "python": "%d.%d.%d" % sys.version_info[:3],
        },
        "fit": result.report.to_dict(),
        "ei": {
            "micro": result.ei_micro,
            "macro": dict(sorted(result.ei_macro.items())),
        },
    }


def run_pipeline(cfg: PipelineConfig, out_dir, fmt: str = "csv") -> dict:
    """Run all stages and write the artifact set into out_dir.

    Files: the generated matrix, fitted standard and infinitesimal parts,
    sweep CSV, detection JSON, coarse-graining JSON, fit report JSON, and
    the manifest.  Returns the manifest payload.
    """
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result = analyze(cfg)

    _write_matrix(out, "generator", result.m, fmt)
    _write_matrix(out, "p_standard", result.p.s, fmt)
    _write_matrix(out, "p_infinitesimal", result.p.i, fmt)
    write_sweep_csv(out / "sweep.csv", result.sweep)
    _write_json(out / "detection.json", result.detection.to_dict())
    coarse_payload = {
        method: {
            **cg.to_dict(),
            "ei_macro": result.ei_macro[method],
            "ei_micro": result.ei_micro,
            "emergent": bool(result.ei_macro[method] > result.ei_micro),
        }
        for method, cg in sorted(result.coarse.items())
    }
    _write_json(out / "coarse.json", coarse_payload)
    _write_json(out / "fit.json", result.report.to_dict())
    manifest = manifest_payload(result)
    _write_json(out / "manifest.json", manifest)
    return manifest
