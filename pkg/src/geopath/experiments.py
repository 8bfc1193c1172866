"""Experiment orchestration: coupled convergence runs, the moment
diagnostic, and the self-check suite.

The convergence experiment estimates both sides of the limit theorem with a
common Brownian driver per sample: the finite-n side evaluates the test
function at the coarse developed endpoint weighted by the piecewise-geodesic
density, the limit side evaluates it at the fine developed endpoint weighted
by the scalar-curvature exponential and the Fredholm factor.  Pairing makes
the per-sample differences low-variance; accumulation uses exact summation
in a fixed order so reports are byte-reproducible.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .development import guard_epsilon, sample_brownian
from .geometry import ManifoldSpec
from .jacobi import phi_envelope, psi
from .wiener import limit_density_constant

CURVATURE_LIMIT_NUM = 3.0
CURVATURE_LIMIT_DEN = 17.0


class ConfigError(ValueError):
    """Configuration violates a hard precondition."""


@dataclass
class ExperimentConfig:
    manifold: ManifoldSpec
    n_list: list[int] = field(default_factory=lambda: [4, 8, 16, 32])
    n_fine: int = 256
    samples: int = 1000
    seed: int = 0
    test_function: str = "endpoint_cos_dist"
    p: float = 1.05
    fredholm_nodes: int = 64
    chunk: int = 4096
    develop_substeps: int = 16
    jacobi_method: str = "spectral"
    jacobi_quad_nodes: int = 8
    jacobi_substeps: int = 16

    def validate(self, convergence: bool = True):
        for n in self.n_list:
            if self.n_fine % n != 0:
                raise ConfigError(f"n = {n} does not divide n_fine = {self.n_fine}")
        if self.test_function not in TEST_FUNCTIONS:
            raise ConfigError(f"unknown test function {self.test_function!r}")
        if convergence:
            limit = CURVATURE_LIMIT_NUM / (CURVATURE_LIMIT_DEN * self.manifold.dim)
            if not (0 <= self.manifold.kappa < limit):
                raise ConfigError(
                    f"curvature {self.manifold.kappa:.4f} outside [0, {limit:.4f})"
                )

    @classmethod
    def from_flat_dict(cls, cfg: dict) -> "ExperimentConfig":
        m = ManifoldSpec(
            kind=cfg.get("manifold.kind", "sphere"),
            dim=int(cfg.get("manifold.dim", 2)),
            radius=float(cfg.get("manifold.radius", 6.0)),
        )
        n_list = cfg.get("experiment.n_list", [4, 8, 16, 32])
        if isinstance(n_list, str):
            n_list = [int(x) for x in n_list.split(",")]
        return cls(
            manifold=m,
            n_list=[int(x) for x in n_list],
            n_fine=int(cfg.get("sampling.n_fine", 256)),
            samples=int(cfg.get("sampling.samples", 1000)),
            seed=int(cfg.get("sampling.seed", 0)),
            test_function=str(cfg.get("experiment.test_function", "endpoint_cos_dist")),
            p=float(cfg.get("experiment.p", 1.05)),
            fredholm_nodes=int(cfg.get("experiment.fredholm_nodes", 64)),
            develop_substeps=int(cfg.get("develop.substeps", 16)),
            jacobi_method=str(cfg.get("jacobi.method", "spectral")),
            jacobi_quad_nodes=int(cfg.get("jacobi.quad_nodes", 8)),
            jacobi_substeps=int(cfg.get("jacobi.substeps", 16)),
        )

    def echo(self) -> dict:
        return {
            "manifold.kind": self.manifold.kind,
            "manifold.dim": self.manifold.dim,
            "manifold.radius": self.manifold.radius,
            "experiment.n_list": list(self.n_list),
            "sampling.n_fine": self.n_fine,
            "sampling.samples": self.samples,
            "sampling.seed": self.seed,
            "experiment.test_function": self.test_function,
            "experiment.p": self.p,
            "experiment.fredholm_nodes": self.fredholm_nodes,
            "develop.substeps": self.develop_substeps,
            "jacobi.method": self.jacobi_method,
            "jacobi.quad_nodes": self.jacobi_quad_nodes,
            "jacobi.substeps": self.jacobi_substeps,
        }


def _f_cos_dist(x: np.ndarray, m: ManifoldSpec) -> np.ndarray:
    if m.kind == "euclidean":
        return np.cos(np.linalg.norm(x, axis=-1))
    cosang = np.clip(x[..., -1] / m.radius, -1.0, 1.0)
    return np.cos(m.radius * np.arccos(cosang))


def _f_coordinate(x: np.ndarray, m: ManifoldSpec) -> np.ndarray:
    return x[..., 0]


def _f_one(x: np.ndarray, m: ManifoldSpec) -> np.ndarray:
    return np.ones(x.shape[:-1])


TEST_FUNCTIONS = {
    "endpoint_cos_dist": _f_cos_dist,
    "endpoint_coordinate": _f_coordinate,
    "constant_one": _f_one,
}


def draw_increment_batch(seed: int, start: int, count: int, n_fine: int, dim: int) -> np.ndarray:
    out = np.empty((count, n_fine, dim))
    for j in range(count):
        out[j] = sample_brownian(seed, start + j, n_fine, dim).increments
    return out


def _fine_endpoints(m: ManifoldSpec, incr: np.ndarray) -> np.ndarray:
    if m.kind == "euclidean":
        return incr.sum(axis=1)
    return _kernels.sphere_endpoints(incr, m.radius)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass
class ConvergenceRow:
    n: int
    lhs: float
    lhs_se: float
    diff: float
    diff_se: float
    guard_fail_frac: float


@dataclass
class ConvergenceReport:
    config: dict
    rhs: float
    rhs_se: float
    log_limit_density: float
    rows: list[ConvergenceRow]
    elapsed_seconds: float

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "rhs": self.rhs,
            "rhs_se": self.rhs_se,
            "log_limit_density": self.log_limit_density,
            "rows": [vars(r) for r in self.rows],
            "elapsed_seconds": round(self.elapsed_seconds, 3),
        }

    def to_csv(self) -> str:
        lines = ["n,lhs,lhs_se,diff,diff_se,guard_fail_frac"]
        for r in self.rows:
            lines.append(
                f"{r.n},{r.lhs!r},{r.lhs_se!r},{r.diff!r},{r.diff_se!r},{r.guard_fail_frac!r}"
            )
        return "\n".join(lines) + "\n"


def run_convergence(cfg: ExperimentConfig) -> ConvergenceReport:
    """Coupled Monte Carlo estimate of both sides of the limit theorem.

    One fine Brownian driver per sample feeds every resolution: the limit
    side on the fine grid, the finite-n side on each coarsening.  Samples
    whose coarsened increments breach the invertibility guard are excluded
    from that resolution's averages and counted.
    """
    t0 = time.time()
    cfg.validate(convergence=True)
    m = cfg.manifold
    f = TEST_FUNCTIONS[cfg.test_function]
    kappa = m.kappa
    eps = guard_epsilon(m.sectional_bound)

    limit = limit_density_constant(m, nodes=cfg.fredholm_nodes)
    log_limit = limit.log_density

    n_total = cfg.samples
    rhs_terms = np.empty(n_total)
    lhs_terms = {n: np.empty(n_total) for n in cfg.n_list}
    guard_ok = {n: np.empty(n_total, dtype=bool) for n in cfg.n_list}

    for start in range(0, n_total, cfg.chunk):
        count = min(cfg.chunk, n_total - start)
        fine = draw_increment_batch(cfg.seed, start, count, cfg.n_fine, m.dim)
        xe = _fine_endpoints(m, fine)
        rhs_terms[start:start + count] = f(xe, m) * math.exp(log_limit)
        for n in cfg.n_list:
            block = cfg.n_fine // n
            coarse = fine.reshape(count, n, block, m.dim).sum(axis=2)
            norms = np.linalg.norm(coarse, axis=2)
            ok = norms.max(axis=1) < eps if kappa > 0 else np.ones(count, dtype=bool)
            guard_ok[n][start:start + count] = ok
            if kappa == 0.0:
                log_rho = np.zeros(count)
            else:
                log_rho = _kernels.sphere_log_density(coarse, kappa)
            xc = _fine_endpoints(m, coarse)
            lhs_terms[n][start:start + count] = f(xc, m) * np.exp(log_rho)

    rhs_mean, rhs_se = _mean_se(rhs_terms)
    rows = []
    for n in cfg.n_list:
        ok = guard_ok[n]
        frac_fail = 1.0 - float(np.count_nonzero(ok)) / n_total
        lhs = lhs_terms[n][ok]
        diffs = lhs_terms[n][ok] - rhs_terms[ok]
        lhs_mean, lhs_se = _mean_se(lhs)
        diff_mean, diff_se = _mean_se(diffs)
        rows.append(ConvergenceRow(n, lhs_mean, lhs_se, diff_mean, diff_se, frac_fail))
    return ConvergenceReport(
        config=cfg.echo(),
        rhs=rhs_mean,
        rhs_se=rhs_se,
        log_limit_density=log_limit,
        rows=rows,
        elapsed_seconds=time.time() - t0,
    )


# ---------------------------------------------------------------------------
# uniform-integrability diagnostic
# ---------------------------------------------------------------------------

@dataclass
class UiRow:
    n: int
    moment: float
    moment_se: float
    bound_violations: int
    guard_fail_frac: float


@dataclass
class UiReport:
    config: dict
    p: float
    rows: list[UiRow]
    plateau_stat: float
    thresholds: dict
    elapsed_seconds: float

    def to_json_dict(self) -> dict:
        return {
            "config": self.config,
            "p": self.p,
            "rows": [vars(r) for r in self.rows],
            "plateau_stat": self.plateau_stat,
            "thresholds": self.thresholds,
            "elapsed_seconds": round(self.elapsed_seconds, 3),
        }


def _envelope_log_bound(norms: np.ndarray, K: float, d: int) -> np.ndarray:
    """Per-sample log of the determinant envelope from the increment norms.

    norms: (N, n).  Uses the psi bounds for the diagonal deviation terms and
    the phi envelope for the alpha prefactor, all in log domain.
    """
    n = norms.shape[1]
    tau = math.sqrt(K) * norms
    psi_sq = psi(tau) ** 2
    a_env = np.sqrt(psi_sq) * K * norms**2 + (1.0 / 3.0) * psi_sq * K**2 * norms**4
    # B_m = K^2 sum_{j>m} prod_{k=m..j} psi^2(tau_k) ||dw_j||^4
    cp = np.cumprod(psi_sq, axis=1)
    cp_prev = np.concatenate([np.ones((norms.shape[0], 1)), cp[:, :-1]], axis=1)
    weighted = cp * K**2 * norms**4
    suffix = np.cumsum(weighted[:, ::-1], axis=1)[:, ::-1]
    tail = np.concatenate([suffix[:, 1:], np.zeros((norms.shape[0], 1))], axis=1)
    b_env = tail / cp_prev
    log_alpha = 2.0 * np.sum(np.log(phi_envelope(tau)), axis=1)
    return n * d * log_alpha + np.exp(-log_alpha) * d * np.sum(a_env + b_env, axis=1)


def run_ui_diagnostic(cfg: ExperimentConfig) -> UiReport:
    """Monte Carlo moments E[rho_n^p] and the determinant envelope check."""
    t0 = time.time()
    if cfg.p <= 1.0:
        raise ConfigError("p must exceed 1")
    cfg.validate(convergence=False)
    m = cfg.manifold
    K = m.sectional_bound
    eps = guard_epsilon(K)
    rows = []
    moments = []
    for n in cfg.n_list:
        vals = np.empty(cfg.samples)
        ok_all = np.empty(cfg.samples, dtype=bool)
        violations = 0
        for start in range(0, cfg.samples, cfg.chunk):
            count = min(cfg.chunk, cfg.samples - start)
            fine = draw_increment_batch(cfg.seed, start, count, cfg.n_fine, m.dim)
            block = cfg.n_fine // n
            coarse = fine.reshape(count, n, block, m.dim).sum(axis=2)
            norms = np.linalg.norm(coarse, axis=2)
            ok = norms.max(axis=1) < eps if K > 0 else np.ones(count, dtype=bool)
            log_rho = (
                np.zeros(count) if K == 0.0 else _kernels.sphere_log_density(coarse, K)
            )
            vals[start:start + count] = np.exp(cfg.p * log_rho)
            ok_all[start:start + count] = ok
            log_bound = _envelope_log_bound(norms, K, m.dim)
            violations += int(np.count_nonzero((2.0 * log_rho > log_bound + 1e-10) & ok))
        sel = vals[ok_all]
        mean, se = _mean_se(sel)
        moments.append(mean)
        rows.append(UiRow(n, mean, se, violations, 1.0 - len(sel) / cfg.samples))
    top = moments[-3:]
    plateau = max(
        abs(top[i + 1] - top[i]) / abs(top[i]) for i in range(len(top) - 1)
    ) if len(top) >= 2 else 0.0
    thresholds = {
        "sectional_bound": K,
        "theorem_bound": CURVATURE_LIMIT_NUM / (CURVATURE_LIMIT_DEN * m.dim),
        "moment_lemma_bound": 1.0 / (2.0 * m.dim),
    }
    return UiReport(
        config=cfg.echo(), p=cfg.p, rows=rows, plateau_stat=plateau,
        thresholds=thresholds, elapsed_seconds=time.time() - t0,
    )


# ---------------------------------------------------------------------------
# verification suite
# ---------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    ok: bool
    seconds: float
    detail: str


@dataclass
class VerifySummary:
    checks: list[CheckResult]

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_json_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [vars(c) for c in self.checks],
        }


def run_verify(names: list[str] | None = None) -> VerifySummary:
    """Run the fast invariant suite; every check times itself.

    Checks resolve the functions they exercise at call time through the
    module namespaces, so targeted monkeypatching (sign flips, wrong model
    constants) is caught by the corresponding check.
    """
    from . import verify_checks

    registry = verify_checks.REGISTRY
    selected = registry if names is None else {k: registry[k] for k in names}
    results = []
    for name, fn in selected.items():
        t0 = time.time()
        try:
            ok, detail = fn()
        except Exception as exc:  # noqa: BLE001 - a crash is a failed check
            ok, detail = False, f"exception: {exc!r}"
        results.append(CheckResult(name, bool(ok), time.time() - t0, detail))
    return VerifySummary(results)


def report_to_json(report) -> str:
    return json.dumps(report.to_json_dict(), sort_keys=True, indent=2) + "\n"
