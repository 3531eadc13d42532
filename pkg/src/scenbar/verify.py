"""End-to-end verification: size the run, sample, assemble, solve, decide.

The pipeline computes the two sample counts from the problem constants,
builds the scenario dataset, assembles and solves the linear program, and
issues a verdict. "Certified" requires three independently re-checked facts
at verdict time: the optimum passed the margin test, the dataset held at
least the required number of scenario states, and each state carried at
least the required number of noise realizations. A run whose counts were
overridden below those minimums can complete and report, but it is
watermarked and never certified. When the margin test fails the verdict is
"Inconclusive", never "unsafe": the method is one-sided and says nothing
about violations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import bounds, lp, sampling, scp
from .core import (
    LAMBDA_MARGIN,
    BarrierCertificate,
    InputError,
    MonomialBasis,
    Verdict,
    VerdictStatus,
    VerificationProblem,
    decision_rule,
)
from .rng import DOMAIN_AUDIT, chain
from .systems import BlackBoxSystem

REPORT_VERSION = 1
UNSOUND_WATERMARK = "UNSOUND-EXPERIMENT: sample counts below certified minimums"


def safety_probability_bound(lam: float, c: float, horizon: int) -> float:
    """Lower bound 1 - (1 + c * horizon) / lam implied by a certificate, clamped at 0."""
    if lam <= 1.0:
        raise InputError("lam must be > 1")
    if c < 0.0:
        raise InputError("c must be >= 0")
    if horizon < 0:
        raise InputError("horizon must be >= 0")
    return max(0.0, 1.0 - (1.0 + c * horizon) / lam)


@dataclass
class AuditTable:
    """Mesh evaluation of a certificate: values, region tags, one-step expectations."""

    points: np.ndarray
    b_values: np.ndarray
    region_tags: list[str]
    expected_next_b: np.ndarray
    slack: np.ndarray
    c: float
    mc: int

    @property
    def max_b_initial(self) -> float:
        vals = [b for b, t in zip(self.b_values, self.region_tags) if t == "initial"]
        return max(vals) if vals else -math.inf

    @property
    def min_b_unsafe(self) -> float:
        vals = [b for b, t in zip(self.b_values, self.region_tags) if t == "unsafe"]
        return min(vals) if vals else math.inf

    @property
    def max_slack(self) -> float:
        return float(self.slack.max())

    def write_csv(self, path) -> None:
        dim = self.points.shape[1]
        if dim == 1:
            header = "x,B,region_tag,expected_next_B,martingale_slack"
        else:
            header = (
                ",".join(f"x{j}" for j in range(dim))
                + ",B,region_tag,expected_next_B,martingale_slack"
            )
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for i in range(len(self.b_values)):
                coords = ",".join(format(v, ".17g") for v in self.points[i])
                fh.write(
                    f"{coords},{format(self.b_values[i], '.17g')},{self.region_tags[i]},"
                    f"{format(self.expected_next_b[i], '.17g')},"
                    f"{format(self.slack[i], '.17g')}\n"
                )


def audit_certificate(
    cert: BarrierCertificate,
    problem: VerificationProblem,
    system: BlackBoxSystem,
    grid: int = 1001,
    mc: int = 256,
    audit_seed: int = 0,
) -> AuditTable:
    """Evaluate the certificate conditions on a mesh over the state box.

    Advisory only: reports max B over the initial region, min B over the
    unsafe region, and a Monte-Carlo estimate of
    E[B(f(x, w)) | x] - B(x) - c at every mesh point.
    """
    n = problem.dimension
    if n > 2:
        raise InputError("grid audit supports 1- or 2-dimensional states")
    if grid < 2 or mc < 1:
        raise InputError("audit needs grid >= 2 and mc >= 1")
    axes = [
        np.linspace(problem.state_region.lower[j], problem.state_region.upper[j], grid)
        for j in range(n)
    ]
    if n == 1:
        points = axes[0][:, None]
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        points = np.stack([m.ravel() for m in mesh], axis=1)

    b_vals = cert.evaluate_many(points)
    in_mask = problem.initial_region.contains_all(points)
    un_mask = problem.unsafe_region.contains_all(points)
    tags = [
        "initial" if i else ("unsafe" if u else "state")
        for i, u in zip(in_mask, un_mask)
    ]

    base = np.uint64(audit_seed) ^ DOMAIN_AUDIT
    m = len(points)
    expected = np.empty(m)
    block = max(1, int(2_000_000 // mc))
    for off in range(0, m, block):
        sub = points[off : off + block]
        i_idx = (off + np.arange(len(sub), dtype=np.uint64))[:, None]
        j_idx = np.arange(mc, dtype=np.uint64)[None, :]
        seeds = chain(base, i_idx, j_idx).reshape(-1)
        succ = system.step_batch(np.repeat(sub, mc, axis=0), seeds)
        vals = cert.evaluate_many(succ).reshape(len(sub), mc)
        expected[off : off + len(sub)] = vals.mean(axis=1)
    slack = expected - b_vals - cert.c
    return AuditTable(
        points=points,
        b_values=np.asarray(b_vals),
        region_tags=tags,
        expected_next_b=expected,
        slack=slack,
        c=cert.c,
        mc=mc,
    )


@dataclass
class VerificationReport:
    verdict: Verdict
    certificate: BarrierCertificate | None
    n_used: int
    n_hat_used: int
    n_required: int
    n_hat_required: int
    problem: VerificationProblem
    run_seed: int
    degree: int
    tighten_amount: float
    sound: bool
    watermark: str | None
    certificate_bound: float | None
    region_sample_counts: dict[str, int]
    solver: dict
    timing: dict[str, float] = field(default_factory=dict)
    failure_stage: str | None = None
    failure_message: str | None = None
    config_digest: str = ""

    def to_dict(self) -> dict:
        """Stable-order plain dict for serialization."""
        cert = self.certificate
        prob = self.problem
        return {
            "report_version": REPORT_VERSION,
            "verdict": {
                "status": self.verdict.status.value,
                "probability_lower_bound": self.verdict.probability_lower_bound,
                "confidence": self.verdict.confidence,
                "kappa_star": self.verdict.kappa_star,
                "epsilon": self.verdict.epsilon,
                "decision_margin": self.verdict.decision_margin,
            },
            "certificate": None
            if cert is None
            else {
                "dimension": cert.basis.dimension,
                "degree": cert.basis.degree,
                "coefficients": list(cert.coefficients),
                "lam": cert.lam,
                "c": cert.c,
                "kappa": cert.kappa,
            },
            "counts": {
                "n": self.n_used,
                "n_hat": self.n_hat_used,
                "n_required": self.n_required,
                "n_hat_required": self.n_hat_required,
            },
            "inputs": {
                "rho": prob.rho,
                "beta": prob.beta,
                "beta_s": prob.beta_s,
                "delta": prob.delta,
                "epsilon": prob.epsilon,
                "epsilon_bar": prob.epsilon_bar,
                "mu": prob.mu,
                "lipschitz_bound": prob.lipschitz_bound,
                "variance_bound": prob.variance_bound,
                "p_max": prob.p_max,
                "b_max": prob.b_max,
                "horizon": prob.horizon,
                "run_seed": self.run_seed,
                "degree": self.degree,
                "tighten_amount": self.tighten_amount,
                "state_lower": list(prob.state_region.lower),
                "state_upper": list(prob.state_region.upper),
                "initial_lower": list(prob.initial_region.lower),
                "initial_upper": list(prob.initial_region.upper),
                "unsafe_lower": list(prob.unsafe_region.lower),
                "unsafe_upper": list(prob.unsafe_region.upper),
            },
            "certificate_bound": self.certificate_bound,
            "region_sample_counts": dict(self.region_sample_counts),
            "solver": dict(self.solver),
            "soundness": {"sound": self.sound, "watermark": self.watermark},
            "failure_stage": self.failure_stage,
            "failure_message": self.failure_message,
            "config_digest": self.config_digest,
            "package_version": _package_version(),
            "timing": dict(self.timing),
        }


def _package_version() -> str:
    from . import __version__

    return __version__


def _exact_lambda_max(cert: BarrierCertificate) -> float | None:
    if cert.basis.dimension != 1 or cert.basis.degree != 2:
        return None
    b1, b2, b3 = cert.coefficients
    tr = b1 + b3
    disc = math.sqrt((b1 - b3) ** 2 + b2 ** 2)
    return 0.5 * (tr + disc)


def run_verification(
    problem: VerificationProblem,
    system: BlackBoxSystem,
    basis: MonomialBasis,
    run_seed: int,
    *,
    workers: int = 1,
    tighten: bool = False,
    unsound_n: int | None = None,
    unsound_nhat: int | None = None,
    compact: bool = True,
    dataset: sampling.ScenarioDataset | None = None,
    dataset_path=None,
    chunk_size: int = sampling.DEFAULT_CHUNK,
    config_digest: str = "",
    progress=None,
) -> VerificationReport:
    """Execute the full pipeline and return a report, complete or partial."""
    if basis.dimension != problem.dimension:
        raise InputError("basis dimension does not match the problem")

    timing: dict[str, float] = {}
    tighten_amount = scp.tightened_offsets(problem) if tighten else 0.0
    epsilon = problem.epsilon

    def partial(stage: str, message: str, **kw) -> VerificationReport:
        verdict = Verdict(
            status=VerdictStatus.INCONCLUSIVE,
            probability_lower_bound=0.0,
            confidence=confidence,
            kappa_star=math.nan,
            epsilon=epsilon,
        )
        return VerificationReport(
            verdict=verdict,
            certificate=None,
            n_used=kw.get("n_used", 0),
            n_hat_used=kw.get("n_hat_used", 0),
            n_required=n_required,
            n_hat_required=n_hat_required,
            problem=problem,
            run_seed=run_seed,
            degree=basis.degree,
            tighten_amount=tighten_amount,
            sound=sound,
            watermark=watermark,
            certificate_bound=None,
            region_sample_counts=kw.get("region_counts", {}),
            solver=kw.get("solver", {}),
            timing=timing,
            failure_stage=stage,
            failure_message=message,
            config_digest=config_digest,
        )

    t0 = time.perf_counter()
    q_dim = basis.count + 2
    n_required = bounds.minimal_scenario_count(
        bounds.SampleComplexityInputs(problem.epsilon_bar, problem.beta, q_dim)
    )
    n_hat_required = bounds.empirical_count(
        problem.variance_bound, problem.delta, problem.beta_s
    )
    n_used = unsound_n if unsound_n is not None else n_required
    n_hat_used = unsound_nhat if unsound_nhat is not None else n_hat_required
    sound = n_used >= n_required and n_hat_used >= n_hat_required
    watermark = None if sound else UNSOUND_WATERMARK
    confidence = (1.0 - problem.beta_s) if tighten else (1.0 - problem.beta - problem.beta_s)
    timing["counts"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    try:
        if dataset is None:
            dataset = sampling.build_dataset(
                system,
                problem.state_region,
                n_used,
                n_hat_used,
                run_seed,
                basis,
                compact=compact,
                workers=workers,
                chunk_size=chunk_size,
                path=dataset_path,
                progress=progress,
            )
    except sampling.DatasetError as exc:
        timing["dataset"] = time.perf_counter() - t0
        return partial("dataset", str(exc))
    timing["dataset"] = time.perf_counter() - t0
    if dataset.counts != (n_used, n_hat_used):
        return partial(
            "dataset",
            f"dataset counts {dataset.counts} do not match required ({n_used}, {n_hat_used})",
        )
    n_used, n_hat_used = dataset.counts
    # Re-derive soundness from the dataset actually used, not the plan.
    sound = n_used >= n_required and n_hat_used >= n_hat_required
    watermark = None if sound else UNSOUND_WATERMARK

    in_count = int(problem.initial_region.contains_all(dataset.samples).sum())
    un_count = int(problem.unsafe_region.contains_all(dataset.samples).sum())
    region_counts = {"state": dataset.n, "initial": in_count, "unsafe": un_count}

    t0 = time.perf_counter()
    try:
        system_rows = scp.assemble(problem, basis, dataset, tighten=tighten_amount)
    except InputError as exc:
        timing["assemble"] = time.perf_counter() - t0
        return partial("assemble", str(exc), n_used=n_used, n_hat_used=n_hat_used,
                       region_counts=region_counts)
    timing["assemble"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    solution = lp.solve(system_rows)
    timing["solve"] = time.perf_counter() - t0

    solver_info = {
        "status": solution.status,
        "iterations": solution.iterations,
        "max_residual": solution.max_residual,
        "active_rows": list(solution.active_rows),
        "certificate_rows": list(solution.certificate_rows),
        "row_count": system_rows.n_rows,
    }

    if solution.status != "Optimal":
        return partial(
            "solve",
            f"linear program terminated with status {solution.status}",
            n_used=n_used,
            n_hat_used=n_hat_used,
            region_counts=region_counts,
            solver=solver_info,
        )

    kappa_star = solution.objective
    d = solution.d_star
    lam_value = float(d[1])
    c_value = float(d[2])
    # The recovered vertex satisfies the bound rows only to solver tolerance;
    # snap harmless roundoff back onto the bounds before validation.
    if -1e-7 < c_value < 0.0:
        c_value = 0.0
    if 1.0 - 1e-7 < lam_value <= 1.0:
        lam_value = 1.0 + LAMBDA_MARGIN
    cert = BarrierCertificate(
        basis=basis,
        coefficients=tuple(d[3:]),
        lam=lam_value,
        c=c_value,
        kappa=kappa_star,
    )
    lam_exact = _exact_lambda_max(cert)
    if lam_exact is not None:
        solver_info["lambda_max_exact"] = lam_exact
        solver_info["lambda_max_cap"] = problem.p_max

    margin_ok = (
        kappa_star <= 0.0 if tighten else decision_rule(kappa_star, epsilon) is VerdictStatus.CERTIFIED
    )
    certified = margin_ok and sound
    verdict = Verdict(
        status=VerdictStatus.CERTIFIED if certified else VerdictStatus.INCONCLUSIVE,
        probability_lower_bound=(1.0 - problem.rho) if certified else 0.0,
        confidence=confidence,
        kappa_star=kappa_star,
        epsilon=0.0 if tighten else epsilon,
    )
    bound_value = safety_probability_bound(cert.lam, cert.c, problem.horizon)
    return VerificationReport(
        verdict=verdict,
        certificate=cert,
        n_used=n_used,
        n_hat_used=n_hat_used,
        n_required=n_required,
        n_hat_required=n_hat_required,
        problem=problem,
        run_seed=run_seed,
        degree=basis.degree,
        tighten_amount=tighten_amount,
        sound=sound,
        watermark=watermark,
        certificate_bound=bound_value,
        region_sample_counts=region_counts,
        solver=solver_info,
        timing=timing,
        config_digest=config_digest,
    )
