"""Acceptance checks: exact oracles and statistical guarantees, runnable at two sizes.

``quick`` shrinks sample counts so the whole suite finishes in well under a
minute; ``full`` uses the stated sizes. Each check returns a ``CheckResult``
with its measured quantities so failures can be diagnosed from the report.
"""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import states as st
from .distinguishers import (
    acceptance_prob_expectation,
    acceptance_prob_variance,
    haar_acceptance_expectation,
    sample_distinguisher,
)
from .moments import (
    FiniteEnsemble,
    RealHaarEnsemble,
    StabilizerEnsemble,
    adversarial_mixture,
    conversion_report,
    ensemble_moment,
    haar_moment,
    sym_dim,
)
from .observables import Observable, gue, pauli_string, pauli_sum, projector_onto, random_projector
from .rng import make_rng
from .shadows import (
    batch_count,
    batch_size,
    brute_force_distribution,
    channel_apply,
    depolarizing_inverse,
    exact_shadow_mean,
    median_of_means,
    outcome_distribution,
    plan,
    sample_stats,
    snapshot_values,
)

LEVELS = ("quick", "full")


@dataclass
class CheckResult:
    name: str
    title: str
    passed: bool
    runtime: float
    budget: float
    details: dict = field(default_factory=dict)

    @property
    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{self.name:<6} {status}  {self.runtime:7.2f}s / {self.budget:5.0f}s  {self.title}"

    def to_json(self) -> dict:
        return asdict(self)


def _binomial_limit(delta: float, runs: int) -> float:
    return delta + 3.0 * math.sqrt(delta * (1 - delta) / runs)


def _level(level: str) -> bool:
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}")
    return level == "full"


# --- AC-1 -----------------------------------------------------------------------

def check_outcome_law(level: str = "full", seed: int = 0) -> dict:
    """Circuit-unitary outcome probabilities against the closed-form law."""
    full = _level(level)
    rng = make_rng(seed)
    pairs = 20 if full else 5
    worst = {}
    for n in (1, 2, 3, 4):
        err = 0.0
        for _ in range(pairs):
            rho = st.random_density(n, rng)
            zeta = st.haar_sample(n, rng)
            err = max(err, float(np.max(np.abs(brute_force_distribution(rho, zeta) - outcome_distribution(rho, zeta)))))
        worst[n] = err
    err = max(worst.values())
    return {"passed": err <= 1e-10, "max_abs_error": err, "per_n": worst, "pairs_per_n": pairs}


# --- AC-2 -----------------------------------------------------------------------

def partial_trace_second(m: np.ndarray, d: int) -> np.ndarray:
    return np.einsum("aibi->ab", m.reshape(d, d, d, d))


def check_haar_second_moment(level: str = "full", seed: int = 0) -> dict:
    """``2^n (2^n+1) Tr_2(H_2 (A (x) B)) = Tr(B) A + B A`` for general complex A, B."""
    rng = make_rng(seed)
    trials = 20 if _level(level) else 5
    worst = 0.0
    for n in (1, 2, 3):
        d = 1 << n
        h2 = haar_moment(n, 2).matrix
        for _ in range(trials):
            a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            b = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            lhs = d * (d + 1) * partial_trace_second(h2 @ np.kron(a, b), d)
            rhs = np.trace(b) * a + b @ a
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return {"passed": worst <= 1e-9, "max_residual": worst, "trials_per_n": trials}


# --- AC-3 -----------------------------------------------------------------------

def check_exact_unbiasedness(level: str = "full", seed: int = 0) -> dict:
    """Stabilizer enumeration at n=2: the exact snapshot mean reproduces rho."""
    rng = make_rng(seed)
    ens = StabilizerEnsemble(2)
    count = 10 if _level(level) else 3
    worst = 0.0
    for _ in range(count):
        rho = st.random_density(2, rng)
        worst = max(worst, float(np.max(np.abs(exact_shadow_mean(ens, rho) - rho.matrix))))
    # the same statement on a basis of operators: inverse o channel = identity
    d = 4
    basis_err = 0.0
    for i in range(d):
        for j in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            out = _linear_channel(ens, e)
            basis_err = max(basis_err, float(np.max(np.abs(depolarizing_inverse(out, 2) - e))))
    err = max(worst, basis_err)
    return {"passed": err <= 1e-9, "max_density_error": worst, "max_basis_error": basis_err, "states": count}


def _linear_channel(ens, a: np.ndarray) -> np.ndarray:
    """Channel on a non-Hermitian operator via its Hermitian and anti-Hermitian parts."""
    h = (a + a.conj().T) / 2
    k = (a - a.conj().T) / 2j
    return _channel_hermitian(ens, h) + 1j * _channel_hermitian(ens, k)


def _channel_hermitian(ens, h: np.ndarray) -> np.ndarray:
    # the channel is linear, so shift h to a positive operator and rescale it to unit trace
    d = h.shape[0]
    shift = (np.max(np.abs(np.linalg.eigvalsh(h))) + 1.0)
    pos = h + shift * np.eye(d)
    tr = float(np.trace(pos).real)
    rho = st.DensityMatrix.from_matrix(pos / tr)
    mixed = st.DensityMatrix.maximally_mixed(rho.n)
    return tr * channel_apply(ens, rho) - shift * d * channel_apply(ens, mixed)


# --- AC-4 -----------------------------------------------------------------------

def _variance_observables(n: int, rng: np.random.Generator) -> list[Observable]:
    if n == 2:
        paulis = [pauli_string("ZZ"), pauli_sum([(1.0, "XI"), (0.5, "YZ")])]
    else:
        paulis = [pauli_string("XYZ"), pauli_sum([(1.0, "ZZI"), (-0.7, "IXX"), (0.3, "YIY")])]
    return paulis + [gue(n, rng), random_projector(n, 1, rng), random_projector(n, 2, rng)]


def check_variance_bound(level: str = "full", seed: int = 0, workers: int = 1) -> dict:
    """Exact-design variance stays below ``3 Tr(O0^2)`` within a 3-sigma relative band."""
    rng = make_rng(seed)
    shots = 100_000 if _level(level) else 20_000
    rows = []
    for n in (2, 3):
        ens = StabilizerEnsemble(n)
        rho = st.random_density(n, rng)
        for obs in _variance_observables(n, rng):
            stats = sample_stats(snapshot_values(rho, ens, obs, shots, rng, workers), obs.expectation(rho))
            bound = 3 * obs.traceless_sq
            rel_sigma = stats.se_variance / stats.variance if stats.variance > 0 else 0.0
            rows.append({
                "n": n,
                "observable": obs.name,
                "variance": stats.variance,
                "bound": bound,
                "threshold": bound * (1 + 3 * rel_sigma),
                "ok": stats.variance <= bound * (1 + 3 * rel_sigma),
            })
    return {"passed": all(r["ok"] for r in rows), "shots": shots, "rows": rows}


# --- AC-5 / AC-6 --------------------------------------------------------------

def _mixture_runs(bound_kind: str, level: str, seed: int, workers: int) -> dict:
    full = _level(level)
    runs = 200 if full else 40
    gamma, delta, n = 0.15, 0.1, 2
    rng = make_rng(seed)
    rho = st.random_density(n, rng)
    psi = st.PureState.basis(n, 0)
    obs = projector_onto(psi)
    true = obs.expectation(rho)
    cases = []
    for eps0 in (0.02, 0.1):
        ens = adversarial_mixture(n, 3, eps0, psi)
        rep = conversion_report(ensemble_moment(ens, 3))
        eps = rep.eps_add if bound_kind == "additive" else rep.eps_rel
        cfg = plan(gamma, delta, bound_kind, obs, eps)
        failures = 0
        estimates = []
        for _ in range(runs):
            vals = snapshot_values(rho, ens, obs, cfg.total_shots, rng, workers)
            est = median_of_means(vals, cfg.K, cfg.L)
            estimates.append(est)
            failures += abs(est - true) > gamma + cfg.bias_bound
        case = {
            "eps0": eps0,
            "eps_measured": eps,
            "K": cfg.K,
            "L": cfg.L,
            "bias_bound": cfg.bias_bound,
            "failure_fraction": failures / runs,
            "failure_limit": _binomial_limit(delta, runs),
            "mean_abs_error": float(np.mean(np.abs(np.array(estimates) - true))),
        }
        case["ok"] = case["failure_fraction"] <= case["failure_limit"]
        if bound_kind == "relative":
            bias_shots = 400_000 if full else 100_000
            stats = sample_stats(snapshot_values(rho, ens, obs, bias_shots, rng, workers), true)
            case["bias"] = stats.bias
            case["bias_limit"] = cfg.bias_bound + 3 * stats.se_bias
            case["ok"] = case["ok"] and abs(stats.bias) <= case["bias_limit"]
        cases.append(case)
    return {"passed": all(c["ok"] for c in cases), "runs": runs, "gamma": gamma, "delta": delta,
            "true_value": true, "cases": cases}


def check_additive_theorem(level: str = "full", seed: int = 0, workers: int = 1) -> dict:
    return _mixture_runs("additive", level, seed, workers)


def check_relative_theorem(level: str = "full", seed: int = 0, workers: int = 1) -> dict:
    return _mixture_runs("relative", level, seed, workers)


# --- AC-7 -----------------------------------------------------------------------

def check_conversions(level: str = "full", seed: int = 0) -> dict:
    rng = make_rng(seed)
    per_cell = 9 if _level(level) else 3
    checked, bad = 0, []
    for n in (1, 2):
        for t in (1, 2, 3):
            for _ in range(per_cell):
                size = int(rng.integers(2, 9))
                vecs = st.haar_vectors(n, size, rng)
                ens = FiniteEnsemble(vecs, rng.dirichlet(np.ones(size)))
                rep = conversion_report(ensemble_moment(ens, t))
                checked += 1
                if not (rep.add_le_rel and rep.rel_le_symdim_add):
                    bad.append({"n": n, "t": t, "eps_add": rep.eps_add, "eps_rel": rep.eps_rel})
    mixtures = []
    for n, t in ((1, 2), (1, 3), (2, 1), (2, 2), (2, 3)):
        ds = sym_dim(n, t)
        if ds < 3:
            continue
        for eps in (0.02, 0.1, 0.5):
            rep = conversion_report(ensemble_moment(adversarial_mixture(n, t, eps), t))
            ok = (rep.eps_rel >= ds * rep.eps_add / 3 - 1e-12
                  and rep.eps_rel >= ds * eps / 3 - 1e-12
                  and abs(rep.ratio - ds / 2) <= 1e-9)
            mixtures.append({"n": n, "t": t, "eps": eps, "sym_dim": ds, "ratio": rep.ratio, "ok": ok})
    passed = not bad and checked >= (50 if _level(level) else 1) and all(m["ok"] for m in mixtures)
    return {"passed": passed, "ensembles_checked": checked, "violations": bad, "mixtures": mixtures}


# --- AC-8 -----------------------------------------------------------------------

def check_distinguishers(level: str = "full", seed: int = 0, workers: int = 1) -> dict:
    full = _level(level)
    rng = make_rng(seed)
    shots = 100_000 if full else 20_000
    sampled = []
    for n in (1, 2, 3):
        zeta = st.haar_sample(n, rng)
        rho = st.random_density(n, rng)
        obs = gue(n, rng)
        sources = [("fixed", zeta), ("mixture", adversarial_mixture(n, 3, 0.1, zeta))]
        for label, src in sources:
            for kind, exact in (("expectation", acceptance_prob_expectation), ("variance", acceptance_prob_variance)):
                p = exact(src, rho, obs)
                freq = float(sample_distinguisher(kind, src, rho, obs, shots, rng, workers).mean())
                sigma = math.sqrt(max(p * (1 - p), 1e-300) / shots)
                sampled.append({"n": n, "source": label, "kind": kind, "analytic": p, "sampled": freq,
                                "z": (freq - p) / sigma, "ok": abs(freq - p) <= 5 * sigma})

    bias_rows = []
    n = 2
    bias_shots = 200_000 if full else 50_000
    rho = st.random_density(n, rng)
    psi = st.PureState.basis(n, 0)
    for obs in (projector_onto(psi), pauli_string("ZZ")):
        for eps in (0.02, 0.1, 0.3):
            ens = adversarial_mixture(n, 3, eps, psi)
            adv = abs(acceptance_prob_expectation(ens, rho, obs) - haar_acceptance_expectation(rho, obs))
            stats = sample_stats(snapshot_values(rho, ens, obs, bias_shots, rng, workers), obs.expectation(rho))
            bound = 2 * (obs.dim + 1) * adv * obs.op_norm
            bias_rows.append({"observable": obs.name, "eps": eps, "advantage": adv, "bias": stats.bias,
                              "limit": bound + 3 * stats.se_bias, "ok": abs(stats.bias) <= bound + 3 * stats.se_bias})

    haar = haar_acceptance_expectation(st.DensityMatrix.maximally_mixed(1), projector_onto(st.PureState.basis(1, 0)))
    haar_ok = abs(haar - 0.75) <= 1e-9
    passed = all(r["ok"] for r in sampled) and all(r["ok"] for r in bias_rows) and haar_ok
    return {"passed": passed, "shots": shots, "sampled": sampled, "bias": bias_rows, "haar_expectation": haar}


# --- AC-9 -----------------------------------------------------------------------

def check_real_states(level: str = "full", seed: int = 0, workers: int = 1) -> dict:
    """Real auxiliary states erase the Y component: the estimator for <Y> on |i> averages 0, not 1."""
    rng = make_rng(seed)
    shots = 100_000 if _level(level) else 20_000
    ens = RealHaarEnsemble(1)
    rho = st.product_state("i").density()
    y = pauli_string("Y")
    mean = float(snapshot_values(rho, ens, y, shots, rng, workers).mean())
    channel = channel_apply(ens, rho)
    y_component = abs(float(np.trace(y.matrix @ channel).real))
    passed = -0.05 <= mean <= 0.05 and y_component <= 1e-9
    return {"passed": passed, "shots": shots, "estimator_mean": mean, "true_value": y.expectation(rho),
            "channel_y_component": y_component}


# --- AC-10 ----------------------------------------------------------------------

def check_median_of_means(level: str = "full", seed: int = 0) -> dict:
    """Lomax (Pareto II) stream, shape 2.5: finite variance, infinite fourth moment."""
    rng = make_rng(seed)
    trials = 500 if _level(level) else 200
    shape = 2.5
    mean = 1.0 / (shape - 1)
    var = shape / ((shape - 1) ** 2 * (shape - 2))
    rows = []
    for delta, gamma in ((0.1, 0.3), (0.05, 0.2)):
        K, L = batch_count(delta), batch_size(gamma, var)
        draws = rng.pareto(shape, size=(trials, K * L))
        ests = np.median(draws.reshape(trials, K, L).mean(axis=2), axis=1)
        rate = float(np.mean(np.abs(ests - mean) > gamma))
        naive = float(np.mean(np.abs(draws[:, : L].mean(axis=1) - mean) > gamma))
        rows.append({"delta": delta, "gamma": gamma, "K": K, "L": L, "failure_rate": rate,
                     "limit": _binomial_limit(delta, trials), "single_batch_failure_rate": naive,
                     "ok": rate <= _binomial_limit(delta, trials)})
    return {"passed": all(r["ok"] for r in rows), "trials": trials, "rows": rows}


# --- registry -------------------------------------------------------------------

CHECKS: list[tuple[str, str, float, Callable]] = [
    ("AC-1", "outcome law vs circuit unitary", 10, check_outcome_law),
    ("AC-2", "Haar second-moment identity", 5, check_haar_second_moment),
    ("AC-3", "exact unbiasedness, stabilizer n=2", 30, check_exact_unbiasedness),
    ("AC-4", "variance bound at an exact design", 120, check_variance_bound),
    ("AC-5", "additive guarantee end to end", 300, check_additive_theorem),
    ("AC-6", "relative guarantee end to end", 300, check_relative_theorem),
    ("AC-7", "design-distance conversions", 60, check_conversions),
    ("AC-8", "distinguisher oracle equivalence", 120, check_distinguishers),
    ("AC-9", "real-state negative control", 30, check_real_states),
    ("AC-10", "median-of-means calibration", 60, check_median_of_means),
]

_TAKES_WORKERS = {check_variance_bound, check_additive_theorem, check_relative_theorem,
                  check_distinguishers, check_real_states}


def run_check(name: str, level: str = "full", seed: int = 0, workers: int = 1) -> CheckResult:
    for label, title, budget, fn in CHECKS:
        if label == name:
            start = time.perf_counter()
            kwargs = {"workers": workers} if fn in _TAKES_WORKERS else {}
            details = fn(level, seed, **kwargs)
            runtime = time.perf_counter() - start
            passed = bool(details.pop("passed")) and runtime < budget
            return CheckResult(label, title, passed, runtime, budget, details)
    raise KeyError(f"unknown check {name!r}")


def run_suite(level: str = "quick", seed: int = 0, workers: int = 1, names=None) -> list[CheckResult]:
    selected = [c[0] for c in CHECKS] if names is None else list(names)
    return [run_check(name, level, seed, workers) for name in selected]
