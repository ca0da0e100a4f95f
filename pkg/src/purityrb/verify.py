"""End-to-end verification suite.

Each check exercises one guaranteed property of the library at a pinned
tolerance and returns a :class:`CheckResult` with the measured residuals.
``run_checks("quick")`` is a seconds-scale smoke suite; ``run_checks("full")``
runs every check, including the desk-scale protocol reproductions.

The ``tolerance_scale`` argument rescales every tolerance and exists so the
failure path can be exercised deterministically (scale 0 makes every
residual-based check fail).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.stats

from . import channels, designs, ensembles, fitting, metrics, protocol
from .channels import compose_kraus, kraus_to_liouville, scale_channel, unitary_channel
from .designs import clifford_1q
from .ensembles import RngStream

DEFAULT_SEED = 20260811


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "seconds": round(self.seconds, 3),
            "details": {
                k: (float(v) if isinstance(v, (int, float, np.floating)) else v)
                for k, v in self.details.items()
            },
        }


def _finish(name: str, t0: float, passed: bool, **details) -> CheckResult:
    return CheckResult(name=name, passed=bool(passed), seconds=time.time() - t0, details=details)


def _random_tp_channel(rng: RngStream, index: int) -> channels.KrausChannel:
    return ensembles.bruzda_channel(2, (index % 4) + 1, rng.child("tp", index))


def _random_tni_channel(rng: RngStream, index: int) -> channels.KrausChannel:
    base = ensembles.bruzda_channel(2, (index % 4) + 1, rng.child("tni", index))
    gamma = 0.1 + 0.4 * (index % 5) / 4.0
    return compose_kraus(base, ensembles.partial_filter(gamma))


def check_sequence_oracle_equivalence(
    seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0, quick: bool = False
) -> CheckResult:
    """Brute-force sequence enumeration equals the invariant-plane power formula."""
    t0 = time.time()
    tol = 1e-10 * tolerance_scale
    gateset = clifford_1q()
    rng = RngStream(seed, ("oracle",))
    q = channels.PAULI_1Q["Z"]
    rho = np.diag([1.0, 0.0]).astype(complex)
    n_channels = 4 if quick else 10
    max_m = 2 if quick else 3
    worst = 0.0
    for idx in range(n_channels):
        for noise in (_random_tp_channel(rng, idx), _random_tni_channel(rng, idx)):
            m_list = list(range(1, max_m + 1))
            theory = protocol.theoretical_decay(noise, gateset, q, rho, m_list)
            for m, th in zip(m_list, theory):
                brute = protocol.brute_force_mean_squares(m, q, rho, noise, gateset)
                worst = max(worst, abs(brute - th))
    return _finish("sequence-oracle-equivalence", t0, worst < tol,
                   max_residual=worst, tolerance=tol)


def check_decay_functional_form(seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0) -> CheckResult:
    """Exact decay curves follow the fitted functional forms for m <= 100."""
    t0 = time.time()
    tol = 1e-10 * tolerance_scale
    gateset = clifford_1q()
    rng = RngStream(seed, ("form",))
    q = channels.PAULI_1Q["Z"]
    rho = np.diag([1.0, 0.0]).astype(complex)
    m_list = np.arange(1, 101)
    worst = 0.0

    tp_cases = [
        compose_kraus(unitary_channel(ensembles.haar_unitary(2, rng.child("h"))),
                      ensembles.reset_channel(0.003)),
        ensembles.bruzda_channel(2, 3, rng.child("b")),
    ]
    for noise in tp_cases:
        u = metrics.unitarity(kraus_to_liouville(noise))
        y = protocol.theoretical_decay(noise, gateset, q, rho, m_list)
        b = (y[0] - y[1]) / (1.0 - u)
        a = y[0] - b
        worst = max(worst, float(np.max(np.abs(y - (a + b * u ** (m_list - 1.0))))))

    unitary_noise = unitary_channel(ensembles.haar_unitary(2, rng.child("u")))
    y = protocol.theoretical_decay(unitary_noise, gateset, q, rho, m_list)
    worst = max(worst, float(np.max(np.abs(y - y[0]))))

    td_cases = [
        compose_kraus(ensembles.bruzda_channel(2, 2, rng.child("t")), ensembles.partial_filter(0.3)),
        compose_kraus(ensembles.bruzda_channel(2, 4, rng.child("t2")), ensembles.partial_filter(0.15)),
    ]
    for noise in td_cases:
        lam_p, lam_m = metrics.decay_eigenvalues(metrics.m_matrix(kraus_to_liouville(noise)))
        y = protocol.theoretical_decay(noise, gateset, q, rho, m_list)
        coeffs = np.linalg.solve(np.array([[1.0, 1.0], [lam_p, lam_m]]), y[:2])
        model = coeffs[0] * lam_p ** (m_list - 1.0) + coeffs[1] * lam_m ** (m_list - 1.0)
        worst = max(worst, float(np.max(np.abs(y - model))))

    return _finish("decay-functional-form", t0, worst < tol, max_residual=worst, tolerance=tol)


def _fig2_scenarios(seed: int):
    gateset = clifford_1q()
    rng = RngStream(seed, ("fig2",))
    fixed_u = unitary_channel(ensembles.haar_unitary(2, rng.child("haar")))
    rotations = ensembles.eigenvalue_perturbed_gates(gateset.unitaries, 0.01, rng.child("rot"))
    scenarios = {
        "reset0.003+haar": compose_kraus(fixed_u, ensembles.reset_channel(0.003)),
        "reset0.003+rotations": ensembles.compose_with_gate_noise(
            ensembles.reset_channel(0.003), rotations),
        "reset0.01+rotations": ensembles.compose_with_gate_noise(
            ensembles.reset_channel(0.01), rotations),
    }
    return gateset, scenarios


def check_nonunital_decay_reproduction(seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0) -> CheckResult:
    """Desk-scale run of the nonunital noise scenarios recovers the unitarity.

    Three noise models (relaxation with a fixed Haar unitary, and relaxation
    at two strengths with gate-dependent over/under-rotations), 30 sequences
    per length, 150 shots per observable, SPAM on.  For gate-dependent noise
    the reference value is the unitarity of the gate-averaged channel.
    """
    t0 = time.time()
    gateset, scenarios = _fig2_scenarios(seed)
    details = {}
    passed = True
    for idx, (label, noise) in enumerate(scenarios.items()):
        if isinstance(noise, ensembles.GateDependentNoise):
            u_ref = metrics.unitarity(noise.average_superoperator())
        else:
            u_ref = metrics.unitarity(kraus_to_liouville(noise))
        config = protocol.ProtocolConfig(
            gateset=gateset,
            noise=noise,
            lengths=tuple(range(2, 101, 2)),
            sequences_per_length=30,
            shots_per_observable=150,
            seed=seed + idx,
        )
        fit = fitting.fit_tp_decay(protocol.run_purity_protocol(config))
        gap = abs(fit.params["u"] - u_ref)
        ok = gap <= fit.ci95["u"] * tolerance_scale
        passed = passed and ok and fit.converged
        details[label] = {
            "fitted_u": fit.params["u"],
            "ci95": fit.ci95["u"],
            "reference_u": u_ref,
            "within_ci": bool(ok),
        }
    return _finish("nonunital-decay-reproduction", t0, passed, **details)


def check_unitary_noise_flatness(seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0) -> CheckResult:
    """Purity curves for unitary noise stay flat at the model prediction.

    A fixed Haar unitary and a 0.1 rad X rotation: every per-length mean
    must sit within 3 standard errors of the flat model value, and both
    channels must have unitarity 1 to 1e-12.
    """
    t0 = time.time()
    gateset = clifford_1q()
    rng = RngStream(seed, ("fig1",))
    cases = {
        "haar-unitary": unitary_channel(ensembles.haar_unitary(2, rng.child("haar"))),
        "x-rotation-0.1": ensembles.rotation_unitary((1.0, 0.0, 0.0), 0.1),
    }
    details = {}
    passed = True
    u_tol = 1e-12 * tolerance_scale
    for idx, (label, noise) in enumerate(cases.items()):
        u = metrics.unitarity(kraus_to_liouville(noise))
        config = protocol.ProtocolConfig(
            gateset=gateset,
            noise=noise,
            lengths=tuple(range(2, 101, 2)),
            sequences_per_length=30,
            shots_per_observable=150,
            seed=seed + 17 * (idx + 1),
        )
        dataset = protocol.run_purity_protocol(config)
        theory = protocol.theoretical_protocol_curve(config)
        sigmas = np.abs(dataset.mean - theory) / dataset.stderr
        ok = bool(np.max(sigmas) <= 3.0 * tolerance_scale) and abs(u - 1.0) < u_tol
        passed = passed and ok
        details[label] = {
            "max_sigma_distance": float(np.max(sigmas)),
            "unitarity_minus_one": abs(u - 1.0),
            "flat_value": float(theory[0]),
        }
    return _finish("unitary-noise-flatness", t0, passed, **details)


def check_random_channel_properties(
    seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0,
    samples: int = 1000, ranks=(1, 2, 3, 4),
) -> CheckResult:
    """Structural identities hold across random channels of every Kraus rank.

    Checks the Choi-purity identity, the block-norm bounds, the eigenvalue
    sum rule, the unitarity range, and the probe-probability range.
    """
    t0 = time.time()
    jam_tol = 1e-10 * tolerance_scale
    bound_tol = 1e-12 * tolerance_scale
    sum_tol = 1e-12 * tolerance_scale
    range_tol = 1e-9 * tolerance_scale
    rng = RngStream(seed, ("properties",))
    worst = {"jam": 0.0, "bound": 0.0, "sum": 0.0, "u_range": 0.0, "probe_range": 0.0}
    for rank in ranks:
        for i in range(samples):
            channel = ensembles.bruzda_channel(2, rank, rng.child(rank, i))
            sup = kraus_to_liouville(channel)
            jam = metrics.check_jamiolkowski_identity(channel)
            worst["jam"] = max(worst["jam"], jam.residual)
            bounds = metrics.check_norm_bounds(sup)
            residuals = [bounds.nonunital_residual, bounds.sdl_residual]
            if bounds.tp_residual is not None:
                residuals.append(bounds.tp_residual)
            worst["bound"] = max(worst["bound"], -min(residuals))
            mat = metrics.m_matrix(sup)
            lam_p, lam_m = metrics.decay_eigenvalues(mat)
            u = metrics.unitarity(sup)
            s = metrics.survival_rate(sup)
            worst["sum"] = max(worst["sum"], abs(lam_p + lam_m - (s * s + u)))
            worst["u_range"] = max(worst["u_range"], -u, u - 1.0)
            p_as, p_sa = metrics.probe_probabilities(sup)
            worst["probe_range"] = max(
                worst["probe_range"], -p_as, p_as - 1.0, -p_sa, p_sa - 1.0
            )
    passed = (
        worst["jam"] < jam_tol
        and worst["bound"] <= bound_tol
        and worst["sum"] < sum_tol
        and worst["u_range"] <= range_tol
        and worst["probe_range"] <= range_tol
    )
    return _finish("random-channel-properties", t0, passed, samples_per_rank=samples, **worst)


def check_infidelity_chain_ensemble(
    seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0,
    samples: int = 500, restarts: int = 20,
) -> CheckResult:
    """u >= [1-2R]^2 >= [1-2r]^2 across random qubit channels, saturated by
    depolarizing noise.

    Random channels are drawn conditioned on r <= 1/2 (the second inequality
    is vacuous when the bracket goes negative).  R comes from the
    multi-start simplex optimizer, so it is an upper bound on the true
    optimum and the chain must still hold.
    """
    t0 = time.time()
    tol = 1e-8 * tolerance_scale
    sat_tol = 1e-10 * tolerance_scale
    rng = RngStream(seed, ("chain",))
    worst = 0.0
    accepted = 0
    draw = 0
    while accepted < samples:
        channel = ensembles.bruzda_channel(2, (draw % 4) + 1, rng.child(draw))
        draw += 1
        sup = kraus_to_liouville(channel)
        if metrics.average_infidelity(sup) > 0.5:
            continue
        accepted += 1
        report = metrics.check_infidelity_chain(sup, restarts=restarts, seed=seed + draw)
        worst = max(worst, -report.first_residual, -report.second_residual,
                    -report.lower_bound_residual)
    sat_worst = 0.0
    for p in (0.01, 0.1, 0.5):
        report = metrics.check_infidelity_chain(kraus_to_liouville(ensembles.depolarizing(2, p)),
                                                restarts=restarts, seed=seed)
        sat_worst = max(sat_worst, abs(report.first_residual), abs(report.second_residual))
    passed = worst <= tol and sat_worst < sat_tol
    return _finish("infidelity-chain", t0, passed,
                   worst_violation=worst, saturation_residual=sat_worst,
                   samples=samples, rejected=draw - accepted)


def check_composition_witness(tolerance_scale: float = 1.0, **_) -> CheckResult:
    """Unitarity is not monotone: two unitarity-zero channels compose to 1/12."""
    t0 = time.time()
    tol = 1e-12 * tolerance_scale
    prep = kraus_to_liouville(ensembles.state_prep_channel())
    dual = kraus_to_liouville(ensembles.state_prep_dual_channel())
    u_prep = metrics.unitarity(prep)
    u_dual = metrics.unitarity(dual)
    u_composed = metrics.composition_unitarity(dual, prep)
    passed = u_prep < tol and u_dual < tol and abs(u_composed - 1.0 / 12.0) < tol
    return _finish("composition-witness", t0, passed,
                   u_first=u_dual, u_second=u_prep, u_composed=u_composed,
                   expected=1.0 / 12.0)


def check_clifford_design(tolerance_scale: float = 1.0, **_) -> CheckResult:
    """The built-in Clifford set is an exact 2-design with a rank-2 twirl projector."""
    t0 = time.time()
    fp_tol = 1e-12 * tolerance_scale
    proj_tol = 1e-10 * tolerance_scale
    gateset = clifford_1q()
    potential = designs.frame_potential_2(gateset)
    proj = designs.twirl_projector_2copy(gateset)
    singulars = np.linalg.svd(proj, compute_uv=False)
    rank_gap = max(abs(singulars[0] - 1.0), abs(singulars[1] - 1.0), singulars[2])
    b1, b2 = designs.invariant_coeff_vectors(2)
    fix_residual = max(
        float(np.linalg.norm(proj @ b1 - b1)), float(np.linalg.norm(proj @ b2 - b2))
    )
    passed = (
        len(gateset) == 24
        and abs(potential - 2.0) < fp_tol
        and rank_gap < proj_tol
        and fix_residual < proj_tol
    )
    return _finish("clifford-2design", t0, passed,
                   size=len(gateset), frame_potential=potential,
                   rank_gap=rank_gap, fixed_point_residual=fix_residual)


def ensemble_scan_rows(ranks, samples: int, seed: int, dim: int = 2) -> np.ndarray:
    """Rows (rank, sample, unitarity, infidelity) over random channels."""
    rng = RngStream(seed, ("scan",))
    rows = []
    for rank in ranks:
        for i in range(samples):
            sup = kraus_to_liouville(ensembles.bruzda_channel(dim, rank, rng.child(rank, i)))
            rows.append(
                (rank, i, metrics.unitarity(sup), metrics.average_infidelity(sup))
            )
    return np.array(rows)


def check_rank_fidelity_scan(
    seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0, samples: int = 1000
) -> CheckResult:
    """Unitarity falls with Kraus rank and tracks (but is not fixed by) infidelity.

    Median unitarity decreases strictly with rank.  Pooled over the scan,
    unitarity and infidelity are rank-correlated (Spearman rho > 0: coherent
    channels reach farther from the identity than incoherent ones of the
    same rank), while the scatter of unitarity around a linear trend in
    infidelity stays above 0.01, so neither determines the other.
    """
    t0 = time.time()
    rows = ensemble_scan_rows((1, 2, 3, 4), samples, seed)
    medians = [float(np.median(rows[rows[:, 0] == r, 2])) for r in (1, 2, 3, 4)]
    decreasing = all(a > b for a, b in zip(medians, medians[1:]))
    infidelity = rows[:, 3]
    rho, _ = scipy.stats.spearmanr(rows[:, 2], infidelity)
    slope, intercept = np.polyfit(infidelity, rows[:, 2], 1)
    spread = float(np.std(rows[:, 2] - (slope * infidelity + intercept)))
    passed = decreasing and rho > 0.0 and spread > 0.01 * tolerance_scale
    return _finish("rank-fidelity-scan", t0, passed,
                   medians=[round(m, 4) for m in medians],
                   spearman=float(rho), residual_spread=spread)


def check_estimator_unbiasedness(
    seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0, reps: int = 100000
) -> CheckResult:
    """The squared-expectation estimator is unbiased for +-1 shot data."""
    t0 = time.time()
    n = 150
    gen = RngStream(seed, ("unbiased",)).generator()
    details = {}
    passed = True
    for mu in (0.0, 0.3, 0.9):
        plus = gen.binomial(n, (1.0 + mu) / 2.0, size=reps)
        means = 2.0 * plus / n - 1.0
        estimates = (n * means**2 - 1.0) / (n - 1.0)
        err = float(estimates.mean() - mu * mu)
        se = float(estimates.std(ddof=1) / np.sqrt(reps))
        ok = abs(err) <= 3.0 * se * tolerance_scale
        passed = passed and ok
        details[f"mu={mu}"] = {"bias": err, "stderr": se, "within_3se": bool(ok)}
    return _finish("estimator-unbiasedness", t0, passed, reps=reps, **details)


def check_loss_and_variance(seed: int = DEFAULT_SEED, tolerance_scale: float = 1.0) -> CheckResult:
    """Loss protocol recovers a known survival rate; the sequence variance
    identity V[Q] = E[Q^2] - E[Q]^2 links the two protocols."""
    t0 = time.time()
    gateset = clifford_1q()

    scaled = scale_channel(ensembles.depolarizing(2, 0.05), 0.98)
    config = protocol.ProtocolConfig(
        gateset=gateset,
        noise=scaled,
        lengths=tuple(range(2, 101, 2)),
        sequences_per_length=30,
        shots_per_observable=150,
        spam=None,
        seed=seed,
    )
    fit = fitting.loss_fit(protocol.run_loss_protocol(config))
    s_gap = abs(fit.params["S"] - 0.98)
    loss_ok = s_gap <= 0.005 * tolerance_scale

    # variance identity with a common observable |0><0| and independent runs
    q = np.diag([1.0, 0.0]).astype(complex)
    noise = ensembles.reset_channel(0.01)
    lengths = tuple(range(2, 42, 4))
    base = dict(gateset=gateset, noise=noise, lengths=lengths,
                sequences_per_length=60, shots_per_observable=300,
                spam=None, observables=(q,))
    sq_data = protocol.run_purity_protocol(
        protocol.ProtocolConfig(seed=seed + 1, **base))
    mean_data = protocol.run_loss_protocol(
        protocol.ProtocolConfig(seed=seed + 2, **base))
    rho = np.diag([1.0, 0.0]).astype(complex)
    theory_sq = protocol.theoretical_decay(noise, gateset, q, rho, sq_data.lengths)
    theory_mean = protocol.theoretical_loss(noise, gateset, q, rho, mean_data.lengths)
    variance_est = sq_data.mean - mean_data.mean**2
    variance_th = theory_sq - theory_mean**2
    sigma = np.sqrt(sq_data.stderr**2 + (2.0 * np.abs(mean_data.mean) * mean_data.stderr) ** 2)
    sigma_dist = float(np.max(np.abs(variance_est - variance_th) / sigma))
    variance_ok = sigma_dist <= 3.0 * tolerance_scale

    return _finish("loss-and-variance", t0, loss_ok and variance_ok,
                   fitted_survival=fit.params["S"], survival_gap=s_gap,
                   variance_max_sigma=sigma_dist)


FULL_CHECKS = (
    check_sequence_oracle_equivalence,
    check_decay_functional_form,
    check_nonunital_decay_reproduction,
    check_unitary_noise_flatness,
    check_random_channel_properties,
    check_infidelity_chain_ensemble,
    check_composition_witness,
    check_clifford_design,
    check_rank_fidelity_scan,
    check_estimator_unbiasedness,
    check_loss_and_variance,
)


def run_checks(level: str = "quick", seed: int = DEFAULT_SEED,
               tolerance_scale: float = 1.0) -> list[CheckResult]:
    if level == "quick":
        return [
            check_clifford_design(tolerance_scale=tolerance_scale),
            check_composition_witness(tolerance_scale=tolerance_scale),
            check_sequence_oracle_equivalence(seed, tolerance_scale, quick=True),
            check_random_channel_properties(seed, tolerance_scale, samples=25),
            check_estimator_unbiasedness(seed, tolerance_scale, reps=20000),
        ]
    if level == "full":
        return [check(seed=seed, tolerance_scale=tolerance_scale) for check in FULL_CHECKS]
    raise ValueError(f"unknown verification level {level!r}")


def report_to_dict(results: list[CheckResult]) -> dict:
    return {
        "passed": all(r.passed for r in results),
        "checks": [r.to_dict() for r in results],
    }
