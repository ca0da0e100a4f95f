"""End-to-end acceptance suite.

Each test runs one check of the verification suite at its pinned tolerance
and prints a single PASS/FAIL line, so ``pytest tests/test_acceptance.py -s``
doubles as a readable verification report.  The same checks back
``purityrb verify --level full``.
"""

import json

from purityrb import verify


def _report(result):
    status = "PASS" if result.passed else "FAIL"
    details = json.dumps(result.to_dict()["details"], default=str)
    print(f"{status} {result.name} ({result.seconds:.2f} s) {details}")
    assert result.passed, f"{result.name}: {details}"


def test_sequence_oracle_equivalence():
    """Brute-force enumeration of all Clifford sequences (m <= 3, 20 random
    channels) matches the invariant-plane power formula to 1e-10."""
    _report(verify.check_sequence_oracle_equivalence())


def test_decay_functional_form():
    """Exact decay curves for m <= 100 follow the offset-exponential (TP) and
    two-exponential (trace-decreasing) models to 1e-10."""
    _report(verify.check_decay_functional_form())


def test_nonunital_decay_reproduction():
    """Desk-scale protocol runs (30 sequences, 150 shots, SPAM on) recover
    the unitarity of relaxation noise with fixed and gate-dependent
    coherent components, within the fitted 95% confidence interval."""
    _report(verify.check_nonunital_decay_reproduction())


def test_unitary_noise_flatness():
    """Purity curves under purely unitary noise are flat within 3 standard
    errors at every length, and the computed unitarity is 1 to 1e-12."""
    _report(verify.check_unitary_noise_flatness())


def test_random_channel_properties():
    """1000 random channels per Kraus rank 1-4 satisfy the Choi-purity
    identity (1e-10), the block-norm bounds (1e-12), the eigenvalue sum rule
    (1e-12), unitarity in [0, 1] and probe probabilities in [0, 1]."""
    _report(verify.check_random_channel_properties())


def test_infidelity_chain():
    """u >= [1-2R]^2 >= [1-2r]^2 over 500 random channels (R from 20-restart
    optimization, violations bounded by 1e-8), exactly saturated by
    depolarizing noise at p in {0.01, 0.1, 0.5} (1e-10)."""
    _report(verify.check_infidelity_chain_ensemble())


def test_composition_witness():
    """Two unitarity-zero channels compose to unitarity 1/12 (1e-12)."""
    _report(verify.check_composition_witness())


def test_clifford_design():
    """The single-qubit Clifford set has 24 elements, frame potential 2 to
    1e-12, and a rank-2 two-copy twirl projector fixing the invariant plane."""
    _report(verify.check_clifford_design())


def test_rank_fidelity_scan():
    """Median unitarity strictly decreases with Kraus rank; the
    unitarity-infidelity scatter has positive Spearman correlation and
    residual spread above 0.01."""
    _report(verify.check_rank_fidelity_scan())


def test_estimator_unbiasedness():
    """The unbiased squared-expectation estimator has no measurable bias at
    mu in {0, 0.3, 0.9} over 1e5 repetitions of 150 shots."""
    _report(verify.check_estimator_unbiasedness())


def test_loss_and_variance():
    """The loss protocol recovers a 0.98 survival rate to 0.005, and the
    sequence-variance identity links the two protocols within sampling
    error."""
    _report(verify.check_loss_and_variance())
