import numpy as np
import pytest

from conftest import H, I2, X, Y, Z
from purityrb import channels, designs, metrics
from purityrb.channels import kraus_to_liouville, liouville_of_unitary, pauli_basis
from purityrb.designs import (
    GateSet,
    averaged_operator,
    canonical_phase,
    clifford_1q,
    frame_potential_2,
    invariant_coeff_vectors,
    load_gateset,
    save_gateset,
    single_copy_twirl,
    twirl_projector_2copy,
)
from purityrb.ensembles import RngStream, bruzda_channel, depolarizing, haar_unitary


def phase_distance(a, b):
    return np.linalg.norm(canonical_phase(a) - canonical_phase(b))


class TestClifford1q:
    def test_exactly_24_elements(self):
        assert len(clifford_1q()) == 24

    def test_contains_paulis_and_hadamard(self):
        gates = clifford_1q().unitaries
        for target in (I2, X, Y, Z, H):
            assert any(phase_distance(g, target) < 1e-8 for g in gates)

    def test_closed_under_multiplication(self):
        gates = clifford_1q().unitaries
        for g in gates:
            for h in gates:
                prod = g @ h
                assert any(phase_distance(prod, e) < 1e-8 for e in gates)

    def test_unitary_rep_transpose_property(self):
        # the transfer matrix of U^dag is the transpose of that of U
        basis = pauli_basis(1)
        for g in clifford_1q().unitaries:
            lhs = liouville_of_unitary(g.conj().T, basis)
            rhs = liouville_of_unitary(g, basis).T
            assert np.abs(lhs - rhs).max() < 1e-12


class TestFramePotential:
    def test_clifford_is_2design(self):
        assert abs(frame_potential_2(clifford_1q()) - 2.0) < 1e-12

    def test_single_identity(self):
        gs = GateSet(dim=2, unitaries=(np.eye(2, dtype=complex),))
        assert abs(frame_potential_2(gs) - 16.0) < 1e-12

    def test_pauli_group_is_1design_only(self):
        gs = GateSet(dim=2, unitaries=(I2, X, Y, Z))
        assert abs(frame_potential_2(gs) - 4.0) < 1e-12


class TestTwirlProjector:
    def test_idempotent_rank_two(self):
        proj = twirl_projector_2copy(clifford_1q())
        assert np.abs(proj @ proj - proj).max() < 1e-10
        singulars = np.linalg.svd(proj, compute_uv=False)
        assert abs(singulars[0] - 1.0) < 1e-10
        assert abs(singulars[1] - 1.0) < 1e-10
        assert singulars[2] < 1e-10

    def test_fixes_invariant_vectors(self):
        proj = twirl_projector_2copy(clifford_1q())
        b1, b2 = invariant_coeff_vectors(2)
        assert np.linalg.norm(proj @ b1 - b1) < 1e-12
        assert np.linalg.norm(proj @ b2 - b2) < 1e-12

    def test_projects_into_invariant_span(self, gen):
        proj = twirl_projector_2copy(clifford_1q())
        b1, b2 = invariant_coeff_vectors(2)
        v = gen.standard_normal(16)
        image = proj @ v
        residual = image - (image @ b1) * b1 - (image @ b2) * b2
        assert np.linalg.norm(residual) < 1e-10

    def test_invariant_vectors_match_operators(self):
        # coefficient vectors agree with the actual invariant operators
        basis2 = pauli_basis(2)
        inv = metrics.twirl_invariant_basis(2)
        b1, b2 = invariant_coeff_vectors(2)
        assert np.allclose(channels.coeff_vector(inv.b1, basis2), b1, atol=1e-12)
        assert np.allclose(channels.coeff_vector(inv.b2, basis2), b2, atol=1e-12)

    def test_invariant_plane_under_random_two_copy_conjugation(self):
        # (b_j | L(U) (x) L(U) | b_k) = delta_jk for random unitaries
        b1, b2 = invariant_coeff_vectors(2)
        for i in range(5):
            lu = liouville_of_unitary(haar_unitary(2, RngStream(13, ("2c", i))))
            two_copy = np.kron(lu, lu)
            gram = np.array([[u @ two_copy @ v for v in (b1, b2)] for u in (b1, b2)])
            assert np.abs(gram - np.eye(2)).max() < 1e-10


class TestSingleCopyTwirl:
    def test_projects_onto_identity_component(self):
        twirl = single_copy_twirl(clifford_1q())
        expected = np.zeros((4, 4))
        expected[0, 0] = 1.0
        assert np.abs(twirl - expected).max() < 1e-12


class TestAveragedOperator:
    def test_identity_noise(self):
        sup = kraus_to_liouville(channels.identity_channel(2))
        _, restriction = averaged_operator(clifford_1q(), sup)
        assert np.allclose(restriction.as_array(), np.eye(2), atol=1e-12)

    def test_depolarizing_restriction(self):
        sup = kraus_to_liouville(depolarizing(2, 0.1))
        _, restriction = averaged_operator(clifford_1q(), sup)
        assert np.allclose(restriction.as_array(), [[1.0, 0.0], [0.0, 0.81]], atol=1e-12)

    def test_matches_block_norm_formulas(self):
        for i in range(100):
            sup = kraus_to_liouville(bruzda_channel(2, (i % 4) + 1, RngStream(13, ("ao", i))))
            _, restriction = averaged_operator(clifford_1q(), sup)
            assert np.abs(restriction.as_array() - metrics.m_matrix(sup).as_array()).max() < 1e-10

    def test_supported_on_invariant_plane(self):
        sup = kraus_to_liouville(bruzda_channel(2, 3, RngStream(13, ("sp",))))
        full, _ = averaged_operator(clifford_1q(), sup)
        proj = twirl_projector_2copy(clifford_1q())
        assert np.linalg.norm(full - proj @ full @ proj) < 1e-10


class TestGateSetIO:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "gates.json"
        save_gateset(clifford_1q(), path)
        loaded = load_gateset(path, require_2design=True)
        assert len(loaded) == 24
        assert loaded.dim == 2

    def test_rejects_non_design_when_asked(self, tmp_path):
        path = tmp_path / "paulis.json"
        save_gateset(GateSet(dim=2, unitaries=(I2, X, Y, Z)), path)
        load_gateset(path)  # fine without certification
        with pytest.raises(ValueError, match="2-design"):
            load_gateset(path, require_2design=True)

    def test_rejects_duplicates(self):
        with pytest.raises(ValueError, match="coincide"):
            GateSet(dim=2, unitaries=(I2, 1j * np.eye(2, dtype=complex)))

    def test_rejects_non_unitary(self):
        with pytest.raises(ValueError, match="unitary"):
            GateSet(dim=2, unitaries=(np.array([[1, 0], [0, 0.5]], dtype=complex),))


class TestCustomGateSetProtocolSupport:
    def test_haar_sample_set_loads(self, tmp_path):
        # gate sets other than the built-in group can be supplied from file
        stream = RngStream(21, ("gs",))
        gates = tuple(haar_unitary(2, stream.child(i)) for i in range(8))
        gs = GateSet(dim=2, unitaries=gates, label="haar-8")
        path = tmp_path / "haar.json"
        save_gateset(gs, path)
        loaded = load_gateset(path)
        assert loaded.label == "haar-8"
        assert all(np.array_equal(a, b) for a, b in zip(gs.unitaries, loaded.unitaries))
