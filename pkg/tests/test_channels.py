import json

import numpy as np
import pytest

from conftest import I2, X, Y, Z
from purityrb import channels
from purityrb.channels import (
    KrausChannel,
    block_decompose,
    compose,
    compose_kraus,
    adjoint_channel,
    identity_channel,
    is_cptp,
    jamiolkowski,
    kraus_to_liouville,
    pauli_basis,
    unitary_channel,
)
from purityrb.ensembles import (
    bruzda_channel,
    depolarizing,
    filter_channel,
    haar_unitary,
    state_prep_channel,
    RngStream,
)

RNG = RngStream(seed=77)


class TestPauliBasis:
    def test_single_qubit_elements(self):
        basis = pauli_basis(1)
        expected = [I2, X, Y, Z]
        for a, p in zip(basis.elements, expected):
            assert np.allclose(a, p / np.sqrt(2))

    def test_pauli_orthogonality(self):
        basis = pauli_basis(1)
        assert abs(np.trace(basis.elements[1].conj().T @ basis.elements[2])) < 1e-14

    def test_two_qubit_orthonormal(self):
        basis = pauli_basis(2)
        assert len(basis.elements) == 16
        gram = np.array(
            [[np.trace(a.conj().T @ b) for b in basis.elements] for a in basis.elements]
        )
        assert np.abs(gram - np.eye(16)).max() < 1e-12

    def test_three_qubit_basis(self):
        basis = pauli_basis(3)
        assert len(basis.elements) == 64
        assert np.allclose(basis.elements[0], np.eye(8) / np.sqrt(8))

    def test_range_check(self):
        with pytest.raises(ValueError):
            pauli_basis(0)
        with pytest.raises(ValueError):
            pauli_basis(4)


class TestKrausToLiouville:
    def test_identity_channel(self):
        sup = kraus_to_liouville(identity_channel(2))
        assert np.allclose(sup.matrix, np.eye(4), atol=1e-14)

    def test_depolarizing_diagonal(self):
        sup = kraus_to_liouville(depolarizing(2, 0.1))
        assert np.allclose(sup.matrix, np.diag([1.0, 0.9, 0.9, 0.9]), atol=1e-12)

    def test_unitary_gives_orthogonal_matrix(self):
        u = haar_unitary(2, RNG.child("orth"))
        mat = kraus_to_liouville(unitary_channel(u)).matrix
        assert np.linalg.norm(mat @ mat.T - np.eye(4)) < 1e-10


class TestCompose:
    def test_identity_neutral(self):
        e = kraus_to_liouville(depolarizing(2, 0.3))
        i = kraus_to_liouville(identity_channel(2))
        assert np.allclose(compose(e, i).matrix, e.matrix)

    def test_x_conjugation_squares_to_identity(self):
        sx = kraus_to_liouville(unitary_channel(X))
        assert np.allclose(compose(sx, sx).matrix, np.eye(4), atol=1e-14)

    def test_depolarizing_semigroup(self):
        p, q = 0.1, 0.25
        lhs = compose(kraus_to_liouville(depolarizing(2, p)), kraus_to_liouville(depolarizing(2, q)))
        rhs = kraus_to_liouville(depolarizing(2, p + q - p * q))
        assert np.abs(lhs.matrix - rhs.matrix).max() < 1e-12

    def test_kraus_composition_matches_liouville(self):
        for i in range(5):
            a = bruzda_channel(2, 2, RNG.child("ka", i))
            b = bruzda_channel(2, 3, RNG.child("kb", i))
            via_kraus = kraus_to_liouville(compose_kraus(b, a))
            via_matrix = compose(kraus_to_liouville(b), kraus_to_liouville(a))
            assert np.abs(via_kraus.matrix - via_matrix.matrix).max() < 1e-10


class TestAdjoint:
    def test_unitary_adjoint_is_inverse(self):
        u = haar_unitary(2, RNG.child("adj"))
        sup = kraus_to_liouville(unitary_channel(u))
        inv = kraus_to_liouville(unitary_channel(u.conj().T))
        assert np.abs(adjoint_channel(sup).matrix - inv.matrix).max() < 1e-12

    def test_state_prep_dual_maps_ground_to_identity(self):
        """The adjoint of rho -> Tr(rho)|0><0| sends |0><0| to the identity."""
        adj = adjoint_channel(kraus_to_liouville(state_prep_channel()))
        basis = pauli_basis(1)
        ground = channels.coeff_vector(np.diag([1.0, 0.0]).astype(complex), basis)
        image = channels.operator_from_coeffs(adj.matrix @ ground, basis)
        assert np.allclose(image, I2, atol=1e-12)

    def test_involution(self):
        for i in range(5):
            sup = kraus_to_liouville(bruzda_channel(2, 4, RNG.child("inv", i)))
            assert np.allclose(adjoint_channel(adjoint_channel(sup)).matrix, sup.matrix)


class TestBlockDecompose:
    def test_tp_unital(self):
        blocks = block_decompose(kraus_to_liouville(depolarizing(2, 0.2)))
        assert abs(blocks.survival - 1.0) < 1e-12
        assert np.linalg.norm(blocks.sdl) < 1e-12
        assert np.linalg.norm(blocks.nonunital) < 1e-12

    def test_state_prep_channel(self):
        blocks = block_decompose(kraus_to_liouville(state_prep_channel()))
        assert abs(blocks.survival - 1.0) < 1e-12
        assert np.linalg.norm(blocks.sdl) < 1e-12
        assert abs(np.sum(blocks.nonunital**2) - 1.0) < 1e-12
        assert np.abs(blocks.unital).max() < 1e-12

    def test_filter_channel(self):
        # direct construction: the only nonzero transfer entries of
        # rho -> |0><0| rho |0><0| are 1/2 at the four identity/Z corners,
        # so S = 1/2 and the leakage/nonunital norms are 1/4 each
        blocks = block_decompose(kraus_to_liouville(filter_channel()))
        assert abs(blocks.survival - 0.5) < 1e-12
        assert abs(np.sum(blocks.sdl**2) - 0.25) < 1e-12
        assert abs(np.sum(blocks.nonunital**2) - 0.25) < 1e-12

    def test_reassemble(self):
        sup = kraus_to_liouville(bruzda_channel(2, 3, RNG.child("re")))
        assert np.allclose(block_decompose(sup).reassemble(), sup.matrix)


class TestJamiolkowski:
    def test_identity_gives_maximally_entangled(self):
        j = jamiolkowski(identity_channel(2))
        phi = np.zeros((4, 4), dtype=complex)
        for a in range(2):
            for b in range(2):
                phi[a * 2 + a, b * 2 + b] = 0.5
        assert np.allclose(j.matrix, phi)
        assert abs(j.purity() - 1.0) < 1e-12

    def test_state_prep_choi(self):
        j = jamiolkowski(state_prep_channel())
        expected = np.kron(np.diag([1.0, 0.0]), np.eye(2) / 2).astype(complex)
        assert np.allclose(j.matrix, expected)
        assert abs(j.purity() - 0.5) < 1e-12

    def test_complete_depolarizing(self):
        j = jamiolkowski(depolarizing(2, 1.0))
        assert np.allclose(j.matrix, np.eye(4) / 4, atol=1e-12)
        assert abs(j.purity() - 0.25) < 1e-12

    def test_trace_equals_survival(self):
        channel = compose_kraus(filter_channel(), bruzda_channel(2, 2, RNG.child("tr")))
        sup = kraus_to_liouville(channel)
        assert abs(np.trace(jamiolkowski(channel).matrix).real - sup.matrix[0, 0]) < 1e-12


class TestIsCptp:
    def test_identity(self):
        report = is_cptp(identity_channel(2))
        assert (report.cp, report.tp, report.tni) == (True, True, True)

    def test_filter(self):
        report = is_cptp(filter_channel())
        assert (report.cp, report.tp, report.tni) == (True, False, True)

    def test_trace_increasing(self):
        report = is_cptp(KrausChannel(2, (np.sqrt(1.5) * np.eye(2, dtype=complex),)))
        assert not report.tni

    def test_random_cptp_choi_psd_unit_trace(self):
        for i in range(10):
            channel = bruzda_channel(2, (i % 4) + 1, RNG.child("psd", i))
            j = jamiolkowski(channel)
            assert j.min_eigenvalue() > -1e-10
            assert abs(np.trace(j.matrix).real - 1.0) < 1e-10


class TestChoiPurityLink:
    def test_liouville_norm_identity(self):
        """d^2 Tr(J^dag J) equals the squared Frobenius norm of the transfer matrix."""
        for i in range(10):
            channel = bruzda_channel(2, (i % 4) + 1, RNG.child("norm", i))
            sup = kraus_to_liouville(channel)
            lhs = 4.0 * jamiolkowski(channel).purity()
            rhs = float(np.sum(sup.matrix**2))
            assert abs(lhs - rhs) < 1e-10


class TestSerialization:
    def test_kraus_roundtrip_exact(self, tmp_path):
        channel = bruzda_channel(2, 3, RNG.child("ser"))
        path = tmp_path / "channel.json"
        channels.save_channel(channel, path)
        loaded = channels.load_channel(path)
        assert isinstance(loaded, KrausChannel)
        for a, b in zip(channel.kraus_ops, loaded.kraus_ops):
            assert np.array_equal(a, b)

    def test_liouville_roundtrip_exact(self, tmp_path):
        sup = kraus_to_liouville(bruzda_channel(2, 2, RNG.child("ser2")))
        path = tmp_path / "sup.json"
        channels.save_channel(sup, path)
        loaded = channels.load_channel(path)
        assert np.array_equal(loaded.matrix, sup.matrix)

    def test_schema_fields(self, tmp_path):
        path = tmp_path / "c.json"
        channels.save_channel(depolarizing(2, 0.5), path)
        data = json.loads(path.read_text())
        assert data["kind"] == "kraus" and data["d"] == 2
        assert isinstance(data["ops"][0][0][0], list)  # [re, im] pairs

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            channels.channel_from_dict({"kind": "stinespring", "d": 2})
