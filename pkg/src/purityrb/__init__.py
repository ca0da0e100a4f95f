"""purityrb: estimate how coherent (unitary) a quantum noise channel is.

The library computes the unitarity of noise channels from their transfer
matrices, simulates the purity-decay sequence protocol that estimates it
from measured data, and fits the predicted decay models in a way that is
robust to state-preparation and measurement errors.
"""

from .channels import (
    BlockDecomposition,
    ChoiState,
    KrausChannel,
    OperatorBasis,
    Superoperator,
    adjoint_channel,
    block_decompose,
    compose,
    compose_kraus,
    identity_channel,
    is_cptp,
    jamiolkowski,
    kraus_to_liouville,
    pauli_basis,
    scale_channel,
    unitary_channel,
)
from .designs import GateSet, averaged_operator, clifford_1q, frame_potential_2, twirl_projector_2copy
from .ensembles import (
    GateDependentNoise,
    RngStream,
    bruzda_channel,
    depolarizing,
    eigenvalue_perturbed_gates,
    filter_channel,
    haar_unitary,
    parse_channel_spec,
    reset_channel,
    rotation_unitary,
    state_prep_channel,
    state_prep_dual_channel,
)
from .fitting import FitResult, fit_td_decay, fit_tp_decay, loss_fit
from .metrics import (
    DecayMatrix,
    average_infidelity,
    check_infidelity_chain,
    check_jamiolkowski_identity,
    check_norm_bounds,
    composition_unitarity,
    decay_eigenvalues,
    m_matrix,
    optimized_infidelity,
    probe_probabilities,
    survival_rate,
    unitarity,
)
from .protocol import (
    DecayDataset,
    ProtocolConfig,
    SpamModel,
    brute_force_mean_squares,
    exact_expectation,
    run_loss_protocol,
    run_purity_protocol,
    sample_sequence,
    simulate_shots,
    theoretical_decay,
    theoretical_loss,
    unbiased_square,
)

__version__ = "0.1.0"
