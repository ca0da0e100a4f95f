"""Monte Carlo simulation of the purity and loss sequence protocols.

A run applies random gate sequences from a 2-design gate set with a noise
channel inserted between consecutive gates (the residual noise around the
first gate is absorbed into the prepared state), estimates either squared
or plain expectation values of the configured observables from a finite
number of two-outcome measurements, and aggregates per-length statistics
into a :class:`DecayDataset`.

Squared expectation values use the unique unbiased estimator built from
the sample mean and sample variance, so individual purity estimates may
fall outside [0, 1]; they are never clipped.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import channels, designs, metrics
from .channels import KrausChannel, OperatorBasis, Superoperator
from .designs import GateSet
from .ensembles import GateDependentNoise, RngStream


def default_observables(d: int) -> tuple[np.ndarray, ...]:
    """Non-identity Pauli strings (unnormalized, eigenvalues +-1)."""
    basis = channels.default_basis(d)
    return tuple(np.sqrt(d) * a for a in basis.elements[1:])


@dataclass(frozen=True)
class SpamModel:
    """State-preparation and measurement error model.

    State preparation applies a random near-identity unitary to the ideal
    state (angle uniform in ``[-prep_angle, prep_angle]``).  Each measured
    observable gets an independent near-identity orthogonal rotation of its
    traceless components plus a scaling factor drawn uniformly from
    ``scale_range``.  The realization is derived from the protocol seed.
    """

    prep_angle: float = 0.05
    meas_angle: float = 0.05
    scale_range: tuple[float, float] = (0.95, 1.0)

    def __post_init__(self):
        if self.prep_angle < 0 or self.meas_angle < 0:
            raise ValueError("SPAM angles must be nonnegative")
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi <= 1.0):
            raise ValueError("scale_range must satisfy 0 < lo <= hi <= 1")


def _random_near_identity_unitary(gen: np.random.Generator, d: int, angle: float) -> np.ndarray:
    h = gen.standard_normal((d, d)) + 1j * gen.standard_normal((d, d))
    h = (h + h.conj().T) / 2.0
    h /= max(np.linalg.norm(h, 2), 1e-30)
    theta = gen.uniform(-angle, angle)
    return scipy.linalg.expm(1j * theta * h)


def _random_near_identity_rotation(gen: np.random.Generator, n: int, angle: float) -> np.ndarray:
    a = gen.standard_normal((n, n))
    a = (a - a.T) / 2.0
    a /= max(np.linalg.norm(a, 2), 1e-30)
    theta = gen.uniform(-angle, angle)
    return scipy.linalg.expm(theta * a)


@dataclass(frozen=True, eq=False)
class RealizedSpam:
    """Concrete SPAM draw: a preparation unitary plus per-observable rotations."""

    prep_unitary: np.ndarray
    meas_rotations: tuple[np.ndarray, ...]
    meas_scales: tuple[float, ...]


def realize_spam(
    model: SpamModel, d: int, n_observables: int, rng: RngStream
) -> RealizedSpam:
    gen = rng.generator()
    prep = _random_near_identity_unitary(gen, d, model.prep_angle)
    rotations = []
    scales = []
    for _ in range(n_observables):
        rotations.append(_random_near_identity_rotation(gen, d * d - 1, model.meas_angle))
        scales.append(float(gen.uniform(*model.scale_range)))
    return RealizedSpam(
        prep_unitary=prep,
        meas_rotations=tuple(rotations),
        meas_scales=tuple(scales),
    )


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    """Everything needed to reproduce a protocol run."""

    gateset: GateSet
    noise: KrausChannel | GateDependentNoise
    lengths: tuple[int, ...]
    sequences_per_length: int = 30
    shots_per_observable: int = 150
    spam: SpamModel | None = field(default_factory=SpamModel)
    seed: int = 0
    observables: tuple[np.ndarray, ...] | None = None
    exact_expectations: bool = False

    def __post_init__(self):
        if not self.lengths or min(self.lengths) < 1:
            raise ValueError("sequence lengths must all be at least 1")
        if self.sequences_per_length < 1:
            raise ValueError("need at least one sequence per length")
        if self.shots_per_observable < 2:
            raise ValueError("the unbiased squared estimator needs at least 2 shots")
        if isinstance(self.noise, GateDependentNoise) and len(self.noise) != len(self.gateset):
            raise ValueError("gate-dependent noise must supply one channel per gate")


@dataclass(frozen=True, eq=False)
class DecayDataset:
    """Per-length aggregates of sequence estimates, plus the raw records."""

    kind: str  # "purity" (squared expectations) or "loss" (first moments)
    lengths: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    sequences_per_length: int
    shots_per_observable: int
    raw: np.ndarray | None = None  # columns: m, seq_index, estimate

    def __post_init__(self):
        if self.kind not in ("purity", "loss"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if np.any(self.stderr < 0) or not np.all(np.isfinite(self.mean)):
            raise ValueError("dataset aggregates must be finite with nonnegative stderr")

    def to_aggregate_csv(self, path) -> None:
        value = "mean_sq" if self.kind == "purity" else "mean"
        with open(path, "w") as fh:
            fh.write(f"m,{value},stderr,K,N\n")
            for m, mu, se in zip(self.lengths, self.mean, self.stderr):
                fh.write(
                    f"{int(m)},{mu:.17g},{se:.17g},"
                    f"{self.sequences_per_length},{self.shots_per_observable}\n"
                )

    def to_raw_csv(self, path) -> None:
        if self.raw is None:
            raise ValueError("dataset carries no raw records")
        with open(path, "w") as fh:
            fh.write("m,seq_index,purity_estimate\n")
            for m, k, est in self.raw:
                fh.write(f"{int(m)},{int(k)},{est:.17g}\n")


class CsvSchemaError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def load_aggregate_csv(path) -> DecayDataset:
    """Read an aggregate CSV, inferring the dataset kind from its header."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise CsvSchemaError("empty file", 1)
    header = lines[0].split(",")
    if header == ["m", "mean_sq", "stderr", "K", "N"]:
        kind = "purity"
    elif header == ["m", "mean", "stderr", "K", "N"]:
        kind = "loss"
    else:
        raise CsvSchemaError(f"unrecognized header {lines[0]!r}", 1)
    rows = []
    for idx, ln in enumerate(lines[1:], start=2):
        parts = ln.split(",")
        if len(parts) != 5:
            raise CsvSchemaError(f"expected 5 fields, got {len(parts)}", idx)
        try:
            rows.append(
                (int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3]), int(parts[4]))
            )
        except ValueError as exc:
            raise CsvSchemaError(str(exc), idx) from exc
    if not rows:
        raise CsvSchemaError("no data rows", 2)
    arr = np.array(rows, dtype=float)
    return DecayDataset(
        kind=kind,
        lengths=arr[:, 0].astype(int),
        mean=arr[:, 1],
        stderr=arr[:, 2],
        sequences_per_length=int(arr[0, 3]),
        shots_per_observable=int(arr[0, 4]),
    )


# --- elementary operations --------------------------------------------------

def sample_sequence(m: int, gateset_size: int, rng: RngStream) -> np.ndarray:
    """``m`` iid uniform gate indices in [0, gateset_size)."""
    if m < 1:
        raise ValueError("sequence length must be at least 1")
    return rng.generator().integers(0, gateset_size, size=m)


def simulate_shots(mu: float, n: int, rng: RngStream) -> float:
    """Sample mean of ``n`` iid +-1 outcomes with expectation ``mu``."""
    if abs(mu) > 1.0 + 1e-12:
        raise ValueError(f"expectation value {mu} outside [-1, 1]")
    p = min(max((1.0 + mu) / 2.0, 0.0), 1.0)
    plus = rng.generator().binomial(n, p)
    return 2.0 * plus / n - 1.0


def unbiased_square(sample_mean: float, n: int) -> float:
    """Unbiased estimator of mu^2 from the mean of ``n`` +-1 outcomes.

    For X the mean of n iid +-1 variables, E[X^2] = mu^2 + (1 - mu^2)/n,
    which rearranges to E[(n X^2 - 1)/(n - 1)] = mu^2.  The estimate can be
    negative (as low as -1/(n-1)).
    """
    if n < 2:
        raise ValueError("unbiased_square needs at least 2 shots")
    return (n * sample_mean**2 - 1.0) / (n - 1.0)


def _unbiased_square_from_counts(n_plus: int, n_minus: int, n: int) -> float:
    # general mean^2 estimator x^2 - s^2/n; reduces to unbiased_square when
    # every shot yields +-1 (no loss outcomes)
    mean = (n_plus - n_minus) / n
    return (n * n * mean * mean - (n_plus + n_minus)) / (n * (n - 1.0))


# --- run context ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _RunContext:
    kind: str
    seed: int
    dim: int
    n_gates: int
    gate_mats: np.ndarray          # (|G|, n, n) transfer matrices
    pair_mats: np.ndarray          # (|G|, n, n) gate after its noise insertion
    rho_vec: np.ndarray            # prepared state coefficients (SPAM applied)
    obs_vecs: np.ndarray           # (n_obs, n) observable coefficients (SPAM applied)
    shots: int
    exact: bool
    purity_scale: float


def _noise_superoperators(
    noise, gateset: GateSet, basis: OperatorBasis
) -> tuple[np.ndarray, bool]:
    if isinstance(noise, GateDependentNoise):
        mats = np.stack([channels.kraus_to_liouville(c, basis).matrix for c in noise.channels])
        return mats, True
    if isinstance(noise, KrausChannel):
        mat = channels.kraus_to_liouville(noise, basis).matrix
    elif isinstance(noise, Superoperator):
        mat = noise.matrix
    else:
        raise TypeError(f"unsupported noise object {type(noise).__name__}")
    return np.broadcast_to(mat, (len(gateset),) + mat.shape), False


def _spam_observable_vectors(
    observables, basis: OperatorBasis, spam: RealizedSpam | None
) -> np.ndarray:
    vecs = []
    for idx, q in enumerate(observables):
        vec = channels.coeff_vector(q, basis)
        if spam is not None:
            vec = vec.copy()
            vec[1:] = spam.meas_scales[idx] * (spam.meas_rotations[idx] @ vec[1:])
            effect = (np.eye(basis.dim) + channels.operator_from_coeffs(vec, basis)) / 2.0
            evals = np.linalg.eigvalsh(effect)
            if evals.min() < -1e-10 or evals.max() > 1.0 + 1e-10:
                raise ValueError("SPAM-perturbed measurement effect is not a valid POVM element")
        vecs.append(vec)
    return np.stack(vecs)


def _build_context(config: ProtocolConfig, kind: str) -> _RunContext:
    basis = channels.default_basis(config.gateset.dim)
    d = basis.dim
    gate_mats = designs.gate_superoperators(config.gateset, basis)
    noise_mats, _ = _noise_superoperators(config.noise, config.gateset, basis)
    pair_mats = np.einsum("gij,gjk->gik", gate_mats, noise_mats)

    if config.observables is not None:
        observables = config.observables
    elif kind == "loss":
        observables = (np.eye(d, dtype=np.complex128),)
    else:
        observables = default_observables(d)

    spam = None
    if config.spam is not None:
        spam = realize_spam(config.spam, d, len(observables), RngStream(config.seed, ("spam",)))

    rho = np.zeros((d, d), dtype=np.complex128)
    rho[0, 0] = 1.0
    if spam is not None:
        rho = spam.prep_unitary @ rho @ spam.prep_unitary.conj().T
    rho_vec = channels.coeff_vector(rho, basis)
    obs_vecs = _spam_observable_vectors(observables, basis, spam)

    return _RunContext(
        kind=kind,
        seed=config.seed,
        dim=d,
        n_gates=len(config.gateset),
        gate_mats=gate_mats,
        pair_mats=pair_mats,
        rho_vec=rho_vec,
        obs_vecs=obs_vecs,
        shots=config.shots_per_observable,
        exact=config.exact_expectations,
        purity_scale=1.0 / (d - 1.0),
    )


def _propagate(ctx: _RunContext, sequence: np.ndarray) -> np.ndarray:
    v = ctx.gate_mats[sequence[0]] @ ctx.rho_vec
    for g in sequence[1:]:
        v = ctx.pair_mats[g] @ v
    return v


def _sequence_estimate(ctx: _RunContext, sequence: np.ndarray, stream: RngStream) -> float:
    v = _propagate(ctx, sequence)
    mus = ctx.obs_vecs @ v
    if ctx.exact:
        if ctx.kind == "purity":
            return float(ctx.purity_scale * np.sum(mus**2))
        return float(mus[0])

    # each observable is a two-outcome measurement {(1 +- Q)/2} plus a
    # "lost" outcome carrying the trace deficit of trace-decreasing noise
    trace = np.sqrt(ctx.dim) * v[0]
    n = ctx.shots
    total = 0.0
    for idx, mu in enumerate(mus):
        p_plus = max((trace + mu) / 2.0, 0.0)
        p_minus = max((trace - mu) / 2.0, 0.0)
        p_lost = max(1.0 - p_plus - p_minus, 0.0)
        probs = np.array([p_plus, p_minus, p_lost])
        probs /= probs.sum()
        gen = stream.child("shots", idx).generator()
        n_plus, n_minus, _ = gen.multinomial(n, probs)
        if ctx.kind == "purity":
            total += _unbiased_square_from_counts(n_plus, n_minus, n)
        else:
            total += (n_plus - n_minus) / n
    if ctx.kind == "purity":
        return float(ctx.purity_scale * total)
    return float(total / len(mus))


def _estimate_item(ctx: _RunContext, m: int, seq_index: int) -> float:
    stream = RngStream(ctx.seed, (ctx.kind, int(m), int(seq_index)))
    sequence = sample_sequence(m, ctx.n_gates, stream.child("seq"))
    return _sequence_estimate(ctx, sequence, stream)


def _estimate_batch(args) -> list[float]:
    ctx, items = args
    return [_estimate_item(ctx, m, k) for m, k in items]


def purity_estimate(sequence, config: ProtocolConfig, seq_index: int = 0) -> float:
    """Single-sequence purity estimate under the configured SPAM and shots.

    Sums the unbiased squared expectation estimates over the configured
    observables, scaled by 1/(d-1) so that with the default Pauli set the
    expectation over shots equals d/(d-1) times the squared Bloch length of
    the sequence output state.
    """
    ctx = _build_context(config, "purity")
    sequence = np.asarray(sequence, dtype=int)
    stream = RngStream(ctx.seed, ("purity", int(len(sequence)), int(seq_index)))
    return _sequence_estimate(ctx, sequence, stream)


def _run_protocol(config: ProtocolConfig, kind: str, workers: int = 1) -> DecayDataset:
    if kind == "loss" and config.observables is not None and len(config.observables) != 1:
        raise ValueError("the loss protocol measures exactly one observable")
    ctx = _build_context(config, kind)
    items = [(m, k) for m in config.lengths for k in range(config.sequences_per_length)]

    if workers > 1:
        chunks = [items[i::workers] for i in range(workers)]
        with multiprocessing.Pool(workers) as pool:
            results = pool.map(_estimate_batch, [(ctx, chunk) for chunk in chunks])
        estimates = dict(zip((it for chunk in chunks for it in chunk),
                             (e for batch in results for e in batch)))
    else:
        estimates = {it: _estimate_item(ctx, *it) for it in items}

    lengths = np.array(sorted(set(config.lengths)), dtype=int)
    mean = np.empty(len(lengths))
    stderr = np.empty(len(lengths))
    raw_rows = []
    for i, m in enumerate(lengths):
        vals = np.array([estimates[(m, k)] for k in range(config.sequences_per_length)])
        mean[i] = vals.mean()
        stderr[i] = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else 0.0
        raw_rows.extend((m, k, vals[k]) for k in range(len(vals)))
    return DecayDataset(
        kind=kind,
        lengths=lengths,
        mean=mean,
        stderr=stderr,
        sequences_per_length=config.sequences_per_length,
        shots_per_observable=config.shots_per_observable,
        raw=np.array(raw_rows),
    )


def run_purity_protocol(config: ProtocolConfig, workers: int = 1) -> DecayDataset:
    """Simulate the squared-expectation (purity) protocol."""
    return _run_protocol(config, "purity", workers)


def run_loss_protocol(config: ProtocolConfig, workers: int = 1) -> DecayDataset:
    """Simulate the first-moment (survival/loss) protocol."""
    return _run_protocol(config, "loss", workers)


# --- exact references --------------------------------------------------------

def exact_expectation(q, sequence, rho, noise, gateset: GateSet) -> float:
    """Noiseless-statistics expectation of ``q`` after a gate sequence.

    The noise channel is inserted before every gate except the first; any
    residual noise around the first gate is taken to be absorbed into the
    prepared state ``rho``.
    """
    basis = channels.default_basis(gateset.dim)
    gate_mats = designs.gate_superoperators(gateset, basis)
    noise_mats, _ = _noise_superoperators(noise, gateset, basis)
    sequence = np.asarray(sequence, dtype=int)
    v = channels.coeff_vector(rho, basis)
    v = gate_mats[sequence[0]] @ v
    for g in sequence[1:]:
        v = gate_mats[g] @ (noise_mats[g] @ v)
    return float(channels.coeff_vector(q, basis) @ v)


def brute_force_mean_squares(m: int, q, rho, noise, gateset: GateSet) -> float:
    """Average of squared expectations over every length-``m`` sequence."""
    if len(gateset) ** m > 2 * 10**4:
        raise ValueError(f"{len(gateset)}^{m} sequences is too many to enumerate")
    basis = channels.default_basis(gateset.dim)
    gate_mats = designs.gate_superoperators(gateset, basis)
    noise_mats, _ = _noise_superoperators(noise, gateset, basis)
    pair_mats = np.einsum("gij,gjk->gik", gate_mats, noise_mats)
    states = (gate_mats @ channels.coeff_vector(rho, basis)).reshape(len(gateset), -1)
    for _ in range(m - 1):
        states = np.einsum("gij,pj->pgi", pair_mats, states).reshape(-1, basis.size)
    values = states @ channels.coeff_vector(q, basis)
    return float(np.mean(values**2))


def _invariant_components(vec: np.ndarray) -> np.ndarray:
    n = len(vec)
    return np.array([vec[0] ** 2, np.sum(vec[1:] ** 2) / np.sqrt(n - 1.0)])


def _decay_matrix_for(noise, gateset: GateSet, basis: OperatorBasis) -> np.ndarray:
    if isinstance(noise, GateDependentNoise):
        sup = noise.average_superoperator(basis)
    elif isinstance(noise, KrausChannel):
        sup = channels.kraus_to_liouville(noise, basis)
    else:
        sup = noise
    return metrics.m_matrix(sup).as_array()


def _decay_curve(mat2: np.ndarray, q2: np.ndarray, r2: np.ndarray, m_list) -> np.ndarray:
    m_list = np.asarray(m_list, dtype=int)
    out = np.empty(len(m_list), dtype=float)
    order = np.argsort(m_list)
    w = r2.copy()
    power = 0  # w holds mat2^power @ r2
    for pos in order:
        target = int(m_list[pos]) - 1
        while power < target:
            w = mat2 @ w
            power += 1
        out[pos] = q2 @ w
    return out


def theoretical_decay(noise, gateset: GateSet, q, rho, m_list) -> np.ndarray:
    """Exact sequence-averaged squared expectations for each length.

    Computed by projecting the endpoints onto the twirl-invariant plane and
    repeatedly applying the 2 x 2 decay matrix.  Gate-dependent noise is
    replaced by its gate-averaged channel.
    """
    basis = channels.default_basis(gateset.dim)
    mat2 = _decay_matrix_for(noise, gateset, basis)
    q2 = _invariant_components(channels.coeff_vector(q, basis))
    r2 = _invariant_components(channels.coeff_vector(rho, basis))
    return _decay_curve(mat2, q2, r2, m_list)


def theoretical_loss(noise, gateset: GateSet, q, rho, m_list) -> np.ndarray:
    """Exact sequence-averaged first moments C * S^(m-1)."""
    basis = channels.default_basis(gateset.dim)
    if isinstance(noise, GateDependentNoise):
        sup = noise.average_superoperator(basis)
    elif isinstance(noise, KrausChannel):
        sup = channels.kraus_to_liouville(noise, basis)
    else:
        sup = noise
    survival = metrics.survival_rate(sup)
    c0 = float(
        channels.coeff_vector(q, basis)[0] * channels.coeff_vector(rho, basis)[0]
    )
    m_list = np.asarray(m_list, dtype=int)
    return c0 * survival ** (m_list - 1.0)


def theoretical_protocol_curve(config: ProtocolConfig, kind: str = "purity") -> np.ndarray:
    """Model prediction for a configured run, including its realized SPAM.

    Uses the same SPAM draw as the simulation (it is seed-derived), so the
    returned curve is directly comparable to the dataset means.
    """
    ctx = _build_context(config, kind)
    basis = channels.default_basis(config.gateset.dim)
    m_list = np.array(sorted(set(config.lengths)), dtype=int)
    if kind == "loss":
        noise_mats, _ = _noise_superoperators(config.noise, config.gateset, basis)
        survival = float(noise_mats.mean(axis=0)[0, 0])
        c0 = float(ctx.obs_vecs[0][0] * ctx.rho_vec[0])
        return c0 * survival ** (m_list - 1.0)
    mat2 = _decay_matrix_for(config.noise, config.gateset, basis)
    r2 = _invariant_components(ctx.rho_vec)
    total = np.zeros(len(m_list))
    for vec in ctx.obs_vecs:
        total += _decay_curve(mat2, _invariant_components(vec), r2, m_list)
    return ctx.purity_scale * total
