"""Command-line interface.

Subcommands: ``channel-info`` (metrics report for a channel specifier),
``simulate`` (run the purity or loss protocol to CSV + figure), ``fit``
(fit a decay CSV), ``scan-ensemble`` (random-channel scan to CSV +
figures) and ``verify`` (run the verification suite).

Every command is a pure function of its flags, config file and seed:
identical inputs give byte-identical output files, and each run that
writes files also writes a manifest with their SHA-256 digests.

Exit codes: 0 success, 1 input error, 2 numeric non-convergence,
3 verification failure.
"""

from __future__ import annotations

import datetime
import hashlib
import json
import os
import sys
from pathlib import Path

import click

from . import __version__, channels, ensembles, fitting, metrics, plotting, protocol, verify
from .designs import clifford_1q
from .ensembles import ChannelSpecError, RngStream
from .protocol import CsvSchemaError, ProtocolConfig, SpamModel

_WORKERS_ENV = "PURITYRB_WORKERS"


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(_WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(directory: Path, command: str, config: dict, seed, outputs, started_at) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "started_at": started_at,
        "finished_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _parse_lengths(text: str) -> tuple[int, ...]:
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (2, 3):
            raise click.UsageError(f"bad length range {text!r}; use start:stop[:step]")
        start, stop = int(parts[0]), int(parts[1])
        step = int(parts[2]) if len(parts) == 3 else 1
        values = tuple(range(start, stop + 1, step))
    else:
        values = tuple(int(tok) for tok in text.split(",") if tok.strip())
    if not values or min(values) < 1:
        raise click.UsageError(f"sequence lengths must be positive, got {text!r}")
    return values


def _channel_from_spec(spec: str) -> channels.KrausChannel:
    try:
        return ensembles.parse_channel_spec(spec)
    except ChannelSpecError as exc:
        raise click.UsageError(str(exc)) from exc


@click.group()
@click.version_option(__version__, prog_name="purityrb")
def cli():
    """Estimate the coherence (unitarity) of quantum noise channels."""


@cli.command("channel-info")
@click.argument("spec")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the JSON report to a file instead of stdout.")
@click.option("--restarts", default=20, show_default=True,
              help="Restarts for the optimized-infidelity search.")
@click.option("--seed", default=0, show_default=True)
def channel_info(spec, out, restarts, seed):
    """Full metrics report for the channel SPEC (e.g. dep:0.1, reset:0.003)."""
    channel = _channel_from_spec(spec)
    sup = channels.kraus_to_liouville(channel)
    mat = metrics.m_matrix(sup)
    lam_p, lam_m = metrics.decay_eigenvalues(mat)
    bounds = metrics.check_norm_bounds(sup)
    chain = metrics.check_infidelity_chain(sup, restarts=restarts, seed=seed)
    jam = metrics.check_jamiolkowski_identity(channel)
    report = {
        "d": channel.dim,
        "unitarity": metrics.unitarity(sup),
        "survival": metrics.survival_rate(sup),
        "infidelity": chain.infidelity,
        "optimized_infidelity_upper": chain.optimized_infidelity_upper,
        "lambda_plus": lam_p,
        "lambda_minus": lam_m,
        "norm_bound_residuals": {
            "nonunital": bounds.nonunital_residual,
            "sdl": bounds.sdl_residual,
            "tp": bounds.tp_residual,
        },
        "chain_residuals": {
            "first": chain.first_residual,
            "second": chain.second_residual,
            "lower_bound": chain.lower_bound_residual,
            "bracket_valid": chain.bracket_valid,
        },
        "jamiolkowski_residual": jam.residual,
    }
    text = json.dumps(report, indent=2) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        started = _now()
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        _write_manifest(out.parent, "channel-info", {"spec": spec, "restarts": restarts},
                        seed, [out], started)
    return 0


# config-file key -> click parameter name
_SIMULATE_KEYS = {
    "noise": "noise",
    "protocol": "protocol_kind",
    "lengths": "lengths",
    "sequences": "sequences",
    "shots": "shots",
    "spam": "spam",
    "seed": "seed",
    "perturb_gates": "perturb_gates",
    "workers": "workers",
}


def _load_config_file(path: Path, allowed) -> dict:
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise click.UsageError(f"config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise click.UsageError(f"config file {path} must hold a JSON object")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise click.UsageError(
            f"config file {path} has unknown fields: {', '.join(unknown)}"
        )
    return data


def _merged(ctx, config_path: Path | None, keys: dict[str, str]) -> dict:
    """Config-file values overridden by explicitly given command-line flags."""
    merged = {}
    if config_path is not None:
        merged.update(_load_config_file(config_path, keys))
    for key, param in keys.items():
        source = ctx.get_parameter_source(param)
        if source is not None and source.name == "COMMANDLINE":
            merged[key] = ctx.params[param]
        else:
            merged.setdefault(key, ctx.params[param])
    return merged


@cli.command("simulate")
@click.option("--noise", default="compose:[reset:0.003,haar:7]", show_default=True,
              help="Noise channel specifier.")
@click.option("--protocol", "protocol_kind", type=click.Choice(["purity", "loss"]),
              default="purity", show_default=True)
@click.option("--lengths", default="2:100:2", show_default=True,
              help="Sequence lengths: start:stop[:step] or comma list.")
@click.option("--sequences", default=30, show_default=True, help="Sequences per length.")
@click.option("--shots", default=150, show_default=True, help="Shots per observable.")
@click.option("--spam", type=click.Choice(["on", "off"]), default="on", show_default=True)
@click.option("--perturb-gates", "perturb_gates", type=float, default=None,
              help="Compose the noise with per-gate eigenphase perturbations "
                   "drawn uniformly from [-DELTA, DELTA].")
@click.option("--seed", default=0, show_default=True)
@click.option("--workers", default=None, type=int,
              help=f"Worker processes (default: ${_WORKERS_ENV} or 1).")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path),
              default=None, help="JSON config file; flags override its fields.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=Path("purityrb_run"),
              show_default=True)
@click.option("--plot/--no-plot", default=True, show_default=True,
              help="Render the decay figure alongside the CSVs.")
@click.pass_context
def simulate(ctx, noise, protocol_kind, lengths, sequences, shots, spam,
             perturb_gates, seed, workers, config_path, out, plot):
    """Simulate the sequence protocol and write raw + aggregate CSVs."""
    params = _merged(ctx, config_path, _SIMULATE_KEYS)
    protocol_kind = params["protocol"]
    if protocol_kind not in ("purity", "loss"):
        raise click.UsageError(f"protocol must be 'purity' or 'loss', got {protocol_kind!r}")
    started = _now()

    gateset = clifford_1q()
    base = _channel_from_spec(params["noise"])
    if params["perturb_gates"] is not None:
        rotations = ensembles.eigenvalue_perturbed_gates(
            gateset.unitaries, float(params["perturb_gates"]),
            RngStream(int(params["seed"]), ("gate-perturbations",)),
        )
        noise_model = ensembles.compose_with_gate_noise(base, rotations)
    else:
        noise_model = base

    lengths_value = params["lengths"]
    lengths_tuple = (_parse_lengths(lengths_value) if isinstance(lengths_value, str)
                     else tuple(int(v) for v in lengths_value))
    if params["spam"] not in ("on", "off"):
        raise click.UsageError(f"spam must be 'on' or 'off', got {params['spam']!r}")
    try:
        config = ProtocolConfig(
            gateset=gateset,
            noise=noise_model,
            lengths=lengths_tuple,
            sequences_per_length=int(params["sequences"]),
            shots_per_observable=int(params["shots"]),
            spam=SpamModel() if params["spam"] == "on" else None,
            seed=int(params["seed"]),
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    n_workers = int(params["workers"]) if params["workers"] else _default_workers()

    if protocol_kind == "purity":
        dataset = protocol.run_purity_protocol(config, workers=n_workers)
        aggregate_name = "aggregate.csv"
    else:
        dataset = protocol.run_loss_protocol(config, workers=n_workers)
        aggregate_name = "loss.csv"

    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    raw_path = out / "raw.csv"
    dataset.to_raw_csv(raw_path)
    outputs.append(raw_path)
    agg_path = out / aggregate_name
    dataset.to_aggregate_csv(agg_path)
    outputs.append(agg_path)
    if plot:
        theory = protocol.theoretical_protocol_curve(config, kind=protocol_kind)
        fig_path = out / "decay.png"
        plotting.render_decay_figure(dataset, fig_path, theory=theory,
                                     title=f"{protocol_kind} protocol: {params['noise']}")
        outputs.append(fig_path)

    echo = {k: (list(v) if isinstance(v, tuple) else v) for k, v in params.items()}
    echo["lengths"] = list(lengths_tuple)
    _write_manifest(out, "simulate", echo, int(params["seed"]), outputs, started)
    click.echo(f"wrote {', '.join(p.name for p in outputs)} to {out}")
    return 0


@cli.command("fit")
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--model", type=click.Choice(["tp", "td", "loss"]), default="tp", show_default=True)
@click.option("--bootstrap", is_flag=True, help="Bootstrap confidence intervals.")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the fit report to a file instead of stdout.")
@click.option("--seed", default=0, show_default=True)
def fit_command(csv_path, model, bootstrap, out, seed):
    """Fit a decay model to an aggregate CSV and report parameters as JSON."""
    try:
        dataset = protocol.load_aggregate_csv(csv_path)
    except CsvSchemaError as exc:
        raise click.UsageError(f"{csv_path}: {exc}") from exc
    fitter = {"tp": fitting.fit_tp_decay, "td": fitting.fit_td_decay, "loss": fitting.loss_fit}[model]
    try:
        result = fitter(dataset, bootstrap=bootstrap, seed=seed)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc
    text = json.dumps(result.to_dict(), indent=2) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        started = _now()
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)
        _write_manifest(out.parent, "fit", {"csv": str(csv_path), "model": model},
                        seed, [out], started)
    return 0 if result.converged else 2


@cli.command("scan-ensemble")
@click.option("--ranks", default="1,2,3,4", show_default=True)
@click.option("--samples", default=1000, show_default=True)
@click.option("--seed", default=verify.DEFAULT_SEED, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path),
              default=Path("purityrb_scan"), show_default=True)
@click.option("--plot/--no-plot", default=True, show_default=True)
def scan_ensemble(ranks, samples, seed, out, plot):
    """Unitarity and infidelity of random channels by Kraus rank."""
    try:
        rank_list = tuple(int(tok) for tok in ranks.split(",") if tok.strip())
    except ValueError as exc:
        raise click.UsageError(f"bad rank list {ranks!r}") from exc
    if not rank_list or any(r < 1 or r > 4 for r in rank_list):
        raise click.UsageError("ranks must lie in 1..4 for qubit channels")
    started = _now()
    rows = verify.ensemble_scan_rows(rank_list, samples, seed)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    csv_path = out / "scan.csv"
    with open(csv_path, "w") as fh:
        fh.write("rank,sample,unitarity,infidelity\n")
        for rank, index, u, r in rows:
            fh.write(f"{int(rank)},{int(index)},{u:.17g},{r:.17g}\n")
    outputs.append(csv_path)
    if plot:
        rank_fig = out / "unitarity_by_rank.png"
        scatter_fig = out / "unitarity_vs_fidelity.png"
        plotting.render_scan_figures(rows, rank_fig, scatter_fig)
        outputs.extend([rank_fig, scatter_fig])
    _write_manifest(out, "scan-ensemble",
                    {"ranks": list(rank_list), "samples": samples}, seed, outputs, started)
    click.echo(f"wrote {', '.join(p.name for p in outputs)} to {out}")
    return 0


@cli.command("verify")
@click.option("--level", type=click.Choice(["quick", "full"]), default="quick", show_default=True)
@click.option("--seed", default=verify.DEFAULT_SEED, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the JSON report to a file as well.")
@click.option("--tolerance-scale", default=1.0, hidden=True,
              help="Test hook: rescale every tolerance.")
def verify_command(level, seed, out, tolerance_scale):
    """Run the verification suite; exit 0 only if every check passes."""
    results = verify.run_checks(level=level, seed=seed, tolerance_scale=tolerance_scale)
    for r in results:
        click.echo(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  ({r.seconds:.2f} s)")
    report = verify.report_to_dict(results)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report, indent=2) + "\n")
    ok = report["passed"]
    click.echo("all checks passed" if ok else "verification FAILED")
    return 0 if ok else 3


def main(argv=None) -> int:
    """Console entry point with the documented exit codes."""
    try:
        code = cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        click.echo(f"error: {exc.format_message()}", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.exceptions.Abort:
        return 1
    return int(code) if isinstance(code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
