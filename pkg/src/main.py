"""PRAC toolkit command-line entry point."""
import asyncio
import functools
import logging
import sys
from pathlib import Path
from typing import List, Optional

import click
import numpy as np

from src.coding import fountain, gf256, keycode
from src.coding.gf256 import FieldMatrix
from src.config import get_settings
from src.exceptions import (
    AuditFailure,
    ConfigurationError,
    DomainException,
    NetTimeoutError,
    VerificationFailure,
)
from src.logging_config import setup_logging
from src.schemas import (
    AdversaryRule,
    C3PWorkers,
    EpsilonMode,
    RunManifest,
    Scenario,
    Scheme,
    SimConfig,
)

settings = get_settings()
logger = logging.getLogger(__name__)

EXIT_USAGE = 2
EXIT_FAILED_CHECK = 3
EXIT_TIMEOUT = 4


def domain_errors(command):
    """Map domain exceptions to exit codes in one place."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (AuditFailure, VerificationFailure) as exc:
            click.echo(f"FAIL: {exc}", err=True)
            for subset in getattr(exc, "subsets", []):
                click.echo(f"  singular subset: {subset}", err=True)
            raise click.exceptions.Exit(EXIT_FAILED_CHECK)
        except NetTimeoutError as exc:
            click.echo(f"TIMEOUT: {exc}", err=True)
            raise click.exceptions.Exit(EXIT_TIMEOUT)
        except ConfigurationError as exc:
            raise click.UsageError(str(exc))
        except DomainException as exc:
            click.echo(f"ERROR: {exc}", err=True)
            raise click.exceptions.Exit(1)

    return wrapper


def _manifest(ctx: click.Context, seed: int, endpoints: Optional[List[str]] = None) -> RunManifest:
    params = {k: v for k, v in ctx.params.items() if k not in ("out", "jobs", "transcript_out")}
    params = {k: list(v) if isinstance(v, tuple) else v for k, v in params.items()}
    return RunManifest(
        subcommand=ctx.command.name,
        params=params,
        endpoints=list(endpoints or []),
        out=str(ctx.params.get("out")) if ctx.params.get("out") else None,
        seed=seed,
    )


def _parse_lambdas(raw: Optional[str]) -> Optional[List[float]]:
    if not raw:
        return None
    try:
        return [float(v) for v in raw.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"not a comma-separated list of numbers: {raw!r}", param_hint="--lambdas")


def _sim_config(**fields) -> SimConfig:
    try:
        return SimConfig(**fields)
    except ValueError as exc:
        raise click.UsageError(str(exc))


@click.group()
@click.option("--log-level", default=settings.log_level, show_default=True, help="Logging level")
@click.option("--json-logs/--plain-logs", default=settings.log_json, help="Structured JSON logs on stderr")
def cli(log_level: str, json_logs: bool):
    """Private, rateless, adaptive coded matrix-vector multiplication."""
    setup_logging(log_level.upper(), json_output=json_logs)


# -- simulate -----------------------------------------------------------------

SCHEME_CHOICES = ["all"] + [s.value for s in Scheme]


@cli.command("simulate")
@click.option("--scheme", "schemes", multiple=True, type=click.Choice(SCHEME_CHOICES), default=["all"], show_default=True)
@click.option("--scenario", type=click.Choice([s.value for s in Scenario]), default="1", show_default=True)
@click.option("--n", type=int, default=50, show_default=True)
@click.option("--z", type=int, default=13, show_default=True)
@click.option("--b", type=int, default=None, help="Row blocks (defaults to m)")
@click.option("--m", type=int, default=1000, show_default=True)
@click.option("--ell", type=int, default=1000, show_default=True)
@click.option("--lam", type=float, default=1.0, show_default=True, help="Rate for the homogeneous scenario")
@click.option("--lambdas", default=None, help="Comma-separated rates for the custom scenario")
@click.option("--trials", type=int, default=settings.default_trials, show_default=True)
@click.option("--seed", type=int, default=settings.seed, show_default=True, help="Base seed (PRAC_SEED)")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="CSV path (stdout if omitted)")
@click.option("--adversary-rule", type=click.Choice([r.value for r in AdversaryRule]), default="random", show_default=True)
@click.option("--c3p-workers", type=click.Choice([c.value for c in C3PWorkers]), default="all", show_default=True)
@click.option("--sweep", default=None, help="Sweep one parameter, e.g. z:1..40")
@click.option("--paired/--unpaired", default=True, show_default=True, help="Share delay draws across schemes")
@click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes for trials")
@click.pass_context
@domain_errors
def cmd_simulate(ctx, schemes, scenario, n, z, b, m, ell, lam, lambdas, trials, seed, out,
                 adversary_rule, c3p_workers, sweep, paired, jobs):
    """Run simulation batches and write one CSV row per (point, scheme, trial)."""
    from src.simulate import batch as sim_batch
    from src.simulate.records import records_to_csv, save_records

    if trials < 1:
        raise click.BadParameter("must be >= 1", param_hint="--trials")
    chosen = list(Scheme) if "all" in schemes else [Scheme(s) for s in schemes]
    config = _sim_config(
        n=n, z=z, b=b or m, m=m, ell=ell, scenario=scenario, lam=lam,
        lambdas=_parse_lambdas(lambdas), adversary_rule=adversary_rule,
        c3p_workers=c3p_workers, seed=seed,
    )

    if sweep:
        param, points = sim_batch.parse_sweep(sweep)
        runs = sim_batch.run_sweep(config, param, points, trials, chosen, paired, jobs)
    else:
        runs = [(None, sim_batch.batch(config, trials, chosen, paired, jobs))]

    records = [record for _, result in runs for record in result.records]
    manifest = _manifest(ctx, seed)
    if out is None:
        click.echo(records_to_csv(records, manifest), nl=False)
    else:
        save_records(out, records, manifest)

    to_stderr = out is None
    for point, result in runs:
        prefix = "" if point is None else f"{sweep.split(':')[0]}={point} "
        for summary in result.summaries.values():
            extra = f" k={summary.staircase_k}" if summary.staircase_k else ""
            click.echo(
                f"{prefix}{summary.scheme.value:<9} mean {summary.mean:.4f}s "
                f"95% CI [{summary.ci_low:.4f}, {summary.ci_high:.4f}]{extra}",
                err=to_stderr,
            )
        if result.gate_violations or result.incorrect:
            raise DomainException(
                f"{result.incorrect} wrong products, {result.gate_violations} round-gate violations"
            )


# -- audit-privacy ------------------------------------------------------------

@cli.command("audit-privacy")
@click.option("--n", type=int, required=True)
@click.option("--z", type=int, required=True)
@click.option("--rounds", type=int, default=3, show_default=True)
@click.option("--seed", type=int, default=settings.seed, show_default=True)
@click.option("--pad-samples", type=int, default=100_000, show_default=True)
@click.option("--alpha", type=float, default=0.01, show_default=True, help="Significance level of the pad uniformity test")
@click.option("--corrupt-duplicate-row", is_flag=True, help="Copy row n-1 of G over row n (negative control)")
@domain_errors
def cmd_audit_privacy(n, z, rounds, seed, pad_samples, alpha, corrupt_duplicate_row):
    """Check that any z packets of a round determine its keys."""
    from src.prac.audit import MAX_EXHAUSTIVE_N, run_privacy_audit

    if not 0 < z < n <= MAX_EXHAUSTIVE_N:
        raise click.UsageError(f"need 0 < z < n <= {MAX_EXHAUSTIVE_N}, got n={n}, z={z}")
    generator = keycode.build_generator(n, z)
    if corrupt_duplicate_row:
        data = generator.G.data.copy()
        data[n - 1] = data[n - 2]
        generator = keycode.KeyGenerator.from_matrix(FieldMatrix(data))
    report = run_privacy_audit(
        n, z, rounds, np.random.default_rng(seed), generator=generator, pad_samples=pad_samples, alpha=alpha
    )
    click.echo(
        f"PASS: n={n} z={z} rounds={rounds}: {report.subsets_checked} subsets invertible, "
        f"{report.keys_recovered} key recoveries, pad uniformity p={report.pad_pvalue:.4f}"
    )


# -- fountain-overhead --------------------------------------------------------

@cli.command("fountain-overhead")
@click.option("--b", type=int, required=True)
@click.option("--trials", type=int, default=200, show_default=True)
@click.option("--seed", type=int, default=settings.seed, show_default=True)
@click.option("--c", "c_param", type=float, default=settings.fountain_c, show_default=True)
@click.option("--delta", type=float, default=settings.fountain_delta, show_default=True)
@domain_errors
def cmd_fountain_overhead(b, trials, seed, c_param, delta):
    """Measure LT decoding overhead epsilon/b."""
    if b < 1 or trials < 1:
        raise click.UsageError("b and trials must be positive")
    rng = np.random.default_rng(seed)
    dist = fountain.robust_soliton(b, c=c_param, delta=delta)
    ratios = np.array([fountain.measure_overhead(b, rng, dist) / b for _ in range(trials)])
    quantiles = np.quantile(ratios, [0.0, 0.25, 0.5, 0.75, 0.9, 1.0])
    click.echo(f"b={b} trials={trials} seed={seed} nominal={settings.nominal_overhead:.2f}")
    for label, value in zip(["min", "q25", "median", "q75", "q90", "max"], quantiles):
        click.echo(f"{label:>6} eps/b = {value:.4f}")


# -- theory -------------------------------------------------------------------

@cli.command("theory")
@click.option("--scenario", type=click.Choice([s.value for s in Scenario]), default="1", show_default=True)
@click.option("--n", type=int, default=50, show_default=True)
@click.option("--z", type=int, default=13, show_default=True)
@click.option("--b", type=int, default=1000, show_default=True)
@click.option("--lam", type=float, default=1.0, show_default=True)
@click.option("--lambdas", default=None)
@click.option("--epsilon-mode", type=click.Choice([e.value for e in EpsilonMode]), default="nominal", show_default=True)
@click.option("--trials", type=int, default=20, show_default=True, help="Decoder runs for measured epsilon")
@click.option("--ell", type=int, default=1000, show_default=True, help="Columns, for the RTT term")
@click.option("--with-rtt", is_flag=True, help="Add the largest mean round trip")
@click.option("--d-star", type=int, default=None, help="Staircase d* (optimal if omitted)")
@click.option("--seed", type=int, default=settings.seed, show_default=True)
@domain_errors
def cmd_theory(scenario, n, z, b, lam, lambdas, epsilon_mode, trials, ell, with_rtt, d_star, seed):
    """Evaluate the closed-form completion estimates and the gap bound."""
    from src.simulate import delays, theory

    config = _sim_config(
        n=n, z=z, b=b, m=b, ell=ell, scenario=scenario, lam=lam,
        lambdas=_parse_lambdas(lambdas), seed=seed,
    )
    if EpsilonMode(epsilon_mode) == EpsilonMode.MEASURED:
        rng = np.random.default_rng(seed)
        dist = fountain.robust_soliton(b, settings.fountain_c, settings.fountain_delta)
        epsilon = float(np.mean([fountain.measure_overhead(b, rng, dist) for _ in range(trials)]))
    else:
        epsilon = float(fountain.nominal_overhead(b, settings.nominal_overhead))

    model = delays.build_delay_model(config, trial=0)
    betas = delays.expected_packet_service(model, b)
    rtt = None
    if with_rtt:
        bits = delays.packet_bits(config) + delays.result_bits(config)
        rtt = [bits / c for c in model.capacities]
    estimate = theory.prac_completion_estimate(betas, z, b, epsilon, rtt=rtt)
    click.echo(f"epsilon ({epsilon_mode}) = {epsilon:.2f}")
    click.echo(f"PRAC estimate          = {estimate:.4f}s")
    if z > 0:
        d = d_star or theory.optimal_d(betas, z, b)
        click.echo(f"Staircase d*           = {d}")
        click.echo(f"Staircase dominant     = {theory.staircase_expected(betas, z, b):.4f}s")
        click.echo(f"gap lower bound        = {theory.staircase_gap_bound(betas, z, b, d, epsilon):.4f}s")


# -- networked runtime --------------------------------------------------------

@cli.command("net-worker")
@click.option("--listen", required=True, help="host:port to listen on")
@click.option("--delay-mean", type=float, default=0.0, show_default=True, help="Mean artificial delay (s); 0 disables")
@click.option("--seed", type=int, default=None, help="Delay seed")
@domain_errors
def cmd_net_worker(listen, delay_mean, seed):
    """Serve one master until STOP."""
    from src.netproto.worker import run_worker

    server = asyncio.run(run_worker(listen, delay_mean=delay_mean, seed=seed))
    computed = server.session.computed if server.session else 0
    click.echo(f"worker {listen} stopped after {computed} packets")


@cli.command("net-master")
@click.option("--worker", "workers", multiple=True, required=True, help="Worker host:port (repeat)")
@click.option("--z", type=int, default=2, show_default=True)
@click.option("--m", type=int, default=60, show_default=True)
@click.option("--ell", type=int, default=1000, show_default=True)
@click.option("--b", type=int, default=None, help="Row blocks (defaults to m)")
@click.option("--seed", type=int, default=settings.seed, show_default=True)
@click.option("--timeout", type=float, default=settings.net_timeout_s, show_default=True)
@click.option("--verify", is_flag=True, help="Compare with local multiplication and print PASS/FAIL")
@click.option("--hide-x", is_flag=True, help="Split workers into two groups and hide x")
@click.option("--group-split", type=int, default=None, help="Workers in group 1 (half by default)")
@click.option("--z2", type=int, default=None, help="Collusion bound of group 2 (defaults to --z)")
@click.option("--transcript-out", type=click.Path(dir_okay=False, path_type=Path), default=None)
@click.pass_context
@domain_errors
def cmd_net_master(ctx, workers, z, m, ell, b, seed, timeout, verify, hide_x, group_split, z2, transcript_out):
    """Compute Ax for a seeded random A and x on remote workers."""
    from src.netproto.master import run_master, run_master_hidden

    rng = np.random.default_rng(seed)
    A = FieldMatrix.random(m, ell, rng)
    x = FieldMatrix.random(ell, 1, rng)
    workers = list(workers)
    click.echo(_manifest(ctx, seed, endpoints=workers).to_comment())

    if hide_x:
        split = group_split or len(workers) // 2
        group1, group2 = workers[:split], workers[split:]
        outcome = asyncio.run(run_master_hidden(
            group1, group2, A, x, z, z2 if z2 is not None else z, rng, b=b, timeout=timeout,
        ))
        result = outcome.result
        transcripts = [run.transcript for run in outcome.groups]
        leaked = transcripts[0].frames_with_payload(x.to_bytes())
        if leaked:
            raise VerificationFailure(f"{len(leaked)} group-1 frames carry the raw x")
    else:
        outcome = asyncio.run(run_master(workers, A, x, z, rng, b=b, timeout=timeout))
        result = outcome.result
        transcripts = [outcome.transcript]
        click.echo(f"decoded in {outcome.elapsed:.3f}s with {outcome.state.packets_sent} packets")

    for i, transcript in enumerate(transcripts):
        problems = [f"worker {w} round {t}: {why}" for w, t, why in transcript.causality_violations()]
        ids = {e.worker for e in transcript.entries}
        problems += transcript.stop_violations(sorted(ids))
        if problems:
            raise VerificationFailure("transcript audit failed: " + "; ".join(problems))
        if transcript_out is not None:
            path = transcript_out if len(transcripts) == 1 else transcript_out.with_name(
                f"{transcript_out.stem}.group{i + 1}{transcript_out.suffix}"
            )
            transcript.to_csv(path)

    if verify:
        if result != gf256.mat_vec_mul(A, x):
            raise VerificationFailure("networked result differs from local Ax")
        click.echo("PASS")


if __name__ == "__main__":
    cli()
