"""
Seeded batches of trials and their summaries.
"""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.exceptions import ConfigurationError
from src.schemas import BatchSummary, CompletionRecord, Scheme, SimConfig
from src.simulate import engine, staircase

logger = logging.getLogger(__name__)

SCHEME_ORDER: Tuple[Scheme, ...] = (Scheme.PRAC, Scheme.STAIRCASE, Scheme.C3P, Scheme.GC3P)
SCHEME_SALT: Dict[Scheme, int] = {scheme: i for i, scheme in enumerate(SCHEME_ORDER)}


@dataclass
class BatchResult:
    records: List[CompletionRecord] = field(default_factory=list)
    summaries: Dict[Scheme, BatchSummary] = field(default_factory=dict)
    gate_violations: int = 0
    incorrect: int = 0


@dataclass
class _TrialOutput:
    trial: int
    records: Dict[Scheme, CompletionRecord]
    staircase_by_k: Optional[Dict[int, float]]
    gate_violations: int
    incorrect: int


def _salt(scheme: Scheme, paired: bool) -> Optional[int]:
    return None if paired else SCHEME_SALT[scheme]


def _run_trial(config: SimConfig, schemes: Tuple[Scheme, ...], trial: int, paired: bool) -> _TrialOutput:
    records: Dict[Scheme, CompletionRecord] = {}
    by_k = None
    violations = incorrect = 0
    for scheme in schemes:
        if scheme == Scheme.STAIRCASE:
            by_k = staircase.staircase_trial(config, trial, _salt(scheme, paired))
            continue
        record, outcome = engine.run_adaptive(config, scheme, trial, _salt(scheme, paired))
        records[scheme] = record
        if not outcome.trace.respects_gate():
            violations += 1
        if not outcome.correct:
            incorrect += 1
    return _TrialOutput(trial, records, by_k, violations, incorrect)


def summarize(scheme: Scheme, records: Sequence[CompletionRecord], staircase_k: Optional[int] = None) -> BatchSummary:
    """Mean and Student-t 95% interval of completion times."""
    times = np.array([r.completion_time_s for r in records], dtype=np.float64)
    if times.size == 0:
        raise ConfigurationError(f"no records to summarize for {scheme.value}")
    mean = float(times.mean())
    std = float(times.std(ddof=1)) if times.size > 1 else 0.0
    if times.size > 1 and std > 0:
        low, high = stats.t.interval(0.95, times.size - 1, loc=mean, scale=std / np.sqrt(times.size))
    else:
        low = high = mean
    epsilons = [r.epsilon_observed for r in records if r.epsilon_observed is not None]
    return BatchSummary(
        scheme=scheme,
        trials=int(times.size),
        mean=mean,
        std=std,
        ci_low=float(low),
        ci_high=float(high),
        mean_epsilon=float(np.mean(epsilons)) if epsilons else None,
        staircase_k=staircase_k,
    )


def batch(
    config: SimConfig,
    trials: int,
    schemes: Sequence[Scheme] = SCHEME_ORDER,
    paired: bool = True,
    jobs: int = 1,
) -> BatchResult:
    """Run `trials` trials of each scheme.

    Deterministic for a given config seed, whatever `jobs` is. With `paired`
    every scheme sees the same delay draws in a trial. Staircase uses the k
    with the smallest mean over the batch.
    """
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    schemes = tuple(s for s in SCHEME_ORDER if s in set(schemes))
    if not schemes:
        raise ConfigurationError("no schemes selected")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outputs = list(pool.map(
                _run_trial,
                [config] * trials,
                [schemes] * trials,
                range(trials),
                [paired] * trials,
            ))
    else:
        outputs = [_run_trial(config, schemes, trial, paired) for trial in range(trials)]
    outputs.sort(key=lambda out: out.trial)

    result = BatchResult()
    chosen_k = None
    if Scheme.STAIRCASE in schemes:
        ks = sorted(outputs[0].staircase_by_k)
        means = {k: float(np.mean([out.staircase_by_k[k] for out in outputs])) for k in ks}
        chosen_k = staircase.best_k(means)
        for out in outputs:
            out.records[Scheme.STAIRCASE] = staircase.staircase_record(
                config, out.trial, out.staircase_by_k[chosen_k]
            )

    for out in outputs:
        result.gate_violations += out.gate_violations
        result.incorrect += out.incorrect
        for scheme in schemes:
            result.records.append(out.records[scheme])

    for scheme in schemes:
        scheme_records = [r for r in result.records if r.scheme == scheme]
        k = chosen_k if scheme == Scheme.STAIRCASE else None
        result.summaries[scheme] = summarize(scheme, scheme_records, staircase_k=k)
        summary = result.summaries[scheme]
        logger.info(
            f"# SIM | {scheme.value} n={config.n} z={config.z}: mean {summary.mean:.4f}s "
            f"[{summary.ci_low:.4f}, {summary.ci_high:.4f}] over {trials} trials"
        )
    if result.incorrect:
        logger.error(f"# SIM | ✗ {result.incorrect} trials decoded a wrong product")
    return result


SWEEPABLE = ("n", "z", "b", "m", "ell")


def parse_sweep(spec: str) -> Tuple[str, List[int]]:
    """`param:lo..hi` (inclusive) or `param:v1,v2,...`."""
    param, sep, values = spec.partition(":")
    param = param.strip()
    if not sep or param not in SWEEPABLE:
        raise ConfigurationError(f"sweep must look like <param>:<range> with param in {SWEEPABLE}, got {spec!r}")
    try:
        if ".." in values:
            low, high = (int(v) for v in values.split("..", 1))
            points = list(range(low, high + 1))
        else:
            points = [int(v) for v in values.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"bad sweep values {values!r}") from exc
    if not points:
        raise ConfigurationError(f"sweep {spec!r} is empty")
    return param, points


def run_sweep(
    config: SimConfig,
    param: str,
    points: Sequence[int],
    trials: int,
    schemes: Sequence[Scheme] = SCHEME_ORDER,
    paired: bool = True,
    jobs: int = 1,
) -> List[Tuple[int, BatchResult]]:
    """One batch per sweep point; long-format records, no pre-aggregation."""
    results = []
    for point in points:
        try:
            point_config = SimConfig(**{**config.dict(), param: point})
        except ValueError as exc:
            raise ConfigurationError(f"sweep point {param}={point}: {exc}") from exc
        logger.info(f"# SIM | sweep {param}={point}")
        results.append((point, batch(point_config, trials, schemes, paired, jobs)))
    return results
