"""Seeded Monte Carlo runs of the protocol with imperfect detectors.

Random numbers come from numpy's PCG64 (PCG XSL-RR 128/64). Trials are cut
into fixed-size chunks; chunk ``i`` draws from
``PCG64(SeedSequence(seed).spawn(n_chunks)[i])``, so results depend only on
``(seed, config, detection model, n_trials, chunk_size)`` and not on how many
workers process the chunks. Within a chunk, each round draws three uniform
arrays over the whole chunk in a fixed order: branch, photon detector, atom
detector.

Detection loss ends a trial in both models. Under ``FINAL`` only the
heralding round's detectors are sampled (earlier failed rounds are recorded
as fired); under ``PER_ROUND`` every round's detectors are sampled.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InsufficientTrials
from .protocol import (
    FAIL_PLUS,
    LABELS,
    DetectionModel,
    ProtocolConfig,
    ProtocolReport,
    build_auxiliary_photon,
    build_initial_state,
    coefficient_recurrence,
    run_round,
    total_success_probability,
)

RNG_NAME = "numpy.random.PCG64 seeded via numpy.random.SeedSequence(seed).spawn(n_chunks)"
DEFAULT_CHUNK = 1 << 16

SUCCESS = "Success"
EXHAUSTED = "ExhaustedRounds"
DETECTION_LOSS = "DetectionLoss"

_SUCCESS_CODES = (LABELS.index("SuccessPlus"), LABELS.index("SuccessMinus"))


@lru_cache(maxsize=4096)
def _branch_distribution(alpha_k: complex, beta_k: complex, n_photons: int) -> tuple[float, ...]:
    state = build_initial_state(alpha_k, beta_k, n_photons)
    aux = build_auxiliary_photon(1, alpha_k, beta_k)
    probs = dict.fromkeys(LABELS, 0.0)
    for o in run_round(state, aux):
        probs[o.label] = o.probability
    return tuple(probs[label] for label in LABELS)


def round_distributions(config: ProtocolConfig) -> np.ndarray:
    """(K, 4) conditional branch probabilities per round, from exact simulation."""
    rows = []
    c = config.coefficients
    for _ in range(config.max_rounds):
        if abs(c.alpha_k * c.beta_k) < 1e-15:
            row = [0.0] * len(LABELS)
            row[LABELS.index(FAIL_PLUS)] = 1.0
            rows.append(tuple(row))
        else:
            rows.append(_branch_distribution(c.alpha_k, c.beta_k, config.n_photons))
        c = coefficient_recurrence(c)
    return np.array(rows)


@dataclass
class _Chunk:
    labels: np.ndarray  # (n, K) int8, -1 where the round was not reached
    photon: np.ndarray  # (n, K) bool
    atom: np.ndarray  # (n, K) bool
    success_round: np.ndarray  # (n,) int, 0 if no success
    lost: np.ndarray  # (n,) bool


def _run_chunk(dists: np.ndarray, model: DetectionModel, eta_a: float, eta_p: float, n: int, seq) -> _Chunk:
    rng = np.random.Generator(np.random.PCG64(seq))
    k_max = dists.shape[0]
    cum = np.cumsum(dists, axis=1)
    labels = np.full((n, k_max), -1, dtype=np.int8)
    photon = np.zeros((n, k_max), dtype=bool)
    atom = np.zeros((n, k_max), dtype=bool)
    success_round = np.zeros(n, dtype=np.int64)
    lost = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    for k in range(k_max):
        u = rng.random(n)
        dp = rng.random(n) < eta_p
        da = rng.random(n) < eta_a
        lab = np.minimum(np.searchsorted(cum[k], u, side="right"), len(LABELS) - 1).astype(np.int8)
        hit = (lab == _SUCCESS_CODES[0]) | (lab == _SUCCESS_CODES[1])
        if model is DetectionModel.FINAL:
            fired_p = np.where(hit, dp, True)
            fired_a = np.where(hit, da, True)
        else:
            fired_p, fired_a = dp, da
        detected = fired_p & fired_a
        labels[active, k] = lab[active]
        photon[active, k] = fired_p[active]
        atom[active, k] = fired_a[active]
        newly_lost = active & ~detected
        newly_won = active & detected & hit
        lost |= newly_lost
        success_round[newly_won] = k + 1
        active &= ~(newly_lost | newly_won)
    return _Chunk(labels, photon, atom, success_round, lost)


def _chunks(config, model, n_trials, seed, chunk_size, workers):
    if n_trials < 1:
        raise InsufficientTrials(f"n_trials must be >= 1, got {n_trials}")
    dists = round_distributions(config)
    sizes = [min(chunk_size, n_trials - i) for i in range(0, n_trials, chunk_size)]
    seqs = np.random.SeedSequence(int(seed) % (1 << 64)).spawn(len(sizes))
    jobs = list(zip(sizes, seqs))

    def work(job):
        size, seq = job
        return _run_chunk(dists, model, config.eta_a, config.eta_p, size, seq)

    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(work, jobs))
    return [work(j) for j in jobs]


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    rounds: list[tuple[int, str, bool, bool]]
    terminal: str


@dataclass(frozen=True)
class EmpiricalReport:
    n_trials: int
    per_round_success_frequency: list[float]
    total_success_frequency: float
    analytic_reference: ProtocolReport
    max_abs_deviation: float
    seed: int
    detection_model: DetectionModel
    terminal_counts: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "kind": "empirical_report",
            "n_trials": self.n_trials,
            "seed": self.seed,
            "rng": RNG_NAME,
            "detection_model": self.detection_model.value,
            "per_round_success_frequency": list(self.per_round_success_frequency),
            "total_success_frequency": self.total_success_frequency,
            "terminal_counts": dict(self.terminal_counts),
            "max_abs_deviation": self.max_abs_deviation,
            "analytic_reference": self.analytic_reference.to_dict(),
        }


def sample_protocol(
    config: ProtocolConfig,
    detection_model: DetectionModel | str = DetectionModel.FINAL,
    n_trials: int = 100_000,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
    workers: int = 1,
) -> EmpiricalReport:
    model = DetectionModel(detection_model)
    chunks = _chunks(config, model, n_trials, seed, chunk_size, workers)
    k_max = config.max_rounds
    counts = np.zeros(k_max + 1, dtype=np.int64)
    n_lost = 0
    for ch in chunks:
        counts += np.bincount(ch.success_round, minlength=k_max + 1)
        n_lost += int(ch.lost.sum())
    wins = counts[1:]
    per_round = [int(c) / n_trials for c in wins]
    total = int(wins.sum()) / n_trials
    reference = total_success_probability(config, model)
    expected = [r.p_detected for r in reference.per_round]
    deviation = max([abs(f - e) for f, e in zip(per_round, expected)] + [abs(total - reference.total_success)])
    terminal = {
        SUCCESS: int(wins.sum()),
        EXHAUSTED: n_trials - int(wins.sum()) - n_lost,
        DETECTION_LOSS: n_lost,
    }
    return EmpiricalReport(n_trials, per_round, total, reference, deviation, int(seed), model, terminal)


def sample_trials(
    config: ProtocolConfig,
    detection_model: DetectionModel | str = DetectionModel.FINAL,
    n_trials: int = 100,
    seed: int = 0,
    chunk_size: int = DEFAULT_CHUNK,
) -> list[TrialRecord]:
    """Per-trial traces from the same random stream :func:`sample_protocol` uses."""
    model = DetectionModel(detection_model)
    records = []
    tid = 0
    for ch in _chunks(config, model, n_trials, seed, chunk_size, 1):
        for i in range(len(ch.lost)):
            rounds = []
            for k in range(config.max_rounds):
                if ch.labels[i, k] < 0:
                    break
                rounds.append((k + 1, LABELS[ch.labels[i, k]], bool(ch.photon[i, k]), bool(ch.atom[i, k])))
            if ch.success_round[i]:
                terminal = SUCCESS
            elif ch.lost[i]:
                terminal = DETECTION_LOSS
            else:
                terminal = EXHAUSTED
            records.append(TrialRecord(tid, rounds, terminal))
            tid += 1
    return records


@dataclass(frozen=True)
class ConvergenceResult:
    passed: bool
    z_scores: list[float]
    total_z: float
    # rounds whose reference probability is exactly 0 or 1 and were compared exactly
    degenerate_rounds: list[int]
    threshold: float


def _z(freq: float, p: float, n: int) -> tuple[float, bool]:
    if p <= 0 or p >= 1:
        return (0.0 if freq == p else math.inf), True
    return (freq - p) / math.sqrt(p * (1 - p) / n), False


def convergence_check(
    report: EmpiricalReport,
    reference: ProtocolReport | None = None,
    threshold: float = 4.0,
) -> ConvergenceResult:
    """Binomial z-scores of the empirical frequencies against a closed-form report.

    Passes iff every per-round z and the total z satisfy ``|z| <= threshold``.
    A reference probability of exactly 0 or 1 has no variance; that round is
    compared exactly and scores ``inf`` on any mismatch.
    """
    if report.n_trials < 100:
        raise InsufficientTrials(f"need at least 100 trials, got {report.n_trials}")
    reference = reference or report.analytic_reference
    n = report.n_trials
    zs, degenerate = [], []
    for k, (freq, row) in enumerate(zip(report.per_round_success_frequency, reference.per_round), start=1):
        z, deg = _z(freq, row.p_detected, n)
        zs.append(z)
        if deg:
            degenerate.append(k)
    total_z, _ = _z(report.total_success_frequency, reference.total_success, n)
    passed = all(abs(z) <= threshold for z in zs + [total_z])
    return ConvergenceResult(passed, zs, total_z, degenerate, threshold)
