"""Logical error rates, parameter sweeps and threshold bisection.

Exact rates decode every syndrome once through the Ising model, then score
the decisions against all 4^n physical patterns weighted by their
probability. The reported logical error rate is P(residual class != I)
averaged over logical qubits.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .cpc import CpcCode, PropagationModel, build_propagation_model, enumerate_patterns, MAX_ENUMERATION_QUBITS
from .decoders import Correction, make_decoder
from .error_model import (
    ErrorModel,
    QubitErrorRates,
    all_pattern_probabilities,
    sample_classes,
    unprotected_error_rate,
)
from .exceptions import BracketError, CapacityError, DomainError
from .ising import syndrome_from_index

log = logging.getLogger(__name__)

CSV_HEADER = (
    "p", "mle", "maxent", "uncorrected", "unprotected",
    "mle_x", "mle_z", "mle_y", "maxent_x", "maxent_z", "maxent_y",
)


@dataclass(frozen=True)
class LogicalErrorRates:
    """Residual logical class probabilities, per qubit and averaged.

    ``per_qubit[q, c]`` is the probability that logical qubit q ends with
    residual class c (I, X, Z, Y).
    """

    per_qubit: np.ndarray

    @property
    def total(self) -> float:
        return float(np.mean(1.0 - self.per_qubit[:, 0]))

    @property
    def x(self) -> float:
        return float(np.mean(self.per_qubit[:, 1]))

    @property
    def z(self) -> float:
        return float(np.mean(self.per_qubit[:, 2]))

    @property
    def y(self) -> float:
        return float(np.mean(self.per_qubit[:, 3]))

    def per_qubit_total(self) -> np.ndarray:
        return 1.0 - self.per_qubit[:, 0]


@lru_cache(maxsize=8)
def _tables(code: CpcCode):
    prop = build_propagation_model(code)
    table = enumerate_patterns(prop)
    return table.syndrome, table.logical_classes()


def _actual_class_mass(prop: PropagationModel, probs: np.ndarray) -> np.ndarray:
    """mass[s, q, c]: probability of syndrome s with actual logical class c on qubit q."""
    syn, cls = _tables(prop.code)
    r, k = prop.r, prop.k
    mass = np.empty((1 << r, k, 4))
    for q in range(k):
        flat = np.bincount(syn * 4 + cls[:, q], weights=probs, minlength=(1 << r) * 4)
        mass[:, q, :] = flat.reshape(1 << r, 4)
    return mass


def decode_all_syndromes(decode: Callable, r: int, threads: int = 1) -> list[Correction]:
    """Decode every syndrome in index order."""
    syndromes = [syndrome_from_index(s, r) for s in range(1 << r)]
    if threads <= 1:
        return [decode(s) for s in syndromes]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(decode, syndromes))


def _residuals(mass: np.ndarray, corrections: Sequence[Correction | None]) -> np.ndarray:
    k = mass.shape[1]
    out = np.zeros((k, 4))
    cls = np.arange(4)
    for s, corr in enumerate(corrections):
        if corr is None:
            choices = [((0,) * k, 1.0)]
        else:
            choices = corr.weighted_choices()
        for applied, weight in choices:
            for q in range(k):
                # residual = actual xor applied, as 2-bit Pauli classes
                np.add.at(out[q], cls ^ applied[q], weight * mass[s, q])
    return out


def exact_logical_error_rate(prop: PropagationModel, error_model: ErrorModel, strategy: str,
                             T: float = 1.0, threads: int = 1, use_cache: bool = True,
                             cap: int = MAX_ENUMERATION_QUBITS, **decoder_options) -> LogicalErrorRates:
    """Exact residual logical class probabilities for one strategy.

    ``strategy="none"`` gives the uncorrected rates. With
    ``use_cache=False`` every pattern's syndrome is decoded afresh, which is
    only practical for small codes but checks the cached path.
    """
    if prop.n > cap:
        raise CapacityError(f"exact evaluation needs 4^n patterns; n={prop.n} exceeds cap {cap}")
    probs = all_pattern_probabilities(error_model)
    if strategy == "none":
        return LogicalErrorRates(_residuals(_actual_class_mass(prop, probs), [None] * (1 << prop.r)))
    decode = make_decoder(strategy, prop, error_model, T=T, **decoder_options)
    if use_cache:
        corrections = decode_all_syndromes(decode, prop.r, threads)
        return LogicalErrorRates(_residuals(_actual_class_mass(prop, probs), corrections))
    syn, cls = _tables(prop.code)
    out = np.zeros((prop.k, 4))
    for a in np.flatnonzero(probs > 0):
        corr = decode(syndrome_from_index(int(syn[a]), prop.r))
        for applied, weight in corr.weighted_choices():
            for q in range(prop.k):
                out[q, cls[a, q] ^ applied[q]] += weight * probs[a]
    return LogicalErrorRates(out)


@dataclass(frozen=True)
class MonteCarloEstimate:
    rate: float
    stderr: float
    trials: int
    failures: float

    def __str__(self):
        return f"{self.rate:.6g} +- {self.stderr:.2g} ({self.trials} trials)"


def monte_carlo_logical_error_rate(prop: PropagationModel, error_model: ErrorModel, strategy: str,
                                   trials: int, seed=None, T: float = 1.0,
                                   **decoder_options) -> MonteCarloEstimate:
    """Sampled logical error rate with a binomial standard error.

    Decisions are cached per syndrome. Seed expansion: child 0 of
    ``SeedSequence(seed)`` drives pattern sampling, child 1 breaks MLE ties.
    """
    if trials <= 0:
        raise ValueError(f"trials must be positive, got {trials}")
    pattern_seq, tie_seq = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(pattern_seq)
    decode = make_decoder(strategy, prop, error_model, T=T,
                          rng=np.random.default_rng(tie_seq), **decoder_options)
    cls = sample_classes(error_model, rng, trials)
    vec = np.concatenate([cls & 1, cls >> 1], axis=1).astype(np.int64)
    syn_bits = (vec @ prop.H.T.astype(np.int64)) & 1
    log_bits = (vec @ prop.L.T.astype(np.int64)) & 1
    actual = prop.logical_classes(log_bits)
    syn_idx = (syn_bits << np.arange(prop.r)).sum(axis=1)
    cache: dict[int, tuple[int, ...]] = {}
    applied = np.empty_like(actual)
    for t, s in enumerate(syn_idx):
        s = int(s)
        if s not in cache:
            cache[s] = decode(syndrome_from_index(s, prop.r)).class_indices
        applied[t] = cache[s]
    fail = (actual != applied).mean(axis=1)
    rate = float(fail.mean())
    stderr = float(fail.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
    if prop.k == 1:
        stderr = math.sqrt(max(rate * (1.0 - rate), 0.0) / trials)
    return MonteCarloEstimate(rate, stderr, trials, float(fail.sum()))


@dataclass
class SweepRow:
    p: float
    unprotected: float
    uncorrected: LogicalErrorRates
    rates: dict[str, LogicalErrorRates] = field(default_factory=dict)

    def value(self, strategy: str) -> float:
        return self.rates[strategy].total

    def csv_fields(self) -> list[str]:
        def fmt(v):
            return "" if v is None else format(float(v), ".12g")

        def get(strategy, attr):
            r = self.rates.get(strategy)
            return None if r is None else getattr(r, attr)

        return [
            fmt(self.p), fmt(get("mle", "total")), fmt(get("maxent", "total")),
            fmt(self.uncorrected.total), fmt(self.unprotected),
            fmt(get("mle", "x")), fmt(get("mle", "z")), fmt(get("mle", "y")),
            fmt(get("maxent", "x")), fmt(get("maxent", "z")), fmt(get("maxent", "y")),
        ]


def sweep(prop: PropagationModel, family: str, grid: Iterable[float],
          strategies: Sequence[str] = ("mle", "maxent"), T: float = 1.0,
          threads: int = 1) -> list[SweepRow]:
    """One row per valid grid point; invalid points are logged and skipped."""
    rows = []
    for p in grid:
        p = float(p)
        try:
            rates = QubitErrorRates.from_family(family, p)
            em = ErrorModel(rates, prop.n)
            row = SweepRow(
                p=p,
                unprotected=unprotected_error_rate(rates),
                uncorrected=exact_logical_error_rate(prop, em, "none"),
            )
            for strategy in strategies:
                row.rates[strategy] = exact_logical_error_rate(prop, em, strategy, T=T, threads=threads)
        except DomainError as exc:
            log.warning("skipping p=%g: %s", p, exc)
            continue
        rows.append(row)
    return rows


def format_sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.csv_fields())
    return buf.getvalue()


@dataclass(frozen=True)
class ThresholdResult:
    strategy: str
    family: str
    p: float
    lower: float
    upper: float
    iterations: int
    code: str = ""

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def record(self) -> dict:
        return {
            "code": self.code,
            "family": self.family,
            "strategy": self.strategy,
            "threshold": self.p,
            "lower": self.lower,
            "upper": self.upper,
            "width": self.width,
            "iterations": self.iterations,
        }


def threshold_gap(prop: PropagationModel, family: str, strategy: str, p: float, T: float = 1.0,
                  threads: int = 1) -> float:
    """Logical error rate minus the unprotected-qubit rate at ``p``."""
    rates = QubitErrorRates.from_family(family, p)
    em = ErrorModel(rates, prop.n)
    return exact_logical_error_rate(prop, em, strategy, T=T, threads=threads).total - unprotected_error_rate(rates)


def threshold_bisection(prop: PropagationModel, family: str, strategy: str, tol: float = 1e-6,
                        bracket: tuple[float, float] = (0.003, 0.2), T: float = 1.0,
                        threads: int = 1) -> ThresholdResult:
    """Bisect for the rate where the logical error rate meets the unprotected rate."""
    lo, hi = bracket
    f_lo = threshold_gap(prop, family, strategy, lo, T, threads)
    f_hi = threshold_gap(prop, family, strategy, hi, T, threads)
    if f_lo == 0.0:
        return ThresholdResult(strategy, family, lo, lo, lo, 0, prop.code.name)
    if f_hi == 0.0:
        return ThresholdResult(strategy, family, hi, hi, hi, 0, prop.code.name)
    if np.sign(f_lo) == np.sign(f_hi):
        raise BracketError(
            f"no sign change of (logical - unprotected) on [{lo}, {hi}] "
            f"({f_lo:.3g}, {f_hi:.3g})"
        )
    it = 0
    while hi - lo >= tol:
        it += 1
        mid = 0.5 * (lo + hi)
        f_mid = threshold_gap(prop, family, strategy, mid, T, threads)
        if f_mid == 0.0:
            lo = hi = mid
            break
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return ThresholdResult(strategy, family, 0.5 * (lo + hi), lo, hi, it, prop.code.name)
