"""Single-qubit Pauli channels with independent bit, phase and correlated Y flips.

Each qubit independently suffers an X-flip with probability ``p_x``, a
Z-flip with probability ``p_z``, and on top of that a correlated XZ flip
with probability ``p_y``. Outcome classes are ordered I, X, Z, Y with class
index ``x | z << 1``, matching :data:`cpcising.cpc.PAULI_CLASSES`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cpc import PauliOperator
from .exceptions import DomainError

FAMILIES = ("f1", "f2", "f3")


@dataclass(frozen=True)
class QubitErrorRates:
    p_x: float
    p_z: float
    p_y: float = 0.0

    def __post_init__(self):
        for name in ("p_x", "p_z", "p_y"):
            v = getattr(self, name)
            if not (0.0 <= v < 0.5) or math.isnan(v):
                raise DomainError(f"{name}={v!r} outside [0, 0.5)")
        if self.p_identity < 0.0:
            raise DomainError(
                f"rates (p_x={self.p_x}, p_z={self.p_z}, p_y={self.p_y}) leave a negative "
                "no-error probability"
            )

    @property
    def p_xz(self) -> float:
        return self.p_x * self.p_z + self.p_y

    @property
    def p_identity(self) -> float:
        return (1.0 - self.p_x) * (1.0 - self.p_z) - self.p_y

    @property
    def p_x_only(self) -> float:
        return self.p_x * (1.0 - self.p_z)

    @property
    def p_z_only(self) -> float:
        return self.p_z * (1.0 - self.p_x)

    def outcome_probabilities(self) -> np.ndarray:
        """Probabilities of the I, X, Z, Y outcomes."""
        return np.array([self.p_identity, self.p_x_only, self.p_z_only, self.p_xz])

    @property
    def marginal_x(self) -> float:
        return self.p_x + self.p_y

    @property
    def marginal_z(self) -> float:
        return self.p_z + self.p_y

    def with_floor(self, eps: float = 1e-12) -> "QubitErrorRates":
        """Replace zero rates by ``eps`` so log-ratios stay finite."""
        return QubitErrorRates(
            max(self.p_x, eps), max(self.p_z, eps), max(self.p_y, eps)
        )

    @classmethod
    def from_family(cls, family: str, p: float) -> "QubitErrorRates":
        """``f1``: p_y=0, ``f2``: p_y=0.1p, ``f3``: p_y=p-2p^2 (isotropic)."""
        if family == "f1":
            p_y = 0.0
        elif family == "f2":
            p_y = 0.1 * p
        elif family == "f3":
            p_y = p - 2.0 * p * p
        else:
            raise ValueError(f"unknown error family {family!r}; expected one of {FAMILIES}")
        return cls(p, p, p_y)


def pbar(rates: QubitErrorRates) -> tuple[float, float, float]:
    """Error-to-no-error probability ratios for X-only, Z-only and XZ outcomes."""
    p_i = rates.p_identity
    num = (rates.p_x_only, rates.p_z_only, rates.p_xz)
    if p_i <= 0.0 or min(num) <= 0.0:
        raise DomainError(
            f"pbar undefined for {rates}: every outcome needs positive probability "
            "(use QubitErrorRates.with_floor for degenerate channels)"
        )
    return num[0] / p_i, num[1] / p_i, num[2] / p_i


def unprotected_error_rate(rates: QubitErrorRates) -> float:
    """Probability that a bare qubit suffers any non-identity error."""
    return rates.p_x + rates.p_z + rates.p_xz - 2.0 * rates.p_x * rates.p_z


class ErrorModel:
    """Independent per-qubit channels for an n-qubit register."""

    def __init__(self, rates: QubitErrorRates | Sequence[QubitErrorRates], n: int | None = None):
        if isinstance(rates, QubitErrorRates):
            if n is None:
                raise ValueError("n is required for a uniform error model")
            self.rates = (rates,) * n
            self.uniform = True
        else:
            self.rates = tuple(rates)
            if n is not None and len(self.rates) != n:
                raise ValueError(f"got {len(self.rates)} per-qubit rates for n={n}")
            self.uniform = len(set(self.rates)) <= 1
        if not self.rates:
            raise ValueError("error model needs at least one qubit")
        self._table = np.array([r.outcome_probabilities() for r in self.rates])
        self._table.setflags(write=False)

    @classmethod
    def family(cls, name: str, p: float, n: int) -> "ErrorModel":
        return cls(QubitErrorRates.from_family(name, p), n)

    @property
    def n(self) -> int:
        return len(self.rates)

    @property
    def outcome_table(self) -> np.ndarray:
        """(n, 4) array of I/X/Z/Y probabilities per qubit."""
        return self._table

    def __repr__(self):
        if self.uniform:
            return f"ErrorModel({self.rates[0]!r}, n={self.n})"
        return f"ErrorModel({list(self.rates)!r})"


def pattern_probability(model: ErrorModel, pauli: PauliOperator) -> float:
    if pauli.n != model.n:
        raise ValueError(f"pattern has {pauli.n} qubits, model has {model.n}")
    cls = pauli.classes()
    return float(np.prod(model.outcome_table[np.arange(model.n), cls]))


def all_pattern_probabilities(model: ErrorModel) -> np.ndarray:
    """Probability of every one of the 4^n patterns.

    Pattern index ``a`` puts class ``(a >> 2q) & 3`` on qubit q.
    """
    probs = np.ones(1)
    for q in range(model.n):
        probs = np.multiply.outer(model.outcome_table[q], probs).ravel()
    return probs


def sample_classes(model: ErrorModel, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` patterns as a (size, n) array of class indices."""
    cdf = np.cumsum(model.outcome_table, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random((size, model.n))
    return (u[:, :, None] >= cdf[None, :, :-1]).sum(axis=2).astype(np.uint8)


def sample_pattern(model: ErrorModel, rng: np.random.Generator | int | None = None) -> PauliOperator:
    rng = np.random.default_rng(rng)
    cls = sample_classes(model, rng, 1)[0]
    return PauliOperator(cls & 1, cls >> 1)
