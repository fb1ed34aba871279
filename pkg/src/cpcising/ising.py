"""Multi-body Ising Hamiltonians for CPC decoding.

Sign convention: a term ``(vars, c)`` contributes ``-c * prod(sigma[vars])``.
A spin value of +1 means "no error" and -1 means "errored". Configuration
indices are bit-packed: bit i set means spin i is -1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .cpc import CheckSets
from .error_model import ErrorModel, QubitErrorRates, pbar
from .exceptions import DomainError

ZERO_COEFF = 1e-15


@dataclass(frozen=True, eq=False)
class IsingModel:
    num_spins: int
    terms: tuple[tuple[tuple[int, ...], float], ...]
    offset: float = 0.0
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.labels and len(self.labels) != self.num_spins:
            raise ValueError(f"{len(self.labels)} labels for {self.num_spins} spins")

    @classmethod
    def from_terms(
        cls,
        num_spins: int,
        terms: Iterable[tuple[Iterable[int], float]],
        offset: float = 0.0,
        labels: Sequence[str] = (),
        prune: float = ZERO_COEFF,
    ) -> "IsingModel":
        """Merge duplicate variable sets and drop near-zero coefficients.

        Repeated spins inside one term cancel in pairs (sigma^2 = 1); an
        emptied term is folded into the offset with a flipped sign.
        """
        merged: dict[tuple[int, ...], float] = {}
        for vars_, coeff in terms:
            counts: dict[int, int] = {}
            for v in vars_:
                v = int(v)
                if not 0 <= v < num_spins:
                    raise ValueError(f"spin index {v} out of range for {num_spins} spins")
                counts[v] = counts.get(v, 0) + 1
            key = tuple(sorted(v for v, c in counts.items() if c % 2))
            if not key:
                offset -= coeff
                continue
            merged[key] = merged.get(key, 0.0) + float(coeff)
        kept = tuple((k, c) for k, c in merged.items() if abs(c) >= prune)
        return cls(num_spins, kept, float(offset), tuple(labels))

    @property
    def max_order(self) -> int:
        return max((len(v) for v, _ in self.terms), default=0)

    def term_dict(self) -> dict[tuple[int, ...], float]:
        return dict(self.terms)

    def masks(self) -> np.ndarray:
        if self.num_spins > 64:
            raise ValueError("bit-packed masks limited to 64 spins")
        return np.array(
            [sum(1 << v for v in vars_) for vars_, _ in self.terms], dtype=np.uint64
        )

    def coeffs(self) -> np.ndarray:
        return np.array([c for _, c in self.terms], dtype=np.float64)

    def adjacency(self):
        """CSR term->spin and spin->term arrays used by the sweep kernels."""
        term_ptr = np.zeros(len(self.terms) + 1, np.int64)
        term_vars = []
        spin_lists: list[list[int]] = [[] for _ in range(self.num_spins)]
        for t, (vars_, _) in enumerate(self.terms):
            term_vars.extend(vars_)
            term_ptr[t + 1] = len(term_vars)
            for v in vars_:
                spin_lists[v].append(t)
        spin_ptr = np.zeros(self.num_spins + 1, np.int64)
        spin_terms = []
        for i, lst in enumerate(spin_lists):
            spin_terms.extend(lst)
            spin_ptr[i + 1] = len(spin_terms)
        return (
            term_ptr,
            np.array(term_vars, np.int32),
            spin_ptr,
            np.array(spin_terms, np.int32),
        )

    def shifted(self, offset: float) -> "IsingModel":
        return IsingModel(self.num_spins, self.terms, offset, self.labels)

    def equals(self, other: "IsingModel", atol: float = 1e-10, compare_offset: bool = True) -> bool:
        """Term-for-term comparison within ``atol``."""
        if self.num_spins != other.num_spins:
            return False
        a, b = self.term_dict(), other.term_dict()
        if a.keys() != b.keys():
            return False
        if any(abs(a[key] - b[key]) > atol for key in a):
            return False
        return not compare_offset or abs(self.offset - other.offset) <= atol

    def __repr__(self):
        return (
            f"IsingModel(num_spins={self.num_spins}, terms={len(self.terms)}, "
            f"max_order={self.max_order}, offset={self.offset})"
        )


def energy(model: IsingModel, config) -> float:
    """Energy of one +-1 configuration."""
    s = np.asarray(config)
    if s.shape != (model.num_spins,):
        raise ValueError(f"configuration has shape {s.shape}, model has {model.num_spins} spins")
    e = model.offset
    for vars_, c in model.terms:
        e -= c * float(np.prod(s[list(vars_)]))
    return float(e)


def energies(model: IsingModel, configs) -> np.ndarray:
    """Energies of a (m, num_spins) batch of +-1 configurations."""
    s = np.asarray(configs, dtype=np.float64)
    if s.ndim != 2 or s.shape[1] != model.num_spins:
        raise ValueError(f"configurations have shape {s.shape}, expected (m, {model.num_spins})")
    e = np.full(s.shape[0], model.offset)
    for vars_, c in model.terms:
        e -= c * np.prod(s[:, list(vars_)], axis=1)
    return e


def all_energies(model: IsingModel) -> np.ndarray:
    """Energy of every one of the 2^num_spins configurations, by packed index."""
    return kernels.enumerate_energies(model.masks(), model.coeffs(), model.offset, model.num_spins)


def index_to_spins(index, num_spins: int) -> np.ndarray:
    """Packed index (or array of indices) to +-1 spins."""
    idx = np.asarray(index, dtype=np.int64)
    bits = (idx[..., None] >> np.arange(num_spins)) & 1
    return (1 - 2 * bits).astype(np.int8)


def spins_to_index(spins) -> np.ndarray:
    s = np.asarray(spins)
    bits = (s < 0).astype(np.int64)
    return (bits << np.arange(s.shape[-1])).sum(axis=-1)


# ---------------------------------------------------------------------------
# syndromes


def syndrome_from_bits(bits) -> np.ndarray:
    """Measurement bits (1 = check fired) to +-1 syndrome values."""
    if isinstance(bits, str):
        if set(bits) - {"0", "1"}:
            raise ValueError(f"syndrome string must be binary, got {bits!r}")
        bits = [int(c) for c in bits]
    b = np.asarray(bits, dtype=np.int8)
    return (1 - 2 * b).astype(np.int8)


def syndrome_bits(syndrome) -> np.ndarray:
    return (np.asarray(syndrome) < 0).astype(np.uint8)


def syndrome_from_index(index: int, r: int) -> np.ndarray:
    return syndrome_from_bits([(index >> j) & 1 for j in range(r)])


def syndrome_index(syndrome) -> int:
    return int(sum(int(b) << j for j, b in enumerate(syndrome_bits(syndrome))))


# ---------------------------------------------------------------------------
# coefficients


def nishimori_temperature(p: float) -> float:
    if not 0.0 < p < 0.5:
        raise DomainError(f"Nishimori temperature needs 0 < p < 0.5, got p={p}")
    return 2.0 / math.log((1.0 - p) / p)


def _correlation_log(rates: QubitErrorRates) -> float:
    # ln(pbar_xz / (pbar_x pbar_z)), written so that p_y = 0 gives exactly 0
    num = rates.p_y * (1.0 - rates.p_x - rates.p_z - rates.p_y)
    return math.log1p(num / (rates.p_x_only * rates.p_z_only))


def data_qubit_coefficients(rates: QubitErrorRates, T: float = 1.0) -> tuple[float, float, float]:
    """Fields (h1, h2) on the bit and phase spins and their coupling J."""
    px, pz, _ = pbar(rates)
    J = T / 4.0 * _correlation_log(rates)
    h1 = -T / 2.0 * math.log(px) - J
    h2 = -T / 2.0 * math.log(pz) - J
    return h1, h2, J


def parity_coefficients(
    rates: QubitErrorRates, T: float = 1.0, detected: bool = False
) -> tuple[float, float, float]:
    """Coefficients (h, a_Q, a_Qb) of one parity-check block.

    ``h`` sits on the parity phase spin, ``a_Q`` on the product over the
    check set, ``a_Qb`` on the check set times the phase spin.
    ``detected`` selects the block for a fired check (s_j = -1).
    """
    px, pz, pxz = pbar(rates)
    corr = T / 4.0 * _correlation_log(rates)
    if not detected:
        a_qb = corr
        a_q = -T / 2.0 * math.log(px) - a_qb
        h = -T / 2.0 * math.log(pz) - a_qb
    else:
        a_qb = -corr
        a_q = T / 2.0 * math.log(px) - a_qb
        h = -T / 2.0 * (math.log(pxz) - math.log(px)) - a_qb
    return h, a_q, a_qb


# ---------------------------------------------------------------------------
# builders


def _labels(checks: CheckSets, suffix: str = "") -> list[str]:
    k, r = checks.k, checks.r
    return (
        [f"data_bit_{i + 1}{suffix}" for i in range(k)]
        + [f"data_phase_{i + 1}{suffix}" for i in range(k)]
        + [f"parity_phase_{j + 1}{suffix}" for j in range(r)]
    )


def _check_syndrome(checks: CheckSets, syndrome) -> np.ndarray:
    s = np.asarray(syndrome)
    if s.shape != (checks.r,):
        raise ValueError(f"syndrome has length {s.size}, code has {checks.r} checks")
    if not np.all(np.abs(s) == 1):
        raise ValueError("syndrome entries must be +1 or -1")
    return s


def build_error_count_hamiltonian(checks: CheckSets, syndrome) -> IsingModel:
    """Unit fields on every explicit variable plus one s_j-weighted term per check."""
    s = _check_syndrome(checks, syndrome)
    terms = [((i,), 1.0) for i in range(checks.num_explicit)]
    terms += [(q, float(s[j])) for j, q in enumerate(checks.sets)]
    return IsingModel.from_terms(checks.num_explicit, terms, labels=_labels(checks))


def _rates_for(model: ErrorModel, qubit: int) -> QubitErrorRates:
    return model.rates[qubit]


def _slice_terms(checks: CheckSets, s: np.ndarray, model: ErrorModel, T: float,
                 base: int, include_data: bool):
    k = checks.k
    terms = []
    if include_data:
        for i in range(k):
            h1, h2, J = data_qubit_coefficients(_rates_for(model, i), T)
            b, p = base + i, base + k + i
            terms += [((b,), h1), ((p,), h2), ((b, p), J)]
    for j, q in enumerate(checks.sets):
        h, a_q, a_qb = parity_coefficients(_rates_for(model, k + j), T, detected=s[j] < 0)
        bp = base + checks.parity_phase_spin(j)
        qv = tuple(base + v for v in q)
        # for a self-loop, sigma_bp * prod(Q) reduces to the check set without bp
        terms += [((bp,), h), (qv, a_q), (tuple(set(qv) ^ {bp}), a_qb)]
    return terms


def build_decode_hamiltonian(checks: CheckSets, syndrome, model: ErrorModel, T: float = 1.0) -> IsingModel:
    """Full decoding Hamiltonian whose Boltzmann distribution at ``T`` is the error posterior."""
    s = _check_syndrome(checks, syndrome)
    if model.n != checks.k + checks.r:
        raise ValueError(f"error model covers {model.n} qubits, code has {checks.k + checks.r}")
    if T <= 0:
        raise DomainError(f"temperature must be positive, got {T}")
    terms = _slice_terms(checks, s, model, T, 0, include_data=True)
    return IsingModel.from_terms(checks.num_explicit, terms, labels=_labels(checks))


def build_time_extended(checks: CheckSets, syndromes: Sequence, model: ErrorModel, T: float = 1.0) -> IsingModel:
    """Stack one slice of explicit variables per syndrome round.

    Slice 1 is the single-round decode Hamiltonian. In later slices the
    data-qubit fields become couplings to the same spin one slice earlier
    and the bit-phase coupling becomes a four-body term across both slices;
    parity-check blocks are repeated against that round's syndrome.
    """
    if len(syndromes) == 0:
        raise ValueError("need at least one syndrome round")
    if model.n != checks.k + checks.r:
        raise ValueError(f"error model covers {model.n} qubits, code has {checks.k + checks.r}")
    k, m = checks.k, checks.num_explicit
    terms = []
    labels: list[str] = []
    for t, syndrome in enumerate(syndromes):
        s = _check_syndrome(checks, syndrome)
        base = t * m
        labels += _labels(checks, f"@t{t + 1}")
        terms += _slice_terms(checks, s, model, T, base, include_data=(t == 0))
        if t == 0:
            continue
        prev = base - m
        for i in range(k):
            h1, h2, J = data_qubit_coefficients(_rates_for(model, i), T)
            b0, p0, b1, p1 = prev + i, prev + k + i, base + i, base + k + i
            terms += [((b0, b1), h1), ((p0, p1), h2), ((b0, p0, b1, p1), J)]
    return IsingModel.from_terms(m * len(syndromes), terms, labels=labels)


# ---------------------------------------------------------------------------
# serialization


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def dumps_model(model: IsingModel) -> str:
    """Deterministic JSON with coefficients written to 17 significant digits."""
    term_lines = ",\n".join(
        f'    {{"vars": {json.dumps(list(v))}, "coeff": {_fmt(c)}}}' for v, c in model.terms
    )
    return (
        "{\n"
        f'  "num_spins": {model.num_spins},\n'
        f'  "terms": [\n{term_lines}\n  ],\n'
        f'  "offset": {_fmt(model.offset)},\n'
        f'  "labels": {json.dumps(list(model.labels))}\n'
        "}\n"
    )


def loads_model(text: str) -> IsingModel:
    data = json.loads(text)
    terms = tuple((tuple(int(v) for v in t["vars"]), float(t["coeff"])) for t in data["terms"])
    return IsingModel(int(data["num_spins"]), terms, float(data.get("offset", 0.0)),
                      tuple(data.get("labels", ())))


# ---------------------------------------------------------------------------
# factor graphs


@dataclass(frozen=True)
class Factor:
    variables: tuple[int, ...]
    weight: float

    @property
    def degree(self) -> int:
        return len(self.variables)


@dataclass(frozen=True)
class FactorGraph:
    """Bipartite variable/factor graph; factor t has potential exp(w_t prod sigma / T)."""

    variables: tuple[str, ...]
    factors: tuple[Factor, ...]
    offset: float = 0.0

    @property
    def num_variables(self) -> int:
        return len(self.variables)

    def neighbours(self) -> list[list[int]]:
        """Factor indices attached to each variable."""
        nb: list[list[int]] = [[] for _ in self.variables]
        for f, fac in enumerate(self.factors):
            for v in fac.variables:
                nb[v].append(f)
        return nb

    def edges(self) -> list[tuple[int, int]]:
        return [(v, f) for f, fac in enumerate(self.factors) for v in fac.variables]

    def is_tree(self) -> bool:
        """True when the bipartite graph is a forest."""
        nodes = self.num_variables + len(self.factors)
        parent = list(range(nodes))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for v, f in self.edges():
            ra, rb = find(v), find(self.num_variables + f)
            if ra == rb:
                return False
            parent[ra] = rb
        return True

    def to_model(self) -> IsingModel:
        labels = self.variables if any(self.variables) else ()
        return IsingModel(
            self.num_variables,
            tuple((fac.variables, fac.weight) for fac in self.factors),
            self.offset,
            tuple(labels),
        )


def export_factor_graph(model: IsingModel) -> FactorGraph:
    labels = model.labels or tuple(f"s{i}" for i in range(model.num_spins))
    return FactorGraph(
        variables=tuple(labels),
        factors=tuple(Factor(tuple(v), float(c)) for v, c in model.terms),
        offset=model.offset,
    )
