"""Decoding strategies on top of the Ising mapping.

Every decoder maps a syndrome to a :class:`Correction`, the Pauli class to
apply to each logical qubit. Classes are votes over configurations of the
explicit error variables; a configuration's logical action is read off the
propagation model after filling in the parity bit errors implied by the
syndrome.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bp import belief_propagation
from .cpc import (
    PAULI_CLASSES,
    PropagationModel,
    derive_check_sets,
    enumerate_patterns,
    pattern_from_explicit,
)
from .error_model import ErrorModel, all_pattern_probabilities
from .exceptions import CapacityError
from .ising import (
    FactorGraph,
    IsingModel,
    all_energies,
    build_decode_hamiltonian,
    export_factor_graph,
    index_to_spins,
    spins_to_index,
    syndrome_bits,
    syndrome_index,
)

EXACT_SPIN_CAP = 24
TIE_RTOL = 1e-9


@dataclass(frozen=True)
class BoltzmannDistribution:
    """Exact Boltzmann weights of every configuration, by packed index."""

    probabilities: np.ndarray
    energies: np.ndarray
    log_partition: float
    T: float

    @property
    def num_spins(self) -> int:
        return int(self.probabilities.size).bit_length() - 1

    @property
    def partition_function(self) -> float:
        return math.exp(self.log_partition)

    def marginals(self) -> np.ndarray:
        """P(spin i = -1) for every spin."""
        idx = np.arange(self.probabilities.size)
        return np.array(
            [self.probabilities[(idx >> i) & 1 == 1].sum() for i in range(self.num_spins)]
        )


def exact_boltzmann(model: IsingModel, T: float = 1.0, cap: int = EXACT_SPIN_CAP) -> BoltzmannDistribution:
    if model.num_spins > cap:
        raise CapacityError(
            f"{model.num_spins} spins exceeds the exact-enumeration cap of {cap}; "
            "use a sampler backend instead"
        )
    if T <= 0:
        raise ValueError(f"temperature must be positive, got {T}")
    e = all_energies(model)
    logw = -e / T
    shift = logw.max()
    w = np.exp(logw - shift)
    z = w.sum()
    return BoltzmannDistribution(w / z, e, float(shift + math.log(z)), T)


@dataclass
class Correction:
    """Per-logical-qubit correction plus how it was reached.

    ``margins`` is a (k, 4) array of class probabilities (I, X, Z, Y) when
    the strategy votes. ``alternatives`` lists (classes, weight) for every
    equally good MLE choice, so exact evaluation can average over ties.
    """

    classes: tuple[str, ...]
    strategy: str
    degeneracy: int = 1
    margins: np.ndarray | None = None
    ties: tuple[bool, ...] = ()
    alternatives: tuple[tuple[tuple[str, ...], float], ...] = ()
    num_samples: int | None = None
    stderr: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def class_indices(self) -> tuple[int, ...]:
        return tuple(PAULI_CLASSES.index(c) for c in self.classes)

    def weighted_choices(self) -> list[tuple[tuple[int, ...], float]]:
        """Correction class indices with their probability of being applied."""
        if self.alternatives:
            return [(tuple(PAULI_CLASSES.index(c) for c in cls), w) for cls, w in self.alternatives]
        return [(self.class_indices, 1.0)]

    def record(self, syndrome=None) -> dict:
        rec = {}
        if syndrome is not None:
            rec["syndrome"] = "".join(str(b) for b in syndrome_bits(syndrome))
        rec["strategy"] = self.strategy
        rec["correction"] = list(self.classes)
        rec["degeneracy"] = self.degeneracy
        if self.margins is not None:
            rec["margins"] = [
                {c: float(v) for c, v in zip(PAULI_CLASSES, row)} for row in self.margins
            ]
        if self.ties:
            rec["ties"] = list(self.ties)
        if self.alternatives:
            rec["alternatives"] = [
                {"correction": list(cls), "weight": w} for cls, w in self.alternatives
            ]
        rec["samples"] = self.num_samples
        if self.stderr is not None:
            rec["stderr"] = [[float(v) for v in row] for row in self.stderr]
        if self.diagnostics:
            rec["diagnostics"] = self.diagnostics
        return rec


# ---------------------------------------------------------------------------
# logical bookkeeping


def logical_masks(prop: PropagationModel) -> tuple[np.ndarray, np.ndarray]:
    """Packed explicit-spin supports of each logical X bit and Z bit.

    Relies on parity X errors having no logical action, which
    :func:`~cpcising.cpc.build_propagation_model` guarantees.
    """
    cols = prop.explicit_columns
    weights = 1 << np.arange(len(cols), dtype=np.int64)
    packed = (prop.L[:, cols].astype(np.int64) * weights).sum(axis=1)
    return packed[: prop.k], packed[prop.k :]


def config_classes(prop: PropagationModel, indices) -> np.ndarray:
    """(m, k) logical class indices for packed explicit configurations."""
    idx = np.asarray(indices, dtype=np.int64)
    mx, mz = logical_masks(prop)
    x = np.bitwise_count(idx[:, None] & mx[None, :]) & 1
    z = np.bitwise_count(idx[:, None] & mz[None, :]) & 1
    return (x | (z << 1)).astype(np.uint8)


def logical_action(prop: PropagationModel, config, syndrome) -> tuple[str, ...]:
    """Logical class per logical qubit for a +-1 configuration of the explicit variables."""
    spins = np.asarray(config)
    if spins.shape != (prop.num_explicit,):
        raise ValueError(
            f"configuration has shape {spins.shape}; expected the {prop.num_explicit} explicit variables"
        )
    errored = (spins < 0).astype(np.uint8)
    pattern = pattern_from_explicit(prop, errored, syndrome_bits(syndrome))
    bits = prop.logical(pattern)
    cls = prop.logical_classes(bits)
    return tuple(PAULI_CLASSES[c] for c in cls)


def class_marginals(prop: PropagationModel, indices, weights) -> np.ndarray:
    """(k, 4) probability of each logical class under weighted configurations."""
    cls = config_classes(prop, indices)
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    out = np.zeros((prop.k, 4))
    for q in range(prop.k):
        out[q] = np.bincount(cls[:, q], weights=w, minlength=4)
    return out / total


def vote_classes(margins: np.ndarray) -> tuple[tuple[str, ...], tuple[bool, ...]]:
    """Most probable class per logical qubit, plus a flag for each tied vote."""
    # np.argmax takes the first maximum, giving the I > X > Z > Y tie order
    choice = np.argmax(margins, axis=1)
    best = margins[np.arange(len(choice)), choice]
    ties = tuple(
        bool(np.sum(np.abs(row - b) <= 1e-12 * max(1.0, b)) > 1) for row, b in zip(margins, best)
    )
    return tuple(PAULI_CLASSES[c] for c in choice), ties


def _check_model(model: IsingModel, prop: PropagationModel):
    if model.num_spins != prop.num_explicit:
        raise ValueError(
            f"model has {model.num_spins} spins; decoding needs the {prop.num_explicit} explicit variables"
        )


# ---------------------------------------------------------------------------
# strategies


def ground_states(energies: np.ndarray, rtol: float = TIE_RTOL) -> np.ndarray:
    emin = energies.min()
    return np.flatnonzero(energies <= emin + rtol * max(1.0, abs(emin)))


def mle_decode(model: IsingModel, prop: PropagationModel, syndrome, rng=None,
               distribution: BoltzmannDistribution | None = None) -> Correction:
    """Correct according to a lowest-energy configuration.

    Every ground state is reported in ``alternatives`` with equal weight.
    The applied one is drawn with ``rng``; without a generator the ground
    state with the smallest packed index is used.
    """
    _check_model(model, prop)
    e = distribution.energies if distribution is not None else all_energies(model)
    ground = ground_states(e)
    cls = config_classes(prop, ground)
    pick = 0 if rng is None else int(np.random.default_rng(rng).integers(len(ground)))
    chosen = tuple(PAULI_CLASSES[c] for c in cls[pick])
    uniq, counts = np.unique(cls, axis=0, return_counts=True)
    alternatives = tuple(
        (tuple(PAULI_CLASSES[c] for c in row), float(cnt) / len(ground))
        for row, cnt in zip(uniq, counts)
    )
    return Correction(
        classes=chosen,
        strategy="mle",
        degeneracy=len(ground),
        alternatives=alternatives,
        diagnostics={"ground_energy": float(e[ground[0]]), "ground_states": [int(g) for g in ground]},
    )


def maxent_decode(model: IsingModel, prop: PropagationModel, syndrome,
                  distribution=None, vote: str = "logical", T: float = 1.0) -> Correction:
    """Vote over a distribution of configurations.

    ``distribution`` may be a :class:`BoltzmannDistribution`, a (m, spins)
    array of sampled +-1 configurations, or ``None`` for exact enumeration.
    ``vote="logical"`` picks the most probable class per logical qubit;
    ``vote="physical"`` takes the majority value of each explicit variable
    and reports that configuration's logical action.
    """
    _check_model(model, prop)
    if distribution is None:
        distribution = exact_boltzmann(model, T)
    if isinstance(distribution, BoltzmannDistribution):
        indices = np.arange(distribution.probabilities.size)
        weights = distribution.probabilities
        num_samples = None
    else:
        samples = np.asarray(distribution)
        if samples.ndim != 2 or samples.shape[0] == 0:
            raise ValueError("need a non-empty (m, spins) array of samples")
        indices, weights = np.unique(spins_to_index(samples), return_counts=True)
        num_samples = samples.shape[0]
    margins = class_marginals(prop, indices, weights)
    if vote == "logical":
        classes, ties = vote_classes(margins)
    elif vote == "physical":
        spins = index_to_spins(indices, prop.num_explicit).astype(np.float64)
        mean = (weights[:, None] * spins).sum(axis=0) / np.sum(weights)
        majority = np.where(mean < 0, -1, 1)
        classes = logical_action(prop, majority, syndrome)
        ties = tuple(bool(np.any(np.abs(mean) < 1e-12)) for _ in classes)
    else:
        raise ValueError(f"vote must be 'logical' or 'physical', got {vote!r}")
    stderr = None
    if num_samples is not None:
        stderr = np.sqrt(margins * (1.0 - margins) / num_samples)
    return Correction(
        classes=classes,
        strategy="maxent",
        margins=margins,
        ties=ties,
        num_samples=num_samples,
        stderr=stderr,
    )


def _data_pairs(graph: FactorGraph, k: int) -> dict[int, tuple[int, int, int | None]]:
    """For each data qubit: (bit var, phase var, index of the bit-phase factor or None)."""
    where = {name: i for i, name in enumerate(graph.variables)}
    pairs = {}
    for q in range(k):
        b = where.get(f"data_bit_{q + 1}", q)
        p = where.get(f"data_phase_{q + 1}", k + q)
        fac = next(
            (f for f, fac in enumerate(graph.factors) if set(fac.variables) == {b, p}), None
        )
        pairs[q] = (b, p, fac)
    return pairs


def bp_class_marginals(result, prop: PropagationModel) -> np.ndarray:
    """(k, 4) logical class probabilities from BP beliefs.

    Bit and phase spins of one data qubit are treated jointly through the
    pairwise belief of their coupling factor when it exists; all other
    spins are taken as independent.
    """
    graph = result.graph
    mag = result.magnetizations()
    groups: list[tuple[tuple[int, ...], object]] = []
    grouped: set[int] = set()
    for b, p, fac in _data_pairs(graph, prop.k).values():
        if fac is not None:
            belief = result.pair_belief(fac)
            a, c = graph.factors[fac].variables
            groups.append(((a, c), belief))
            grouped.update((b, p))
    for v in range(graph.num_variables):
        if v not in grouped:
            groups.append(((v,), mag[v]))

    def expectation(mask: int) -> float:
        """E[prod of spins in mask]."""
        out = 1.0
        for vars_, belief in groups:
            sel = [(mask >> v) & 1 for v in vars_]
            if not any(sel):
                continue
            if len(vars_) == 1:
                out *= belief
            else:
                s = np.array([1.0, -1.0])
                fa = s if sel[0] else np.ones(2)
                fb = s if sel[1] else np.ones(2)
                out *= float(np.sum(belief * np.outer(fa, fb)))
        return out

    mx, mz = logical_masks(prop)
    margins = np.zeros((prop.k, 4))
    for q in range(prop.k):
        ex, ez, exz = expectation(int(mx[q])), expectation(int(mz[q])), expectation(int(mx[q] ^ mz[q]))
        for c in range(4):
            sx = -1.0 if c & 1 else 1.0
            sz = -1.0 if c & 2 else 1.0
            margins[q, c] = 0.25 * (1.0 + sx * ex + sz * ez + sx * sz * exz)
    margins = np.clip(margins, 0.0, None)
    return margins / margins.sum(axis=1, keepdims=True)


def bp_decode(graph: FactorGraph, prop: PropagationModel, syndrome, damping: float = 0.0,
              max_iters: int = 200, T: float = 1.0, tol: float = 1e-12) -> Correction:
    if graph.num_variables != prop.num_explicit:
        raise ValueError(
            f"graph has {graph.num_variables} variables; decoding needs {prop.num_explicit}"
        )
    result = belief_propagation(graph, T=T, damping=damping, max_iters=max_iters, tol=tol)
    margins = bp_class_marginals(result, prop)
    classes, ties = vote_classes(margins)
    return Correction(
        classes=classes,
        strategy="bp",
        margins=margins,
        ties=ties,
        diagnostics={
            "converged": result.converged,
            "iterations": result.iterations,
            "residual": result.residual,
            "marginals": [float(m) for m in result.marginals()],
        },
    )


def sampler_decode(model: IsingModel, prop: PropagationModel, syndrome, sampler,
                   num_samples: int, seed=None) -> Correction:
    """MaxEnt vote over configurations drawn by a sampler backend."""
    if num_samples <= 0:
        raise ValueError(f"num_samples must be positive, got {num_samples}")
    samples = sampler.sample(model, num_samples, seed=seed)
    corr = maxent_decode(model, prop, syndrome, distribution=samples)
    corr.strategy = "sampler"
    corr.diagnostics["backend"] = sampler.name
    return corr


# ---------------------------------------------------------------------------
# oracle


def brute_force_posterior(prop: PropagationModel, error_model: ErrorModel, syndrome) -> np.ndarray:
    """Posterior over explicit configurations given a syndrome, by enumerating 4^n patterns.

    Independent of the Ising construction: conditions pattern probabilities
    on the syndrome and maps each surviving pattern to its explicit
    configuration (a bijection, so nothing is summed away).
    """
    table = enumerate_patterns(prop)
    probs = all_pattern_probabilities(error_model)
    keep = table.syndrome == syndrome_index(syndrome)
    post = np.zeros(1 << prop.num_explicit)
    np.add.at(post, table.explicit[keep], probs[keep])
    return post / post.sum()


# ---------------------------------------------------------------------------
# strategy factory

STRATEGIES = ("mle", "maxent", "bp", "sampler", "hybrid")


def make_decoder(strategy: str, prop: PropagationModel, error_model: ErrorModel, T: float = 1.0,
                 rng=None, sampler=None, num_samples: int = 10_000, bp_options: dict | None = None,
                 hybrid_options: dict | None = None) -> Callable[[np.ndarray], Correction]:
    """Return ``decode(syndrome) -> Correction`` for a named strategy.

    The decode Hamiltonian is rebuilt per syndrome with the error model's
    own rates at construction temperature ``T``.
    """
    checks = derive_check_sets(prop)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")

    def build(syndrome):
        return build_decode_hamiltonian(checks, syndrome, error_model, T)

    if strategy == "mle":
        return lambda s: mle_decode(build(s), prop, s, rng=rng)
    if strategy == "maxent":
        return lambda s: maxent_decode(build(s), prop, s, T=T)
    if strategy == "bp":
        opts = dict(bp_options or {})
        return lambda s: bp_decode(export_factor_graph(build(s)), prop, s, T=T, **opts)
    if strategy == "sampler":
        if sampler is None:
            from .samplers import GibbsBackend

            sampler = GibbsBackend()
        return lambda s: sampler_decode(build(s), prop, s, sampler, num_samples,
                                        seed=None if rng is None else rng)
    from .samplers import hybrid_decode

    opts = dict(hybrid_options or {})
    return lambda s: hybrid_decode(build(s), prop, s, **opts)
