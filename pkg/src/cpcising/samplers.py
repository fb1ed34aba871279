"""Software stand-ins for Ising hardware.

Single-spin-flip Gibbs (heat-bath) or Metropolis chains, simulated
annealing, reduction of multi-body terms to two-body form, and a hybrid
pipeline that seeds Boltzmann sampling from heuristic solutions.

Randomness: each chain owns a generator spawned from
``SeedSequence(config.seed)`` in chain order. A chain draws, in this order,
its initial state (unless seeded), then per block of sweeps a spin
permutation per sweep and one uniform per spin update.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from . import kernels
from .cpc import PropagationModel
from .decoders import (
    Correction,
    EXACT_SPIN_CAP,
    exact_boltzmann,
    maxent_decode,
)
from .exceptions import CapacityError
from .ising import IsingModel, energies, export_factor_graph, index_to_spins

BLOCK_SWEEPS = 4096


@dataclass(frozen=True)
class SamplerConfig:
    """Chain settings.

    ``schedule`` is a sequence of (temperature, sweeps) pairs; when given it
    replaces ``temperature``/``sweeps`` for annealing.
    """

    sweeps: int = 1000
    burn_in: int = 100
    chains: int = 1
    seed: int | np.random.SeedSequence | np.random.Generator | None = 0
    temperature: float = 1.0
    schedule: tuple[tuple[float, int], ...] | None = None
    method: str = "gibbs"
    threads: int = 1

    def __post_init__(self):
        if self.sweeps <= 0:
            raise ValueError(f"sweeps must be positive, got {self.sweeps}")
        if self.burn_in < 0:
            raise ValueError(f"burn_in must be non-negative, got {self.burn_in}")
        if self.chains < 1:
            raise ValueError(f"chains must be at least 1, got {self.chains}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if self.method not in ("gibbs", "metropolis"):
            raise ValueError(f"method must be 'gibbs' or 'metropolis', got {self.method!r}")
        if self.schedule is not None:
            sched = tuple((float(t), int(s)) for t, s in self.schedule)
            if not sched:
                raise ValueError("schedule must not be empty")
            temps = [t for t, _ in sched]
            if min(temps) <= 0:
                raise ValueError("schedule temperatures must be positive")
            if any(b > a for a, b in zip(temps, temps[1:])):
                raise ValueError("schedule temperatures must be non-increasing")
            if any(s <= 0 for _, s in sched):
                raise ValueError("schedule sweep counts must be positive")
            object.__setattr__(self, "schedule", sched)

    def chain_rngs(self) -> list[np.random.Generator]:
        """One generator per chain; ``seed`` may be an int, SeedSequence or Generator."""
        seed = self.seed
        if isinstance(seed, np.random.Generator):
            return seed.spawn(self.chains)
        if not isinstance(seed, np.random.SeedSequence):
            seed = np.random.SeedSequence(seed)
        return [np.random.default_rng(s) for s in seed.spawn(self.chains)]


@dataclass
class SampleSet:
    states: np.ndarray
    energies: np.ndarray
    chain: np.ndarray

    def __len__(self):
        return len(self.states)


def _run_chain(model: IsingModel, adjacency, state: np.ndarray, betas: np.ndarray,
               rng: np.random.Generator, metropolis: bool, record: bool):
    """Drive one chain through ``betas``.

    Returns (samples, per-sweep energies, final state, best state, best energy).
    """
    term_ptr, term_vars, spin_ptr, spin_terms = adjacency
    coeffs = model.coeffs()
    n = model.num_spins
    state = np.array(state, dtype=np.int8)
    e = float(energies(model, state[None, :])[0])
    total = len(betas)
    samples = np.empty((total if record else 0, n), np.int8)
    trace = np.empty(total)
    best_state = state.copy()
    best_e = e
    scratch_best = np.empty(n, np.int8)
    base = np.arange(n, dtype=np.int32)
    for start in range(0, total, BLOCK_SWEEPS):
        stop = min(total, start + BLOCK_SWEEPS)
        b = np.ascontiguousarray(betas[start:stop], dtype=np.float64)
        order = rng.permuted(np.tile(base, (len(b), 1)), axis=1).astype(np.int32)
        uniforms = rng.random((len(b), n))
        out = samples[start:stop] if record else np.empty((0, n), np.int8)
        e, blk_best = kernels.run_sweeps(
            state, term_ptr, term_vars, coeffs, spin_ptr, spin_terms,
            order, uniforms, b, metropolis, out, record, trace[start:stop], e, scratch_best,
        )
        if blk_best < best_e:
            best_e = blk_best
            best_state = scratch_best.copy()
    return samples, trace, state, best_state, best_e


def _initial_states(model, rngs, initial_states):
    if initial_states is None:
        return [rng.choice(np.array([-1, 1], np.int8), size=model.num_spins) for rng in rngs]
    init = np.atleast_2d(np.asarray(initial_states, dtype=np.int8))
    if init.shape[1] != model.num_spins:
        raise ValueError(f"initial states have {init.shape[1]} spins, model has {model.num_spins}")
    return [init[c % len(init)].copy() for c in range(len(rngs))]


def _map_chains(fn, n_chains: int, threads: int):
    if threads <= 1 or n_chains == 1:
        return [fn(c) for c in range(n_chains)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_chains)))


def gibbs_sample(model: IsingModel, T: float = 1.0, config: SamplerConfig = SamplerConfig(),
                 initial_states=None) -> SampleSet:
    """Sample the Boltzmann distribution at ``T``; returns ``chains * sweeps`` states.

    Burn-in sweeps are discarded. One state is retained per sweep, chain
    blocks are concatenated in chain order.
    """
    if T <= 0:
        raise ValueError(f"temperature must be positive, got {T}")
    adjacency = model.adjacency()
    rngs = config.chain_rngs()
    inits = _initial_states(model, rngs, initial_states)
    metropolis = config.method == "metropolis"

    def chain(c):
        rng = rngs[c]
        state = inits[c]
        if config.burn_in:
            betas = np.full(config.burn_in, 1.0 / T)
            state = _run_chain(model, adjacency, state, betas, rng, metropolis, record=False)[2]
        betas = np.full(config.sweeps, 1.0 / T)
        return _run_chain(model, adjacency, state, betas, rng, metropolis, record=True)[0]

    results = _map_chains(chain, config.chains, config.threads)
    states = np.concatenate(results)
    es = energies(model, states)
    chain_idx = np.repeat(np.arange(config.chains), config.sweeps)
    return SampleSet(states, es, chain_idx)


def default_schedule(model: IsingModel, sweeps: int) -> np.ndarray:
    """Geometric cooling from a hot temperature set by the largest local field."""
    if not model.terms:
        return np.ones(sweeps)
    coeffs = np.abs(model.coeffs())
    local = np.zeros(model.num_spins)
    for (vars_, _), c in zip(model.terms, coeffs):
        local[list(vars_)] += c
    t_hot = 2.0 * local.max()
    t_cold = 0.05 * coeffs[coeffs > 0].min()
    return np.geomspace(t_hot, min(t_cold, t_hot), sweeps)


@dataclass
class AnnealResult:
    states: np.ndarray
    energies: np.ndarray
    chain_states: np.ndarray
    chain_energies: np.ndarray
    traces: np.ndarray = field(repr=False)

    @property
    def best_energy(self) -> float:
        return float(self.energies[0])


def simulated_annealing(model: IsingModel, config: SamplerConfig = SamplerConfig(),
                        initial_states=None) -> AnnealResult:
    """Anneal every chain and return the lowest-energy states found.

    ``traces[c, s]`` is chain c's best-so-far energy after sweep s.
    """
    if config.schedule is not None:
        temps = np.concatenate([np.full(s, t) for t, s in config.schedule])
    else:
        temps = default_schedule(model, config.sweeps)
    betas = 1.0 / temps
    adjacency = model.adjacency()
    rngs = config.chain_rngs()
    inits = _initial_states(model, rngs, initial_states)
    metropolis = config.method == "metropolis"

    def chain(c):
        _, trace, _, best, best_e = _run_chain(model, adjacency, inits[c], betas, rngs[c],
                                            metropolis, record=False)
        start_e = float(energies(model, inits[c][None, :])[0])
        return best, best_e, np.minimum.accumulate(np.minimum(trace, start_e))

    results = _map_chains(chain, config.chains, config.threads)
    chain_states = np.array([r[0] for r in results], np.int8)
    chain_e = np.array([r[1] for r in results])
    traces = np.array([r[2] for r in results])
    emin = chain_e.min()
    tol = 1e-9 * max(1.0, abs(emin))
    best = chain_states[chain_e <= emin + tol]
    uniq = np.unique(best, axis=0)
    return AnnealResult(uniq, energies(model, uniq), chain_states, chain_e, traces)


# ---------------------------------------------------------------------------
# quadratization


def _spin_to_binary(model: IsingModel) -> tuple[dict, float]:
    """Expand E(sigma) with sigma = 1 - 2x into {frozenset: coeff} plus constant."""
    poly: dict[frozenset, float] = {}
    const = model.offset
    for vars_, c in model.terms:
        # -c * prod(1 - 2 x_i) = -c * sum_U (-2)^|U| prod_U x
        for r in range(len(vars_) + 1):
            for sub in combinations(vars_, r):
                val = -c * (-2.0) ** r
                if r == 0:
                    const += val
                else:
                    key = frozenset(sub)
                    poly[key] = poly.get(key, 0.0) + val
    return poly, const


def _binary_to_spin_terms(poly: dict, const: float):
    """Expand prod x with x = (1 - sigma)/2 back into spin terms (energy = offset - sum c prod)."""
    terms: dict[tuple, float] = {}
    offset = const
    for key, b in poly.items():
        vars_ = sorted(key)
        scale = b / 2.0 ** len(vars_)
        for r in range(len(vars_) + 1):
            for sub in combinations(vars_, r):
                val = scale * (-1.0) ** r
                if r == 0:
                    offset += val
                else:
                    terms[sub] = terms.get(sub, 0.0) - val
    return terms, offset


def quadratize(model: IsingModel) -> tuple[IsingModel, dict[int, tuple[int, int]]]:
    """Reduce to two-body form with auxiliary spins.

    Works on the 0/1 polynomial: the most frequent variable pair among terms
    of order >= 3 is replaced by a new variable y with penalty
    ``P * (x_a x_b - 2 x_a y - 2 x_b y + 3 y)``, where ``P`` is one plus the
    absolute coefficient sum of the terms containing the pair. The penalty
    vanishes exactly when y = x_a x_b and is at least P otherwise, so the
    ground states restricted to the original spins are unchanged.

    Returns the two-body model and a map ``aux spin -> (a, b)``.
    """
    if model.max_order <= 2:
        return model, {}
    poly, const = _spin_to_binary(model)
    poly = {k: v for k, v in poly.items() if v != 0.0}
    next_var = model.num_spins
    aux: dict[int, tuple[int, int]] = {}
    while True:
        high = [k for k in poly if len(k) >= 3]
        if not high:
            break
        counts: dict[tuple[int, int], int] = {}
        for key in high:
            for pair in combinations(sorted(key), 2):
                counts[pair] = counts.get(pair, 0) + 1
        pair = min(counts, key=lambda p: (-counts[p], p))
        a, b = pair
        y = next_var
        next_var += 1
        aux[y] = pair
        touching = [k for k in high if a in k and b in k]
        penalty = 1.0 + sum(abs(poly[k]) for k in touching)
        for key in touching:
            coeff = poly.pop(key)
            new_key = (key - {a, b}) | {y}
            poly[new_key] = poly.get(new_key, 0.0) + coeff
        for key, val in (
            (frozenset((a, b)), penalty),
            (frozenset((a, y)), -2.0 * penalty),
            (frozenset((b, y)), -2.0 * penalty),
            (frozenset((y,)), 3.0 * penalty),
        ):
            poly[key] = poly.get(key, 0.0) + val
    terms, offset = _binary_to_spin_terms(poly, const)
    labels = ()
    if model.labels:
        labels = tuple(model.labels) + tuple(
            f"aux_{y}({model.labels[a] if a < model.num_spins else a}*"
            f"{model.labels[b] if b < model.num_spins else b})"
            for y, (a, b) in aux.items()
        )
    return IsingModel.from_terms(next_var, terms.items(), offset, labels), aux


# ---------------------------------------------------------------------------
# backends


@dataclass(frozen=True)
class BackendCapabilities:
    max_spins: int | None
    max_order: int | None
    boltzmann: bool
    """True when returned states approximate a Boltzmann distribution."""


class SamplerBackend:
    """Interface for anything that turns an Ising model into configurations."""

    name = "abstract"
    capabilities = BackendCapabilities(None, None, False)

    def check(self, model: IsingModel) -> None:
        cap = self.capabilities
        if cap.max_spins is not None and model.num_spins > cap.max_spins:
            raise CapacityError(f"{self.name}: {model.num_spins} spins exceeds limit {cap.max_spins}")
        if cap.max_order is not None and model.max_order > cap.max_order:
            raise CapacityError(
                f"{self.name}: term order {model.max_order} exceeds limit {cap.max_order}; quadratize first"
            )

    def sample(self, model: IsingModel, num_samples: int, seed=None) -> np.ndarray:
        raise NotImplementedError


class ExactBackend(SamplerBackend):
    """Draws i.i.d. from the enumerated Boltzmann distribution."""

    name = "exact"

    def __init__(self, T: float = 1.0, cap: int = EXACT_SPIN_CAP):
        self.T = T
        self.capabilities = BackendCapabilities(cap, None, True)

    def sample(self, model, num_samples, seed=None):
        self.check(model)
        dist = exact_boltzmann(model, self.T, cap=self.capabilities.max_spins)
        idx = np.random.default_rng(seed).choice(dist.probabilities.size, size=num_samples,
                                                  p=dist.probabilities)
        return index_to_spins(idx, model.num_spins)


class GibbsBackend(SamplerBackend):
    name = "gibbs"
    capabilities = BackendCapabilities(None, None, True)

    def __init__(self, config: SamplerConfig = SamplerConfig(chains=4), T: float = 1.0):
        self.config = config
        self.T = T

    def sample(self, model, num_samples, seed=None):
        self.check(model)
        cfg = self.config
        per_chain = -(-num_samples // cfg.chains)
        cfg = SamplerConfig(
            sweeps=per_chain, burn_in=cfg.burn_in, chains=cfg.chains,
            seed=cfg.seed if seed is None else seed, temperature=cfg.temperature,
            method=cfg.method, threads=cfg.threads,
        )
        return gibbs_sample(model, self.T, cfg).states[:num_samples]


class AnnealingBackend(SamplerBackend):
    """Optimizer only: returns each chain's best state, not Boltzmann samples."""

    name = "anneal"
    capabilities = BackendCapabilities(None, None, False)

    def __init__(self, config: SamplerConfig = SamplerConfig(sweeps=200, chains=8)):
        self.config = config

    def sample(self, model, num_samples, seed=None):
        self.check(model)
        cfg = self.config
        cfg = SamplerConfig(
            sweeps=cfg.sweeps, burn_in=0, chains=num_samples,
            seed=cfg.seed if seed is None else seed, schedule=cfg.schedule,
            method=cfg.method, threads=cfg.threads,
        )
        return simulated_annealing(model, cfg).chain_states


BACKENDS = {"exact": ExactBackend, "gibbs": GibbsBackend, "anneal": AnnealingBackend}


# ---------------------------------------------------------------------------
# hybrid pipeline


def greedy_descent(model: IsingModel, start) -> np.ndarray:
    """Steepest single-flip descent until no flip lowers the energy."""
    state = np.array(start, dtype=np.int8)
    adjacency_terms: list[list[int]] = [[] for _ in range(model.num_spins)]
    for t, (vars_, _) in enumerate(model.terms):
        for v in vars_:
            adjacency_terms[v].append(t)
    while True:
        best_delta, best_i = 0.0, -1
        for i in range(model.num_spins):
            field_ = 0.0
            for t in adjacency_terms[i]:
                vars_, c = model.terms[t]
                field_ += c * np.prod(state[list(vars_)])
            delta = 2.0 * field_  # flipping i negates every term containing it
            if delta < best_delta - 1e-12:
                best_delta, best_i = delta, i
        if best_i < 0:
            return state
        state[best_i] = -state[best_i]


HEURISTICS = ("greedy", "sa", "bp", "random")


def heuristic_seeds(model: IsingModel, heuristic: str, count: int, seed=None) -> np.ndarray:
    """Seed states for the refinement chains."""
    n = model.num_spins
    rng = np.random.default_rng(seed)
    if heuristic == "greedy":
        s = greedy_descent(model, np.ones(n, np.int8))
        return np.tile(s, (count, 1))
    if heuristic == "sa":
        res = simulated_annealing(model, SamplerConfig(sweeps=200, chains=count, seed=seed))
        return res.chain_states
    if heuristic == "bp":
        from .bp import belief_propagation

        result = belief_propagation(export_factor_graph(model), max_iters=100, damping=0.1)
        s = np.where(result.fields() < 0, -1, 1).astype(np.int8)
        return np.tile(greedy_descent(model, s), (count, 1))
    if heuristic == "random":
        return rng.choice(np.array([-1, 1], np.int8), size=(count, n))
    raise ValueError(f"unknown heuristic {heuristic!r}; expected one of {HEURISTICS}")


def hybrid_decode(model: IsingModel, prop: PropagationModel, syndrome, heuristic: str = "greedy",
                  refine: SamplerConfig | None = SamplerConfig(sweeps=2000, burn_in=0, chains=4),
                  T: float = 1.0, seed=None) -> Correction:
    """Heuristic seeds, then Gibbs refinement started from them, then a MaxEnt vote.

    ``refine=None`` skips refinement and votes over the seeds alone.
    """
    chains = refine.chains if refine is not None else 1
    seed = seed if seed is not None else (refine.seed if refine is not None else 0)
    seeds = heuristic_seeds(model, heuristic, chains, seed=seed)
    if refine is None:
        samples = seeds
    else:
        samples = gibbs_sample(model, T, refine, initial_states=seeds).states
    corr = maxent_decode(model, prop, syndrome, distribution=samples)
    corr.strategy = "hybrid"
    corr.diagnostics.update(heuristic=heuristic, refined=refine is not None)
    return corr


def empirical_distribution(states: np.ndarray) -> np.ndarray:
    """Histogram of +-1 states over packed indices."""
    from .ising import spins_to_index

    n = states.shape[1]
    return np.bincount(spins_to_index(states), minlength=1 << n) / len(states)


def tv_distance(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


# ---------------------------------------------------------------------------
# sample dumps


def format_samples(samples: SampleSet | np.ndarray, model: IsingModel | None = None) -> str:
    """One line per configuration: packed hex (bit i set = spin i is -1) and energy."""
    if isinstance(samples, SampleSet):
        states, es = samples.states, samples.energies
    else:
        states = np.asarray(samples)
        if model is None:
            raise ValueError("need the model to compute energies for bare states")
        es = energies(model, states)
    n = states.shape[1]
    width = max(1, math.ceil(n / 4))
    bits = (states < 0).astype(object)
    lines = []
    for row, e in zip(bits, es):
        val = sum(int(b) << i for i, b in enumerate(row))
        lines.append(f"{val:0{width}x} {format(float(e), '.17g')}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_samples(text: str, num_spins: int) -> tuple[np.ndarray, np.ndarray]:
    states, es = [], []
    for line in text.splitlines():
        if not line.strip():
            continue
        hexval, e = line.split()
        states.append(index_to_spins(int(hexval, 16), num_spins))
        es.append(float(e))
    return np.array(states, np.int8).reshape(-1, num_spins), np.array(es)
