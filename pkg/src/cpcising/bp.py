"""Sum-product belief propagation on Ising factor graphs.

Messages are stored as effective fields: a message ``u`` stands for the
distribution proportional to ``exp(u * sigma)``. A factor with weight ``w``
has potential ``exp(w * prod(sigma) / T)``, so its message to one of its
variables is ``atanh(tanh(w/T) * prod(tanh(incoming)))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ising import FactorGraph

_CLIP = 1.0 - 1e-15


@dataclass
class BPResult:
    graph: FactorGraph
    T: float
    factor_to_var: list[np.ndarray]
    var_to_factor: list[np.ndarray]
    converged: bool
    iterations: int
    residual: float

    def fields(self) -> np.ndarray:
        """Total incoming field on every variable."""
        b = np.zeros(self.graph.num_variables)
        for fac, msgs in zip(self.graph.factors, self.factor_to_var):
            for v, m in zip(fac.variables, msgs):
                b[v] += m
        return b

    def marginals(self) -> np.ndarray:
        """Approximate P(sigma_i = -1) for every variable."""
        return 0.5 * (1.0 - np.tanh(self.fields()))

    def magnetizations(self) -> np.ndarray:
        return np.tanh(self.fields())

    def pair_belief(self, factor_index: int) -> np.ndarray:
        """2x2 belief over a two-variable factor, indexed [sigma_a == -1, sigma_b == -1]."""
        fac = self.graph.factors[factor_index]
        if fac.degree != 2:
            raise ValueError(f"factor {factor_index} has degree {fac.degree}, expected 2")
        ua, ub = self.var_to_factor[factor_index]
        s = np.array([1.0, -1.0])
        logb = (
            fac.weight / self.T * np.outer(s, s)
            + ua * s[:, None]
            + ub * s[None, :]
        )
        logb -= logb.max()
        b = np.exp(logb)
        return b / b.sum()


def belief_propagation(
    graph: FactorGraph,
    T: float = 1.0,
    damping: float = 0.0,
    max_iters: int = 200,
    tol: float = 1e-12,
) -> BPResult:
    """Flooding-schedule sum-product; non-convergence is reported, not raised."""
    if not 0.0 <= damping < 1.0:
        raise ValueError(f"damping must lie in [0, 1), got {damping}")
    f2v = [np.zeros(f.degree) for f in graph.factors]
    v2f = [np.zeros(f.degree) for f in graph.factors]
    tw = [np.tanh(f.weight / T) for f in graph.factors]

    residual = np.inf
    it = 0
    converged = False
    for it in range(1, max_iters + 1):
        total = np.zeros(graph.num_variables)
        for fac, msgs in zip(graph.factors, f2v):
            for v, m in zip(fac.variables, msgs):
                total[v] += m
        for f, fac in enumerate(graph.factors):
            v2f[f] = np.array([total[v] - f2v[f][pos] for pos, v in enumerate(fac.variables)])

        residual = 0.0
        new_f2v = []
        for f, fac in enumerate(graph.factors):
            if fac.degree == 1:
                new = np.array([fac.weight / T])
            else:
                t = np.tanh(v2f[f])
                new = np.empty(fac.degree)
                for pos in range(fac.degree):
                    prod = tw[f] * np.prod(np.delete(t, pos))
                    new[pos] = np.arctanh(np.clip(prod, -_CLIP, _CLIP))
            new = (1.0 - damping) * new + damping * f2v[f]
            residual = max(residual, float(np.max(np.abs(new - f2v[f]), initial=0.0)))
            new_f2v.append(new)
        f2v = new_f2v
        if residual < tol:
            converged = True
            break

    # refresh variable-to-factor messages so pair beliefs match the final state
    total = np.zeros(graph.num_variables)
    for fac, msgs in zip(graph.factors, f2v):
        for v, m in zip(fac.variables, msgs):
            total[v] += m
    for f, fac in enumerate(graph.factors):
        v2f[f] = np.array([total[v] - f2v[f][pos] for pos, v in enumerate(fac.variables)])

    return BPResult(graph, T, f2v, v2f, converged, it, residual)
