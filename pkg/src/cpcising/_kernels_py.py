"""Pure-Python versions of the compiled kernels (same signatures, same arithmetic order)."""
import math

import numpy as np

BACKEND = "python"


def enumerate_energies(masks, coeffs, offset, num_spins):
    """Energy of every configuration; bit i of the index set means spin i = -1."""
    idx = np.arange(1 << num_spins, dtype=np.uint64)
    out = np.full(idx.shape, float(offset))
    for m, c in zip(np.asarray(masks, np.uint64), np.asarray(coeffs, np.float64)):
        odd = (np.bitwise_count(idx & m) & 1).astype(bool)
        out -= np.where(odd, -c, c)
    return out


def run_sweeps(state, term_ptr, term_vars, coeffs, spin_ptr, spin_terms,
               order, uniforms, betas, metropolis, samples_out, record,
               energies_out, energy, best_state):
    """Run ``len(betas)`` sweeps in place; returns (final energy, best energy)."""
    st = [int(v) for v in state]
    coeffs = [float(c) for c in coeffs]
    term_ptr = [int(v) for v in term_ptr]
    term_vars = [int(v) for v in term_vars]
    spin_ptr = [int(v) for v in spin_ptr]
    spin_terms = [int(v) for v in spin_terms]
    adj = [spin_terms[spin_ptr[i]:spin_ptr[i + 1]] for i in range(len(st))]
    prods = []
    for t in range(len(coeffs)):
        pr = 1
        for v in term_vars[term_ptr[t]:term_ptr[t + 1]]:
            pr *= st[v]
        prods.append(pr)
    best_energy = energy
    best = list(st)
    order = np.asarray(order).tolist()
    uniforms = np.asarray(uniforms).tolist()
    for s, beta in enumerate(np.asarray(betas, np.float64).tolist()):
        row_u = uniforms[s]
        for idx, i in enumerate(order[s]):
            field = 0.0
            for t in adj[i]:
                field += coeffs[t] * prods[t]
            field *= st[i]
            if metropolis:
                delta = 2.0 * st[i] * field
                if delta <= 0.0 or row_u[idx] < math.exp(-beta * delta):
                    new = -st[i]
                else:
                    new = st[i]
            else:
                prob_up = 1.0 / (1.0 + math.exp(-2.0 * beta * field))
                new = 1 if row_u[idx] < prob_up else -1
            if new != st[i]:
                energy += 2.0 * st[i] * field
                st[i] = new
                for t in adj[i]:
                    prods[t] = -prods[t]
                if energy < best_energy:
                    best_energy = energy
                    best = list(st)
        energies_out[s] = energy
        if record:
            samples_out[s, :] = st
    state[:] = st
    best_state[:] = best
    return energy, best_energy
