"""Independent brute-force constructions used as oracles.

Everything here is built straight from second-quantized operator actions on
occupation triples, with no reference to the package's closed-form ladder
expressions, so agreement is a real cross-check rather than a tautology.
"""

import numpy as np


def enumerate_triples(n_total, magnetization):
    """All occupation triples (N_plus, N_0, N_minus) of the sector, found by
    exhaustive search over nonnegative integers, ordered by N_plus."""
    out = []
    for a in range(n_total + 1):
        c = a - magnetization
        b = n_total - a - c
        if c >= 0 and b >= 0:
            out.append((a, b, c))
    return out


def pair_create(triple):
    """c+^dag c-^dag c0 c0 action: amplitude and target triple (or None)."""
    a, b, c = triple
    if b < 2:
        return None
    amp = np.sqrt(b * (b - 1) * (a + 1) * (c + 1))
    return amp, (a + 1, b - 2, c + 1)


def pair_annihilate(triple):
    """c0^dag c0^dag c+ c- action: amplitude and target triple (or None)."""
    a, b, c = triple
    if a < 1 or c < 1:
        return None
    amp = np.sqrt(a * c * (b + 1) * (b + 2))
    return amp, (a - 1, b + 2, c - 1)


def brute_hamiltonian(n_total, magnetization, sigma, q_prime=0.0):
    """Dense sector Hamiltonian assembled operator by operator."""
    triples = enumerate_triples(n_total, magnetization)
    index = {t: i for i, t in enumerate(triples)}
    dim = len(triples)
    h = np.zeros((dim, dim))
    for i, (a, b, c) in enumerate(triples):
        mag = a - c
        h[i, i] = sigma * (mag**2 + (2 * b - 1) * (a + c)) - q_prime * b
        for action in (pair_create, pair_annihilate):
            hit = action((a, b, c))
            if hit is None:
                continue
            amp, target = hit
            j = index[target]
            h[j, i] += sigma * 2.0 * amp
    return np.asarray(h), triples


def closed_form_spectrum(n_total, sigma):
    """Sorted M = 0 spectrum from the collective-spin closed form
    sigma * (J(J+1) - 2N) over J of the same parity as N."""
    j_min = 0 if n_total % 2 == 0 else 1
    vals = [sigma * (j * (j + 1) - 2 * n_total) for j in range(j_min, n_total + 1, 2)]
    return np.sort(np.array(vals, dtype=float))
