"""Independent reference computations used by the tests.

These deliberately take the expensive route (M x M factorizations through
scipy, plain enumeration) so they share no code path with the package.
"""

import math

import numpy as np
import scipy.linalg as sla


def dense_gamma(S, inst):
    """(gamma1, gamma2, gamma3) from an M x M Cholesky factorization of Phi(S)."""
    prm = inst.params
    S = list(S)
    As = inst.matrix[:, S]
    Phi = prm.sigma1**2 * As @ As.T + prm.sigma_e**2 * np.eye(prm.M)
    c, low = sla.cho_factor(Phi, lower=True)
    g1 = 2.0 * np.sum(np.log(np.diag(c)))
    w = inst.observation - prm.mu1 * As.sum(axis=1)
    g2 = float(w @ sla.cho_solve((c, low), w))
    g3 = len(S) * math.log((1 - prm.p) / prm.p)
    return g1, g2, g3


def dense_total(S, inst):
    g1, g2, g3 = dense_gamma(S, inst)
    return 0.5 * g1 + 0.5 * g2 + g3


def enumerate_argmin_by_bitmask(inst, cap):
    """Minimize the dense objective visiting supports in descending bitmask order."""
    N = inst.params.N
    best_key = None
    for mask in range(2**N - 1, -1, -1):
        if bin(mask).count("1") > cap:
            continue
        S = tuple(i for i in range(N) if mask >> i & 1)
        key = (dense_total(S, inst), len(S), S)
        if best_key is None or key < best_key:
            best_key = key
    return best_key[2], best_key[0]
