"""Pure-NumPy coordinate-descent sweeps (fallback backend).

Same contracts as the compiled kernels: one cyclic pass minimizing
    0.5 * beta' (alpha*G + ridge*I) beta - c' beta + lam * ||beta||_1
returning the largest absolute coefficient change.

``cd_sweep`` works in Gram space, updating ``g = G @ beta`` in place
(length-p updates, best when p is modest). ``cd_sweep_resid`` works in
fitted-value space, updating ``r = X @ beta`` (length-n updates, best for
wide designs); ``XT`` is the C-contiguous transpose of X and ``diag`` the
column norms diag(G).
"""

NAME = "numpy"


def cd_sweep(G, c, beta, g, alpha, ridge, lam):
    p = beta.shape[0]
    max_delta = 0.0
    for j in range(p):
        gjj = G[j, j]
        d = alpha * gjj + ridge
        if d <= 0.0:
            continue
        bj = beta[j]
        rho = c[j] - alpha * (g[j] - gjj * bj)
        if rho > lam:
            bnew = (rho - lam) / d
        elif rho < -lam:
            bnew = (rho + lam) / d
        else:
            bnew = 0.0
        diff = bnew - bj
        if diff != 0.0:
            g += G[j] * diff
            beta[j] = bnew
            ad = abs(diff)
            if ad > max_delta:
                max_delta = ad
    return max_delta


def cd_sweep_resid(XT, diag, c, beta, r, alpha, ridge, lam):
    p = beta.shape[0]
    max_delta = 0.0
    for j in range(p):
        gjj = diag[j]
        d = alpha * gjj + ridge
        if d <= 0.0:
            continue
        bj = beta[j]
        xj = XT[j]
        rho = c[j] - alpha * (float(xj @ r) - gjj * bj)
        if rho > lam:
            bnew = (rho - lam) / d
        elif rho < -lam:
            bnew = (rho + lam) / d
        else:
            bnew = 0.0
        diff = bnew - bj
        if diff != 0.0:
            r += xj * diff
            beta[j] = bnew
            ad = abs(diff)
            if ad > max_delta:
                max_delta = ad
    return max_delta
