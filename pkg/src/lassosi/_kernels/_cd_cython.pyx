# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled coordinate-descent sweeps.

One cyclic pass minimizing
    0.5 * beta' (alpha*G + ridge*I) beta - c' beta + lam * ||beta||_1
returning the largest absolute coefficient change.

``cd_sweep`` works in Gram space (g = G @ beta maintained, length-p
updates). ``cd_sweep_resid`` works in fitted-value space (r = X @ beta
maintained, length-n updates; XT is the contiguous transpose of X and
``diag`` the column norms), which wins on wide designs.
"""

NAME = "cython"


def cd_sweep(double[:, ::1] G, double[::1] c, double[::1] beta,
             double[::1] g, double alpha, double ridge, double lam):
    cdef Py_ssize_t p = beta.shape[0]
    cdef Py_ssize_t j, k
    cdef double gjj, d, bj, rho, bnew, diff, ad
    cdef double max_delta = 0.0

    with nogil:
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
                # G is symmetric: row j doubles as column j (contiguous).
                for k in range(p):
                    g[k] += G[j, k] * diff
                beta[j] = bnew
                ad = diff if diff > 0.0 else -diff
                if ad > max_delta:
                    max_delta = ad
    return max_delta


def cd_sweep_resid(double[:, ::1] XT, double[::1] diag, double[::1] c,
                   double[::1] beta, double[::1] r, double alpha,
                   double ridge, double lam):
    cdef Py_ssize_t p = beta.shape[0]
    cdef Py_ssize_t n = r.shape[0]
    cdef Py_ssize_t j, k
    cdef double gjj, d, bj, rho, bnew, diff, ad, acc
    cdef double max_delta = 0.0

    with nogil:
        for j in range(p):
            gjj = diag[j]
            d = alpha * gjj + ridge
            if d <= 0.0:
                continue
            bj = beta[j]
            acc = 0.0
            for k in range(n):
                acc += XT[j, k] * r[k]
            rho = c[j] - alpha * (acc - gjj * bj)
            if rho > lam:
                bnew = (rho - lam) / d
            elif rho < -lam:
                bnew = (rho + lam) / d
            else:
                bnew = 0.0
            diff = bnew - bj
            if diff != 0.0:
                for k in range(n):
                    r[k] += XT[j, k] * diff
                beta[j] = bnew
                ad = diff if diff > 0.0 else -diff
                if ad > max_delta:
                    max_delta = ad
    return max_delta
