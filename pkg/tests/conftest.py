import numpy as np
import pytest

from lassosi.inference import make_target
from lassosi.lasso import ProblemData, solve_lasso


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_instance(seed, n=20, p=8, lam=1.0, beta=None, require_active=True):
    """Standard-normal design/noise instance; re-draws until a feature is
    selected when asked to."""
    for shift in range(50):
        r = np.random.default_rng(seed * 1000 + shift)
        X = r.standard_normal((n, p))
        y = X @ beta if beta is not None else np.zeros(n)
        y = y + r.standard_normal(n)
        data = ProblemData(X, y, np.eye(n), lam)
        sol = solve_lasso(data)
        if sol.active.size or not require_active:
            return data, sol
    raise AssertionError("no active set after 50 redraws")


def target_for(data, sol, pos=0, variant="tn-a"):
    j = int(sol.active[pos])
    return make_target(
        variant, j, X=data.X, y_obs=data.y, sigma=data.sigma, A_obs=sol.active
    )
