import numpy as np

from gdr2.draws import STAT_NAMES, DrawMatrix, gdr2_columns


def make_draws(b0, b, sigma, n_chains=1, rng=None):
    """GDR2-shaped draw matrix from coefficient arrays; unused columns are filled plausibly."""
    b = np.atleast_2d(np.asarray(b, dtype=float))
    S, K = b.shape
    b0 = np.broadcast_to(np.asarray(b0, dtype=float), (S,))
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (S,))
    r2 = np.full(S, 0.5) if rng is None else rng.uniform(0.05, 0.95, S)
    phi = np.full((S, K), 1.0 / K) if rng is None else rng.dirichlet(np.ones(K), S)
    values = np.column_stack([b0, b, sigma, r2, r2 / (1 - r2), phi])
    per = S // n_chains
    chain = np.repeat(np.arange(n_chains), per)
    iteration = np.tile(np.arange(per), n_chains)
    stats = None
    if rng is not None:
        stats = {name: rng.integers(0, 5, S).astype(float) for name in STAT_NAMES}
        stats["accept_stat"] = rng.random(S)
        stats["energy"] = rng.standard_normal(S) * 1e3
    return DrawMatrix(gdr2_columns(K), values, chain, iteration, stats or {})
