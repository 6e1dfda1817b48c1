"""No-U-Turn sampler with multinomial trajectory sampling.

Trajectories are doubled until the generalized no-U-turn criterion fails,
including the extra checks across neighbouring subtrees. Warmup adapts the
step size by dual averaging and a diagonal inverse metric over expanding
windows (75 / 25, 50, 100, ... / 50 iterations).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .draws import STAT_NAMES, DrawMatrix
from .errors import ConfigurationError, SamplingError

__all__ = [
    "SamplerConfig",
    "AdaptationReport",
    "nuts_sample",
    "chain_rng",
    "leapfrog",
    "DualAveraging",
    "adaptation_windows",
]

logger = logging.getLogger(__name__)

Target = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass(frozen=True)
class SamplerConfig:
    n_warmup: int = 1000
    n_draws: int = 1000
    n_chains: int = 4
    target_accept: float = 0.8
    max_tree_depth: int = 10
    seed: int = 0
    init_radius: float = 2.0
    max_delta_h: float = 1000.0

    def __post_init__(self):
        if self.n_warmup != 0 and self.n_warmup < 150:
            raise ConfigurationError("n_warmup must be 0 (no adaptation) or at least 150")
        if self.n_draws < 1 or self.n_chains < 1:
            raise ConfigurationError("n_draws and n_chains must be positive")
        if not 0.0 < self.target_accept < 1.0:
            raise ConfigurationError("target_accept must lie in (0, 1)")
        if not 1 <= self.max_tree_depth <= 14:
            raise ConfigurationError("max_tree_depth must lie in [1, 14]")
        if not self.init_radius >= 0.0:
            raise ConfigurationError("init_radius must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ConfigurationError("seed must be a 64-bit unsigned integer")


@dataclass
class AdaptationReport:
    step_size: list = field(default_factory=list)
    inv_metric: list = field(default_factory=list)
    warmup_divergences: list = field(default_factory=list)
    n_rejected_nonfinite: list = field(default_factory=list)


def chain_rng(seed: int, chain: int) -> np.random.Generator:
    """Counter-based stream for one chain; independent of the chain count."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(chain)])))


def _logaddexp(a, b):
    hi = a if a > b else b
    if hi == -math.inf:
        return -math.inf
    return hi + math.log1p(math.exp(-abs(a - b)))


class _State:
    __slots__ = ("q", "p", "lp", "grad")

    def __init__(self, q, p, lp, grad):
        self.q, self.p, self.lp, self.grad = q, p, lp, grad

    def copy(self):
        return _State(self.q.copy(), self.p.copy(), self.lp, self.grad.copy())


def leapfrog(target: Target, q, p, grad, eps, inv_metric):
    """One leapfrog step; returns ``(q, p, lp, grad)``."""
    p_half = p + 0.5 * eps * grad
    q_new = q + eps * inv_metric * p_half
    lp, g = target(q_new)
    p_new = p_half + 0.5 * eps * g
    return q_new, p_new, lp, g


class DualAveraging:
    def __init__(self, delta, gamma=0.05, kappa=0.75, t0=10.0):
        self.delta, self.gamma, self.kappa, self.t0 = delta, gamma, kappa, t0
        self.restart(1.0)

    def restart(self, eps):
        self.mu = math.log(10.0 * eps)
        self.counter = 0
        self.s_bar = 0.0
        self.x_bar = 0.0

    def update(self, accept_stat):
        self.counter += 1
        accept_stat = min(1.0, accept_stat)
        eta = 1.0 / (self.counter + self.t0)
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept_stat)
        x = self.mu - self.s_bar * math.sqrt(self.counter) / self.gamma
        x_eta = self.counter ** (-self.kappa)
        self.x_bar = (1.0 - x_eta) * self.x_bar + x_eta * x
        return math.exp(x)

    @property
    def final(self):
        return math.exp(self.x_bar)


def adaptation_windows(n_warmup, init_buffer=75, term_buffer=50, base_window=25):
    """Exclusive end iterations of the slow metric-adaptation windows."""
    last = n_warmup - term_buffer
    ends = []
    start, size = init_buffer, base_window
    while start < last:
        end = start + size
        if end + 2 * size > last:
            end = last
        ends.append(end)
        start, size = end, 2 * size
    return ends


class _Chain:
    def __init__(self, target, dim, config, rng, chain_id):
        self.target = target
        self.dim = dim
        self.config = config
        self.rng = rng
        self.chain_id = chain_id
        self.inv_metric = np.ones(dim)
        self.eps = 1.0
        self.n_nonfinite = 0

    # Hamiltonian pieces -------------------------------------------------

    def _kinetic(self, p):
        return 0.5 * float(np.dot(p, self.inv_metric * p))

    def _hamiltonian(self, state):
        h = -state.lp + self._kinetic(state.p)
        return h if math.isfinite(h) else math.inf

    def _momentum(self):
        return self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)

    def _step(self, state, eps):
        try:
            q, p, lp, g = leapfrog(self.target, state.q, state.p, state.grad, eps, self.inv_metric)
        except (FloatingPointError, ValueError, OverflowError, ArithmeticError) as exc:
            logger.debug("chain %d: target raised %s; treating as divergent", self.chain_id, exc)
            q, p, lp, g = state.q, state.p, -math.inf, state.grad
        if not (math.isfinite(lp) and np.all(np.isfinite(g)) and np.all(np.isfinite(p))):
            self.n_nonfinite += 1
            lp = -math.inf
        return _State(q, p, lp, g)

    # initialisation -----------------------------------------------------

    def initialize(self, q0=None):
        r = self.config.init_radius
        for _ in range(100):
            q = self.rng.uniform(-r, r, self.dim) if q0 is None else np.asarray(q0, dtype=float)
            lp, g = self.target(q)
            if math.isfinite(lp) and np.all(np.isfinite(g)):
                return _State(q, np.zeros(self.dim), lp, g)
            if q0 is not None:
                break
        raise SamplingError(f"chain {self.chain_id}: no finite initial point found")

    def find_reasonable_eps(self, state):
        eps = self.eps
        state = state.copy()
        state.p = self._momentum()
        h0 = self._hamiltonian(state)
        new = self._step(state, eps)
        delta = h0 - self._hamiltonian(new)
        direction = 1 if delta > math.log(0.8) else -1
        for _ in range(100):
            state.p = self._momentum()
            h0 = self._hamiltonian(state)
            new = self._step(state, eps)
            delta = h0 - self._hamiltonian(new)
            if direction == 1 and not delta > math.log(0.8):
                break
            if direction == -1 and not delta < math.log(0.8):
                break
            eps = eps * 2.0 if direction == 1 else eps * 0.5
            if eps > 1e7:
                raise SamplingError(f"chain {self.chain_id}: step size diverged; posterior may be improper")
            if eps < 1e-12:
                break
        self.eps = eps

    # tree building ------------------------------------------------------

    @staticmethod
    def _persist(p_sharp_minus, p_sharp_plus, rho):
        return float(np.dot(p_sharp_plus, rho)) > 0.0 and float(np.dot(p_sharp_minus, rho)) > 0.0

    def _build_tree(self, depth, state, direction, h0, acc):
        """Extend ``state`` by ``2**depth`` leapfrog steps.

        Returns ``(valid, edge_state, proposal, log_weight, rho, p_beg, p_end)``
        where ``beg``/``end`` follow integration order.
        """
        if depth == 0:
            new = self._step(state, direction * self.eps)
            acc["n_leapfrog"] += 1
            h = self._hamiltonian(new)
            if h - h0 > self.config.max_delta_h:
                acc["divergent"] = True
            log_w = h0 - h
            acc["sum_metro"] += 1.0 if log_w > 0.0 else math.exp(log_w)
            valid = not acc["divergent"]
            return valid, new, new, log_w, new.p.copy(), new.p, new.p
        ok, edge, prop_init, lw_init, rho_init, p_beg, p_init_end = self._build_tree(
            depth - 1, state, direction, h0, acc
        )
        if not ok:
            return False, edge, prop_init, lw_init, rho_init, p_beg, p_init_end
        ok, edge, prop_final, lw_final, rho_final, p_final_beg, p_end = self._build_tree(
            depth - 1, edge, direction, h0, acc
        )
        if not ok:
            return False, edge, prop_final, lw_final, rho_final, p_final_beg, p_end
        lw = _logaddexp(lw_init, lw_final)
        proposal = prop_init
        if self.rng.random() < math.exp(lw_final - lw):
            proposal = prop_final
        rho = rho_init + rho_final
        m = self.inv_metric
        persist = self._persist(m * p_beg, m * p_end, rho)
        persist = persist and self._persist(m * p_beg, m * p_final_beg, rho_init + p_final_beg)
        persist = persist and self._persist(m * p_init_end, m * p_end, rho_final + p_init_end)
        return persist, edge, proposal, lw, rho, p_beg, p_end

    def transition(self, state):
        state = state.copy()
        state.p = self._momentum()
        h0 = self._hamiltonian(state)
        left = right = state
        p_left = p_right = state.p
        rho = state.p.copy()
        sample = state
        log_w = 0.0
        acc = {"n_leapfrog": 0, "sum_metro": 0.0, "divergent": False}
        depth = 0
        m = self.inv_metric
        while depth < self.config.max_tree_depth:
            forward = self.rng.random() > 0.5
            start = right if forward else left
            ok, edge, proposal, lw_sub, rho_sub, p_beg, p_end = self._build_tree(
                depth, start, 1.0 if forward else -1.0, h0, acc
            )
            if not ok:
                break
            depth += 1
            if lw_sub > log_w or self.rng.random() < math.exp(lw_sub - log_w):
                sample = proposal
            log_w = _logaddexp(log_w, lw_sub)
            p_adjacent = p_right if forward else p_left
            p_far = p_left if forward else p_right
            rho_old = rho
            rho = rho_old + rho_sub
            if forward:
                right, p_right = edge, p_end
            else:
                left, p_left = edge, p_end
            # whole trajectory, old part plus first new point, new part plus last old point
            persist = (
                self._persist(m * p_left, m * p_right, rho)
                and self._persist(m * p_far, m * p_beg, rho_old + p_beg)
                and self._persist(m * p_adjacent, m * p_end, rho_sub + p_adjacent)
            )
            if not persist:
                break
        n = max(acc["n_leapfrog"], 1)
        stats = {
            "divergent": float(acc["divergent"]),
            "tree_depth": float(depth),
            "n_leapfrog": float(acc["n_leapfrog"]),
            "accept_stat": acc["sum_metro"] / n,
            "energy": self._hamiltonian(sample),
        }
        out = sample.copy()
        return out, stats


def _run_chain(target, dim, config: SamplerConfig, chain_id, init=None):
    rng = chain_rng(config.seed, chain_id)
    chain = _Chain(target, dim, config, rng, chain_id)
    state = chain.initialize(init)
    adapt = config.n_warmup > 0
    n_warm_div = 0
    if adapt:
        chain.find_reasonable_eps(state)
        da = DualAveraging(config.target_accept)
        da.restart(chain.eps)
        ends = adaptation_windows(config.n_warmup)
        window_start = 75
        w_n, w_mean, w_m2 = 0, np.zeros(dim), np.zeros(dim)
        for it in range(config.n_warmup):
            state, stats = chain.transition(state)
            n_warm_div += int(stats["divergent"])
            chain.eps = da.update(stats["accept_stat"])
            if ends and window_start <= it < ends[-1]:
                w_n += 1
                delta = state.q - w_mean
                w_mean += delta / w_n
                w_m2 += delta * (state.q - w_mean)
                if it + 1 in ends:
                    var = w_m2 / max(w_n - 1, 1)
                    var = (w_n / (w_n + 5.0)) * var + 1e-3 * (5.0 / (w_n + 5.0))
                    chain.inv_metric = var
                    chain.find_reasonable_eps(state)
                    da.restart(chain.eps)
                    w_n, w_mean, w_m2 = 0, np.zeros(dim), np.zeros(dim)
        chain.eps = da.final
        if n_warm_div == config.n_warmup:
            raise SamplingError(
                f"chain {chain_id}: every warmup transition diverged (final step size {chain.eps:.3g})"
            )
    else:
        chain.find_reasonable_eps(state)
    qs = np.empty((config.n_draws, dim))
    stats_out = {name: np.empty(config.n_draws) for name in STAT_NAMES}
    for it in range(config.n_draws):
        state, stats = chain.transition(state)
        qs[it] = state.q
        for name in STAT_NAMES:
            stats_out[name][it] = stats[name]
    return qs, stats_out, chain.eps, chain.inv_metric.copy(), n_warm_div, chain.n_nonfinite


def nuts_sample(target: Target, dim: int, config: SamplerConfig, inits=None, names=None):
    """Run ``config.n_chains`` NUTS chains on ``target`` (log density and gradient).

    Returns a :class:`DrawMatrix` of the unconstrained coordinates (post-warmup
    only) and an :class:`AdaptationReport`. Output is a deterministic
    function of ``config.seed``.
    """
    names = list(names) if names is not None else [f"theta[{i + 1}]" for i in range(dim)]
    report = AdaptationReport()
    values, chains, iters = [], [], []
    stats = {name: [] for name in STAT_NAMES}
    for c in range(config.n_chains):
        init = None if inits is None else inits[c]
        qs, st, eps, inv_metric, n_div, n_bad = _run_chain(target, dim, config, c, init)
        values.append(qs)
        chains.append(np.full(config.n_draws, c))
        iters.append(np.arange(config.n_draws))
        for name in STAT_NAMES:
            stats[name].append(st[name])
        report.step_size.append(eps)
        report.inv_metric.append(inv_metric)
        report.warmup_divergences.append(n_div)
        report.n_rejected_nonfinite.append(n_bad)
        if n_bad:
            logger.info("chain %d: %d non-finite proposals rejected", c, n_bad)
    draws = DrawMatrix(
        names,
        np.concatenate(values),
        np.concatenate(chains),
        np.concatenate(iters),
        {name: np.concatenate(v) for name, v in stats.items()},
    )
    return draws, report
