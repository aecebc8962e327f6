"""Episode orchestration, Monte-Carlo batches and summary metrics.

One episode follows the per-CPI order

    predict -> design channels -> placement -> beamformer/AN -> reward
    -> noisy echo from the true state -> EKF update -> advance the truth

Every run index owns independent random streams (motion, echo noise,
initial estimate, agent) derived from ``(seed, run)``.  The first three are
shared by every method so comparisons are paired.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .baselines import (BaselineKind, greedy_placement, mimo_layout, one_d_search,
                        search_grid)
from .config import ScenarioConfig
from .covertness import kl_divergence, lambda_pair
from .errors import TrackingDivergenceError
from .geometry import (ChannelSet, build_channels, doppler_vector, echo_gain,
                       free_space_vector, in_waveguide_vector, mobility_vectors)
from .optimizer import solve_or_fallback
from .sac import SACAgent
from .tracking import EchoObservation, MobilityState, predict, simulate_motion, update

log = logging.getLogger(__name__)

METHODS = ("sac", "1d_search", "greedy", "mimo")
# greedy and MIMO are fed the true warden state, the others the EKF prior
_TRUE_CSI = {"greedy", "mimo"}


def method_name(method) -> str:
    if isinstance(method, BaselineKind):
        return method.value
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    return method


@dataclass(eq=False)
class EpisodeTrace:
    method: str
    run: int
    true_xi: np.ndarray
    est_xi: np.ndarray
    prior_xi: np.ndarray
    rate: np.ndarray
    kl: np.ndarray
    kl_true: np.ndarray
    leak: np.ndarray
    sensing_w: np.ndarray
    p_an: np.ndarray
    feasible: np.ndarray
    action: np.ndarray
    failed: bool = False
    failure: str = ""
    info: dict = field(default_factory=dict)

    def __len__(self):
        return self.rate.size

    @property
    def position_mse(self) -> np.ndarray:
        """Squared position error of the posterior estimate per CPI."""
        d = self.est_xi[:, :2] - self.true_xi[:, :2]
        return np.sum(d * d, axis=1)

    @property
    def velocity_mse(self) -> np.ndarray:
        d = self.est_xi[:, 2:] - self.true_xi[:, 2:]
        return np.sum(d * d, axis=1)

    @property
    def infeasible_fraction(self) -> float:
        return float(1.0 - np.mean(self.feasible)) if len(self) else 1.0


class PlacementEvaluator:
    """Solves one CPI for many candidate placements of a PASS array.

    The receive-side echo gain does not depend on the PA positions, and the
    rows of one waveguide only depend on that waveguide's first PA, so both
    are cached for the lifetime of the evaluator (one CPI).
    """

    def __init__(self, geom, consts, bob, design_state, p_max, gamma_sen, noise, rtol,
                 rx_layout=None):
        self.geom, self.consts = geom, consts
        self.bob = np.asarray(bob, dtype=float)
        self.pos, self.vel = mobility_vectors(design_state)
        rx_layout = geom.layout(consts) if rx_layout is None else rx_layout
        self.echo = echo_gain(rx_layout, self.pos, self.vel, consts)
        self.offsets = geom.inter_pa_spacing * np.arange(geom.pas_per_waveguide)
        self.args = (p_max, gamma_sen, noise, noise, rtol)
        self._rows = {}

    def _row(self, n: int, x: float):
        key = (n, x)
        if key not in self._rows:
            g = self.geom
            xs = x + self.offsets
            pos = np.empty((xs.size, 3))
            pos[:, 0] = xs
            pos[:, 1] = g.waveguide_y[n]
            pos[:, 2] = g.height
            feed = in_waveguide_vector(xs, self.consts)
            a_b = free_space_vector(self.bob, pos, self.consts)
            a_w = (free_space_vector(self.pos, pos, self.consts)
                   * doppler_vector(self.vel, self.pos, pos, self.consts))
            self._rows[key] = (np.vdot(feed, a_b), np.vdot(feed, a_w))
        return self._rows[key]

    def channels(self, x_init) -> ChannelSet:
        rows = [self._row(n, float(x)) for n, x in enumerate(x_init)]
        h_b = np.array([r[0] for r in rows])
        h_w = np.array([r[1] for r in rows])
        return ChannelSet(h_b=h_b, h_w=h_w, H_w=np.outer(self.echo, h_w.conj()),
                          echo_gain=self.echo)

    def solve(self, x_init):
        return solve_or_fallback(self.channels(x_init), *self.args)


def rng_streams(seed: int, run: int) -> dict:
    motion, echo, init, agent = np.random.SeedSequence([int(seed), int(run)]).spawn(4)
    return {name: np.random.default_rng(s) for name, s in
            zip(("motion", "echo", "init", "agent"), (motion, echo, init, agent))}


def initial_estimate(config: ScenarioConfig, rng) -> MobilityState:
    diag = np.asarray(config.willie.init_cov_diag, dtype=float)
    z = rng.standard_normal(4)
    mask = {"none": np.zeros(4), "velocity": np.array([0, 0, 1.0, 1.0]),
            "full": np.ones(4)}[config.willie.init_perturbation]
    return MobilityState(config.willie_xi0 + mask * np.sqrt(diag) * z, np.diag(diag))


def make_agent(config: ScenarioConfig, rng) -> SACAgent:
    geom = config.build_geometry()
    return SACAgent(4 + geom.n_waveguides, geom.n_waveguides, 0.0, geom.x_init_upper,
                    config.sac, rng, state_scale=geom.waveguide_length)


def agent_state(bob, prior: MobilityState, x_init) -> np.ndarray:
    return np.r_[bob[:2], prior.xi[:2], x_init]


def run_episode(config: ScenarioConfig, method, run: int = 0, agent: SACAgent | None = None,
                ) -> EpisodeTrace:
    """Simulate one episode of ``config.T`` CPIs with the given method."""
    method = method_name(method)
    rngs = rng_streams(config.seed, run)
    consts = config.build_constants()
    geom = config.build_geometry()
    motion = config.build_motion()
    bob = config.bob
    p_max, gamma, noise = config.power.p_max, config.power.gamma_sen, config.power.noise
    T, N = config.T, geom.n_waveguides
    rx_layout = geom.layout(consts)
    mimo = mimo_layout(geom, consts, config.mimo_center) if method == "mimo" else None
    grid = search_grid(geom, config.search.n_steps)
    if method == "sac" and agent is None:
        agent = make_agent(config, rngs["agent"])

    truth = MobilityState(config.willie_xi0, np.zeros((4, 4)))
    prior = initial_estimate(config, rngs["init"])
    x_prev = geom.x_init
    s = agent_state(bob, prior, x_prev)

    rec = {k: [] for k in ("true", "est", "prior", "rate", "kl", "kl_true", "leak",
                           "sensing", "p_an", "feasible", "action")}
    failed, failure = False, ""
    for t in range(T):
        design = truth.xi if method in _TRUE_CSI else prior.xi
        if method == "mimo":
            sol = solve_or_fallback(build_channels(mimo, bob, design, consts),
                                    p_max, gamma, noise, noise, config.eig_rtol)
            action = np.full(N, np.nan)
            layout = mimo
        else:
            ev = PlacementEvaluator(geom, consts, bob, design, p_max, gamma, noise,
                                    config.eig_rtol, rx_layout)
            if method == "sac":
                action, _ = agent.act(s)
                sol = ev.solve(action)
            elif method == "1d_search":
                action, sol = one_d_search(ev.solve, grid, N, start=x_prev,
                                           mode=config.search.mode)
            else:
                action = greedy_placement(geom, bob)
                sol = ev.solve(action)
            layout = geom.with_initial(action).layout(consts)

        design_hw = build_channels(layout, bob, design, consts).h_w
        true_ch = build_channels(layout, bob, truth.xi, consts)
        lam0, lam1 = lambda_pair(true_ch.h_w, sol.w, sol.q, noise)
        leak = abs(np.vdot(design_hw, sol.w)) ** 2 / (p_max * np.vdot(design_hw, design_hw).real)

        # unit pilot symbol: c = w + q
        c = sol.w + sol.q
        z = rngs["echo"].standard_normal((2, geom.n_lcx))
        y = true_ch.H_w @ c
        if config.echo_noise:
            y = y + np.sqrt(noise / 2) * (z[0] + 1j * z[1])
        try:
            post = update(prior, EchoObservation(y, noise), layout, consts, c)
        except TrackingDivergenceError as exc:
            failed, failure = True, f"tracking diverged at CPI {t}: {exc}"
            log.warning("run %d (%s): %s", run, method, failure)
            break
        next_prior = predict(post, motion)
        if method == "sac":
            s_next = agent_state(bob, next_prior, action)
            agent.observe(s, action, sol.rate, s_next)
            s = s_next

        rec["true"].append(truth.xi)
        rec["est"].append(post.xi)
        rec["prior"].append(prior.xi)
        rec["rate"].append(sol.rate)
        rec["kl"].append(sol.kl_audit)
        rec["kl_true"].append(kl_divergence(lam0, lam1))
        rec["leak"].append(leak)
        rec["sensing"].append(sol.sensing_power)
        rec["p_an"].append(sol.p_an)
        rec["feasible"].append(sol.feasible)
        rec["action"].append(np.array(action, dtype=float))

        truth = simulate_motion(truth, motion, rngs["motion"])
        prior = next_prior
        if method != "mimo":
            x_prev = np.array(action, dtype=float)

    trace = EpisodeTrace(
        method=method, run=run,
        true_xi=np.array(rec["true"]).reshape(-1, 4),
        est_xi=np.array(rec["est"]).reshape(-1, 4),
        prior_xi=np.array(rec["prior"]).reshape(-1, 4),
        rate=np.array(rec["rate"], dtype=float),
        kl=np.array(rec["kl"], dtype=float),
        kl_true=np.array(rec["kl_true"], dtype=float),
        leak=np.array(rec["leak"], dtype=float),
        sensing_w=np.array(rec["sensing"], dtype=float),
        p_an=np.array(rec["p_an"], dtype=float),
        feasible=np.array(rec["feasible"], dtype=bool),
        action=np.array(rec["action"]).reshape(-1, N),
        failed=failed, failure=failure,
    )
    if not failed and trace.infeasible_fraction > config.infeasible_fail_fraction:
        trace.failed = True
        trace.failure = f"{100 * trace.infeasible_fraction:.1f}% of CPIs infeasible"
    return trace


def monte_carlo(config: ScenarioConfig, methods=METHODS, runs: int | None = None) -> dict:
    """Paired runs of every method; returns ``{method: [EpisodeTrace, ...]}``."""
    runs = config.monte_carlo_runs if runs is None else runs
    out = {}
    for m in methods:
        name = method_name(m)
        out[name] = [run_episode(config, name, r) for r in range(runs)]
    return out


def sweep(config: ScenarioConfig, methods=METHODS, dbm_levels=None, runs=None) -> dict:
    """Monte-Carlo batches over transmit-power levels, keyed by dBm."""
    levels = config.sweep_dbm if dbm_levels is None else dbm_levels
    return {float(p): monte_carlo(config.replace(**{"power.p_max_dbm": float(p)}), methods, runs)
            for p in levels}


# metrics


def moving_average(x, window: int) -> np.ndarray:
    """Trailing mean over the last ``window`` samples (shorter at the start)."""
    x = np.asarray(x, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def empirical_cdf(values):
    """Sorted values and their empirical CDF levels ``k / n``."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    return v, np.arange(1, v.size + 1) / v.size


def mean_rate_trace(traces, window: int) -> np.ndarray:
    rates = np.array([moving_average(t.rate, window) for t in traces])
    return rates.mean(axis=0)


def final_rates(traces, window: int, fraction: float = 0.2) -> np.ndarray:
    """Mean moving-averaged rate of each run over the last ``fraction`` of CPIs."""
    out = []
    for t in traces:
        ma = moving_average(t.rate, window)
        k = max(1, int(round(fraction * ma.size)))
        out.append(ma[-k:].mean())
    return np.array(out)


def trend_slope(y) -> float:
    y = np.asarray(y, dtype=float)
    return float(np.polyfit(np.arange(y.size), y, 1)[0])


def summarize(batch: dict, window: int) -> dict:
    """Per-method scalar summaries of a Monte-Carlo batch."""
    out = {}
    for m, traces in batch.items():
        pos = np.concatenate([t.position_mse for t in traces])
        vel = np.concatenate([t.velocity_mse for t in traces])
        fin = final_rates(traces, window)
        out[m] = {
            "mean_rate": float(np.mean([t.rate.mean() for t in traces])),
            "final_rate": float(fin.mean()),
            "median_position_mse": float(np.median(pos)),
            "median_velocity_mse": float(np.median(vel)),
            "infeasible_fraction": float(np.mean([t.infeasible_fraction for t in traces])),
            "failed_runs": int(sum(t.failed for t in traces)),
            "max_kl": float(max(t.kl.max() for t in traces)),
            "max_kl_true": float(max(t.kl_true.max() for t in traces)),
        }
    return out


def paired_margin(a, b):
    """Mean paired difference ``a - b`` and its standard error."""
    d = np.asarray(a) - np.asarray(b)
    se = float(np.std(d, ddof=1) / np.sqrt(d.size)) if d.size > 1 else float("inf")
    return float(d.mean()), se
