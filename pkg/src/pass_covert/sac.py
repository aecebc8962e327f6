"""Soft actor-critic agent for choosing the initial PA coordinates.

Everything is plain numpy: the networks come from :mod:`pass_covert.nn`
and every gradient below is written out by hand (the test-suite checks
them against finite differences).

Actions are squashed with ``tanh`` onto ``[low, high]``.  Log-densities are
expressed in physical action units (metres), i.e. they include the squash
Jacobian and the affine scale.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import BufferNotReady, ConfigurationError, TrainingDivergenceError
from .nn import MLP, make_optimizer

CHECKPOINT_VERSION = 1
LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class SACConfig:
    hidden: int = 128
    n_hidden_layers: int = 2
    lr_actor: float = 3e-4
    lr_critic: float = 3e-3
    lr_temperature: float = 3e-4
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 64
    buffer_size: int = 1000
    min_buffer: int = 100
    target_entropy: float = -3.0
    init_log_phi: float = -4.605170185988091
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    init_log_std: float = 0.0
    optimizer: str = "adam"
    updates_per_step: int = 1
    reward_scale: float = 0.1

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ConfigurationError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.batch_size > self.min_buffer or self.min_buffer > self.buffer_size:
            raise ConfigurationError("need batch_size <= min_buffer <= buffer_size")
        if not 0 <= self.tau <= 1 or not 0 <= self.gamma <= 1:
            raise ConfigurationError("tau and gamma must lie in [0, 1]")
        if self.hidden < 1 or self.n_hidden_layers < 1 or self.updates_per_step < 0:
            raise ConfigurationError("invalid network size or update count")


@dataclass(frozen=True, eq=False)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray


@dataclass(frozen=True, eq=False)
class Batch:
    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray

    def __len__(self):
        return self.r.size


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, min_size: int = 1):
        self.capacity = int(capacity)
        self.min_size = int(min_size)
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s_next = np.zeros((capacity, state_dim))
        self.size = 0
        self.head = 0

    def __len__(self):
        return self.size

    @property
    def ready(self) -> bool:
        return self.size >= self.min_size

    def push(self, s, a, r, s_next):
        if r < 0:
            raise ValueError("rewards are rates and cannot be negative")
        i = self.head
        self.s[i], self.a[i], self.r[i], self.s_next[i] = s, a, r, s_next
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def get(self, i: int) -> Transition:
        """Transition ``i`` counted from the oldest stored entry."""
        j = (self.head - self.size + i) % self.capacity
        return Transition(self.s[j].copy(), self.a[j].copy(), float(self.r[j]),
                          self.s_next[j].copy())

    def sample(self, n: int, rng) -> Batch:
        if self.size < max(self.min_size, n):
            raise BufferNotReady(f"buffer holds {self.size} transitions, need {self.min_size}")
        idx = rng.choice(self.size, size=n, replace=False)
        return Batch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx])

    def state_dict(self) -> dict:
        return {"s": self.s, "a": self.a, "r": self.r, "s_next": self.s_next,
                "size": np.array(self.size), "head": np.array(self.head)}

    def load_state_dict(self, d):
        self.s, self.a, self.r, self.s_next = (np.array(d[k]) for k in ("s", "a", "r", "s_next"))
        self.size, self.head = int(d["size"]), int(d["head"])


def _log1m_tanh2(u):
    """Stable ``log(1 - tanh(u)^2)``."""
    return 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise TrainingDivergenceError("non-finite network output")


class GaussianPolicy:
    """Tanh-squashed diagonal Gaussian policy on a box ``[low, high]``."""

    def __init__(self, state_dim, action_dim, low, high, cfg: SACConfig, rng=None,
                 state_scale=1.0):
        self.state_dim, self.action_dim = state_dim, action_dim
        self.low = np.broadcast_to(np.asarray(low, dtype=float), (action_dim,)).copy()
        self.high = np.broadcast_to(np.asarray(high, dtype=float), (action_dim,)).copy()
        if np.any(self.high <= self.low):
            raise ConfigurationError("action upper bound must exceed the lower bound")
        self.half = 0.5 * (self.high - self.low)
        self.state_scale = state_scale
        self.log_std_min, self.log_std_max = cfg.log_std_min, cfg.log_std_max
        sizes = (state_dim,) + (cfg.hidden,) * cfg.n_hidden_layers + (2 * action_dim,)
        self.net = MLP(sizes, rng)
        # start the log-std head at a chosen spread
        _, b_last = list(self.net.layers())[-1]
        b_last[action_dim:] = cfg.init_log_std

    def heads(self, s, params=None):
        out, acts = self.net.forward(np.atleast_2d(s) / self.state_scale, params)
        _check_finite(out)
        mu = out[:, :self.action_dim]
        raw_log_std = out[:, self.action_dim:]
        log_std = np.clip(raw_log_std, self.log_std_min, self.log_std_max)
        inside = (raw_log_std > self.log_std_min) & (raw_log_std < self.log_std_max)
        return mu, log_std, inside, acts

    def squash(self, u):
        return self.low + self.half * (np.tanh(u) + 1.0)

    def log_prob_raw(self, u, mu, log_std):
        """Log-density of the squashed action given its pre-squash value ``u``."""
        z = (u - mu) / np.exp(log_std)
        logp = -0.5 * z * z - log_std - 0.5 * LOG_2PI
        logp = logp - _log1m_tanh2(u) - np.log(self.half)
        return logp.sum(axis=-1)

    def log_prob(self, s, a, params=None):
        """Log-density of physical action(s) ``a`` in state(s) ``s``."""
        mu, log_std, _, _ = self.heads(s, params)
        t = (np.atleast_2d(a) - self.low) / self.half - 1.0
        return self.log_prob_raw(np.arctanh(t), mu, log_std)

    def sample(self, s, eps, params=None):
        """Reparameterised sample ``a = squash(mu + sigma * eps)``."""
        mu, log_std, inside, acts = self.heads(s, params)
        eps = np.asarray(eps, dtype=float).reshape(mu.shape)
        u = mu + np.exp(log_std) * eps
        a = self.squash(u)
        logp = self.log_prob_raw(u, mu, log_std)
        return a, logp, dict(mu=mu, log_std=log_std, inside=inside, acts=acts, u=u, eps=eps)


def act(s, policy: GaussianPolicy, rng, deterministic: bool = False):
    """Action for a single state and its log-density."""
    s = np.atleast_2d(s)
    if deterministic:
        mu, log_std, _, _ = policy.heads(s)
        return policy.squash(mu)[0], float(policy.log_prob_raw(mu, mu, log_std)[0])
    eps = rng.standard_normal((1, policy.action_dim))
    a, logp, _ = policy.sample(s, eps)
    return a[0], float(logp[0])


class Critic:
    """Q(s, a) network on normalised states and actions."""

    def __init__(self, state_dim, action_dim, cfg: SACConfig, rng=None, state_scale=1.0,
                 action_scale=1.0, net=None):
        self.state_dim, self.action_dim = state_dim, action_dim
        self.state_scale, self.action_scale = state_scale, action_scale
        sizes = (state_dim + action_dim,) + (cfg.hidden,) * cfg.n_hidden_layers + (1,)
        self.net = net if net is not None else MLP(sizes, rng)

    def copy(self) -> "Critic":
        c = Critic.__new__(Critic)
        c.__dict__.update(self.__dict__)
        c.net = self.net.copy()
        return c

    def _inputs(self, s, a):
        return np.hstack([np.atleast_2d(s) / self.state_scale,
                          np.atleast_2d(a) / self.action_scale])

    def forward(self, s, a, params=None):
        out, acts = self.net.forward(self._inputs(s, a), params)
        _check_finite(out)
        return out[:, 0], acts

    def __call__(self, s, a, params=None):
        return self.forward(s, a, params)[0]

    def backward(self, acts, grad_q):
        """Parameter gradient and d/da (physical units) of ``sum(grad_q * Q)``."""
        gp, gx = self.net.backward(acts, np.asarray(grad_q).reshape(-1, 1))
        return gp, gx[:, self.state_dim:] / self.action_scale


def critic_target(batch: Batch, critics_target, policy: GaussianPolicy, phi: float,
                  gamma: float, eps) -> np.ndarray:
    """Soft Bellman target ``r + gamma * (min_j Q_j'(s', a') - phi log pi(a'|s'))``."""
    a2, logp2, _ = policy.sample(batch.s_next, eps)
    q_next = np.minimum(critics_target[0](batch.s_next, a2), critics_target[1](batch.s_next, a2))
    return batch.r + gamma * (q_next - phi * logp2)


def critic_loss_grad(critic: Critic, batch: Batch, y):
    """Mean of ``0.5 (Q - y)^2`` and its parameter gradient."""
    q, acts = critic.forward(batch.s, batch.a)
    err = q - y
    loss = 0.5 * float(np.mean(err * err))
    grad, _ = critic.backward(acts, err / err.size)
    return loss, grad


def update_critics(batch: Batch, critics, targets, policy, phi, optimizers, gamma, eps):
    """One gradient step per critic; returns the summed pre-step loss."""
    y = critic_target(batch, targets, policy, phi, gamma, eps)
    total = 0.0
    for critic, opt in zip(critics, optimizers):
        loss, grad = critic_loss_grad(critic, batch, y)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingDivergenceError("critic loss diverged")
        opt.step(critic.net.params, grad)
        total += loss
    return total


def actor_loss_grad(policy: GaussianPolicy, critics, s, phi: float, eps):
    """``mean(phi log pi - min_j Q_j)`` and its gradient w.r.t. policy parameters."""
    a, logp, c = policy.sample(s, eps)
    q1, acts1 = critics[0].forward(s, a)
    q2, acts2 = critics[1].forward(s, a)
    use_first = q1 <= q2
    q_min = np.where(use_first, q1, q2)
    n = q_min.size
    loss = float(np.mean(phi * logp - q_min))

    _, dq1 = critics[0].backward(acts1, use_first.astype(float))
    _, dq2 = critics[1].backward(acts2, (~use_first).astype(float))
    dq_da = dq1 + dq2

    t = np.tanh(c["u"])
    sigma_eps = np.exp(c["log_std"]) * c["eps"]
    da_du = policy.half * (1.0 - t * t)
    # d log pi / du = 2 tanh(u) from the squash correction; d u/d log_std = sigma * eps
    dl_dmu = phi * 2.0 * t - dq_da * da_du
    dl_dlogstd = phi * (-1.0 + 2.0 * t * sigma_eps) - dq_da * da_du * sigma_eps
    dl_dlogstd = dl_dlogstd * c["inside"]
    grad_out = np.hstack([dl_dmu, dl_dlogstd]) / n
    grad, _ = policy.net.backward(c["acts"], grad_out)
    return loss, grad


def update_actor(batch: Batch, policy, critics, phi, optimizer, eps):
    loss, grad = actor_loss_grad(policy, critics, batch.s, phi, eps)
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        raise TrainingDivergenceError("actor loss diverged")
    optimizer.step(policy.net.params, grad)
    return loss


@dataclass
class Temperature:
    log_phi: float = 0.0
    target_entropy: float = -3.0

    @property
    def phi(self) -> float:
        return float(np.exp(self.log_phi))

    def loss_grad(self, logp):
        """``-phi * mean(log pi + H0)`` and its derivative w.r.t. ``log_phi``."""
        m = float(np.mean(logp)) + self.target_entropy
        return -self.phi * m, -self.phi * m


def update_temperature(batch: Batch, policy, temp: Temperature, lr_phi: float, eps,
                       optimizer=None) -> float:
    _, logp, _ = policy.sample(batch.s, eps)
    _, g = temp.loss_grad(logp)
    if optimizer is None:
        temp.log_phi -= lr_phi * g
    else:
        box = np.array([temp.log_phi])
        optimizer.step(box, np.array([g]))
        temp.log_phi = float(box[0])
    return temp.phi


def soft_sync(critics, targets, tau: float):
    """``target <- tau * online + (1 - tau) * target`` in place."""
    for c, t in zip(critics, targets):
        t.net.params *= 1.0 - tau
        t.net.params += tau * c.net.params


class SACAgent:
    """Actor, twin critics, target critics, temperature and replay buffer."""

    def __init__(self, state_dim: int, action_dim: int, low, high, cfg: SACConfig | None = None,
                 rng=None, state_scale: float = 1.0):
        self.cfg = cfg = SACConfig() if cfg is None else cfg
        self.rng = np.random.default_rng() if rng is None else rng
        self.state_dim, self.action_dim = state_dim, action_dim
        self.state_scale = state_scale
        self.policy = GaussianPolicy(state_dim, action_dim, low, high, cfg, self.rng, state_scale)
        self.critics = [Critic(state_dim, action_dim, cfg, self.rng, state_scale, state_scale)
                        for _ in range(2)]
        self.targets = [c.copy() for c in self.critics]
        self.temp = Temperature(cfg.init_log_phi, cfg.target_entropy)
        self.buffer = ReplayBuffer(cfg.buffer_size, state_dim, action_dim, cfg.min_buffer)
        self.opt_actor = make_optimizer(cfg.optimizer, cfg.lr_actor)
        self.opt_critics = [make_optimizer(cfg.optimizer, cfg.lr_critic) for _ in range(2)]
        self.opt_temp = make_optimizer(cfg.optimizer, cfg.lr_temperature)
        self.n_updates = 0

    def act(self, s, deterministic: bool = False):
        return act(s, self.policy, self.rng, deterministic)

    def observe(self, s, a, r, s_next) -> bool:
        """Store a transition and train if the buffer is warm; True if trained."""
        self.buffer.push(s, a, r * self.cfg.reward_scale, s_next)
        if not self.buffer.ready:
            return False
        for _ in range(self.cfg.updates_per_step):
            self.train_step()
        return self.cfg.updates_per_step > 0

    def train_step(self) -> dict:
        cfg = self.cfg
        batch = self.buffer.sample(cfg.batch_size, self.rng)
        shape = (len(batch), self.action_dim)
        phi = self.temp.phi
        q_loss = update_critics(batch, self.critics, self.targets, self.policy, phi,
                                self.opt_critics, cfg.gamma, self.rng.standard_normal(shape))
        pi_loss = update_actor(batch, self.policy, self.critics, phi, self.opt_actor,
                               self.rng.standard_normal(shape))
        update_temperature(batch, self.policy, self.temp, cfg.lr_temperature,
                           self.rng.standard_normal(shape), self.opt_temp)
        soft_sync(self.critics, self.targets, cfg.tau)
        self.n_updates += 1
        return {"critic_loss": q_loss, "actor_loss": pi_loss, "phi": self.temp.phi}

    # checkpoint field order: version, config, sizes, policy, q1, q2, q1_target,
    # q2_target, log_phi, n_updates, rng, optimiser moments, buffer

    def save(self, path):
        arrays = {
            "version": np.array(CHECKPOINT_VERSION),
            "config": np.array(json.dumps(asdict(self.cfg))),
            "dims": np.array([self.state_dim, self.action_dim]),
            "bounds": np.vstack([self.policy.low, self.policy.high]),
            "state_scale": np.array(self.state_scale),
            "policy": self.policy.net.params,
            "q1": self.critics[0].net.params,
            "q2": self.critics[1].net.params,
            "q1_target": self.targets[0].net.params,
            "q2_target": self.targets[1].net.params,
            "log_phi": np.array(self.temp.log_phi),
            "n_updates": np.array(self.n_updates),
            "rng": np.array(json.dumps(self.rng.bit_generator.state)),
        }
        opts = {"actor": self.opt_actor, "q1": self.opt_critics[0],
                "q2": self.opt_critics[1], "temp": self.opt_temp}
        for name, opt in opts.items():
            for k, v in opt.state_dict().items():
                arrays[f"opt_{name}_{k}"] = v
        for k, v in self.buffer.state_dict().items():
            arrays[f"buffer_{k}"] = v
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path) -> "SACAgent":
        with np.load(path, allow_pickle=False) as d:
            if int(d["version"]) != CHECKPOINT_VERSION:
                raise ConfigurationError(f"unsupported checkpoint version {int(d['version'])}")
            cfg = SACConfig(**json.loads(str(d["config"])))
            state_dim, action_dim = (int(x) for x in d["dims"])
            rng = np.random.default_rng()
            agent = cls(state_dim, action_dim, d["bounds"][0], d["bounds"][1], cfg, rng,
                        float(d["state_scale"]))
            agent.policy.net.params = d["policy"].copy()
            for net, key in zip(agent.critics + agent.targets,
                                ("q1", "q2", "q1_target", "q2_target")):
                net.net.params = d[key].copy()
            agent.temp.log_phi = float(d["log_phi"])
            agent.n_updates = int(d["n_updates"])
            agent.rng.bit_generator.state = json.loads(str(d["rng"]))
            opts = {"actor": agent.opt_actor, "q1": agent.opt_critics[0],
                    "q2": agent.opt_critics[1], "temp": agent.opt_temp}
            for name, opt in opts.items():
                prefix = f"opt_{name}_"
                opt.load_state_dict({k[len(prefix):]: d[k] for k in d.files if k.startswith(prefix)})
            agent.buffer.load_state_dict({k[len("buffer_"):]: d[k] for k in d.files
                                          if k.startswith("buffer_")})
        return agent
