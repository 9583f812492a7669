"""Soft actor-critic over residual joint actions.

The actor is a squashed-Gaussian policy (tanh of a reparameterized normal,
scaled to the increment range) and the critic a pair of soft Q-networks
with target copies.  Losses and their gradients are written out by hand on
top of the Mlp backward pass: the critic regresses the entropy-adjusted
bootstrap target through the minimum of the target critics, and the actor
descends alpha*logp - min(Q1, Q2) through the reparameterized sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .nets import Adam, Mlp, checksum, flatten

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0
LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class SacConfig:
    obs_dim: int
    act_dim: int = 12
    hidden: tuple[int, ...] = (256, 256)
    act_scale: float = 0.2
    lr: float = 3e-4
    alpha: float = 0.2
    gamma: float = 0.99
    tau: float = 0.005
    batch_size: int = 256

    def __post_init__(self):
        if self.obs_dim < 1 or self.act_dim < 1:
            raise ValueError("dimensions must be positive")
        if not (0.0 <= self.gamma <= 1.0) or not (0.0 < self.tau <= 1.0):
            raise ValueError("gamma must lie in [0, 1] and tau in (0, 1]")
        if self.act_scale <= 0.0:
            raise ValueError("act_scale must be positive")


class ReplayBuffer:
    """Fixed-capacity ring of transitions with uniform minibatch sampling."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self.head = 0
        self.total_pushed = 0

    def push(self, obs, act, rew, next_obs, done: bool) -> None:
        i = self.head
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.next_obs[i] = next_obs
        self.done[i] = 1.0 if done else 0.0
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.total_pushed += 1

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform without replacement within the minibatch."""
        if batch > self.size:
            raise ValueError("batch larger than stored transitions")
        n = self.size
        if batch * 4 >= n:
            return rng.permutation(n)[:batch]
        # rejection loop; cheap because batch << n
        chosen = []
        seen = set()
        while len(chosen) < batch:
            for i in rng.integers(0, n, size=batch):
                i = int(i)
                if i not in seen:
                    seen.add(i)
                    chosen.append(i)
                    if len(chosen) == batch:
                        break
        return np.asarray(chosen)

    def gather(self, idx: np.ndarray) -> dict[str, np.ndarray]:
        return {
            "obs": self.obs[idx],
            "act": self.act[idx],
            "rew": self.rew[idx],
            "next_obs": self.next_obs[idx],
            "done": self.done[idx],
        }

    def sample(self, batch: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        return self.gather(self.sample_indices(batch, rng))


def _stable_log_one_minus_tanh_sq(u: np.ndarray) -> np.ndarray:
    # log(1 - tanh(u)^2) = 2*(log 2 - u - log(1 + exp(-2u)))
    return 2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


class GaussianPolicy:
    """Squashed-Gaussian actor: obs -> (mean, log_std) -> tanh sample * scale."""

    def __init__(self, cfg: SacConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.net = Mlp((cfg.obs_dim, *cfg.hidden, 2 * cfg.act_dim), rng)

    def _heads(self, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        d = self.cfg.act_dim
        mean = raw[:, :d]
        log_std_raw = raw[:, d:]
        log_std = np.clip(log_std_raw, LOG_STD_MIN, LOG_STD_MAX)
        clip_mask = ((log_std_raw > LOG_STD_MIN) & (log_std_raw < LOG_STD_MAX)).astype(float)
        return mean, log_std, clip_mask

    def sample(self, obs: np.ndarray, noise: np.ndarray):
        """Reparameterized actions for a batch of observations.

        noise is the standard-normal draw, shape (batch, act_dim); holding
        it fixed makes the sample a deterministic function of the
        parameters, which is what both the loss gradients and the
        finite-difference checks differentiate through.

        Returns (action, logp, aux) where aux carries what backward needs.
        """
        raw, cache = self.net.forward(obs)
        mean, log_std, clip_mask = self._heads(raw)
        std = np.exp(log_std)
        u = mean + std * noise
        squashed = np.tanh(u)
        action = self.cfg.act_scale * squashed
        logp = np.sum(
            -0.5 * LOG_2PI - log_std - 0.5 * noise * noise
            - math.log(self.cfg.act_scale) - _stable_log_one_minus_tanh_sq(u),
            axis=1,
        )
        aux = {
            "cache": cache, "mean": mean, "log_std": log_std, "std": std,
            "noise": noise, "squashed": squashed, "clip_mask": clip_mask,
        }
        return action, logp, aux

    def backward_sample(self, aux, d_action: np.ndarray, d_logp: np.ndarray):
        """Parameter gradients given dL/d(action) and dL/d(logp).

        d_logp is (batch,), d_action (batch, act_dim).
        """
        squashed = aux["squashed"]
        std, noise = aux["std"], aux["noise"]
        one_m_sq = 1.0 - squashed * squashed
        dl = d_logp[:, None]
        # logp paths: d/dmean = 2*tanh(u), d/dlog_std = -1 + 2*tanh(u)*std*eps
        d_mean = dl * (2.0 * squashed)
        d_log_std = dl * (2.0 * squashed * std * noise - 1.0)
        # action paths: da/du = scale*(1 - tanh^2), du/dmean = 1, du/dlog_std = std*eps
        da_du = self.cfg.act_scale * one_m_sq
        d_mean = d_mean + d_action * da_du
        d_log_std = d_log_std + d_action * da_du * std * noise
        d_raw = np.concatenate([d_mean, d_log_std * aux["clip_mask"]], axis=1)
        grads, _ = self.net.backward(aux["cache"], d_raw)
        return grads

    def log_prob(self, obs: np.ndarray, action: np.ndarray) -> np.ndarray:
        """Exact log-density of given actions, for density validation."""
        raw, _ = self.net.forward(obs)
        mean, log_std, _ = self._heads(raw)
        std = np.exp(log_std)
        r = np.clip(action / self.cfg.act_scale, -1.0 + 1e-15, 1.0 - 1e-15)
        u = np.arctanh(r)
        z = (u - mean) / std
        return np.sum(
            -0.5 * LOG_2PI - log_std - 0.5 * z * z
            - math.log(self.cfg.act_scale) - np.log1p(-(r * r)),
            axis=1,
        )

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        noise = rng.standard_normal((1, self.cfg.act_dim))
        action, _, _ = self.sample(obs[None, :], noise)
        return action[0]

    def act_mean(self, obs: np.ndarray) -> np.ndarray:
        raw, _ = self.net.forward(obs[None, :])
        mean, _, _ = self._heads(raw)
        return self.cfg.act_scale * np.tanh(mean[0])


class QNetwork:
    """Scalar soft Q-function over concatenated (obs, action)."""

    def __init__(self, cfg: SacConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.net = Mlp((cfg.obs_dim + cfg.act_dim, *cfg.hidden, 1), rng)

    def value(self, obs: np.ndarray, act: np.ndarray):
        x = np.concatenate([obs, act], axis=1)
        q, cache = self.net.forward(x)
        return q[:, 0], cache

    def backward(self, cache, dq: np.ndarray):
        """Gradients plus the input gradient split into (d_obs, d_act)."""
        grads, dx = self.net.backward(cache, dq[:, None])
        return grads, dx[:, self.cfg.obs_dim:]


@dataclass
class UpdateResult:
    critic_loss_1: float
    critic_loss_2: float
    policy_loss: float


class SacAgent:
    """Twin-critic SAC learner with Adam steps and Polyak target updates."""

    def __init__(self, cfg: SacConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.policy = GaussianPolicy(cfg, rng)
        self.q1 = QNetwork(cfg, rng)
        self.q2 = QNetwork(cfg, rng)
        self.q1_target = QNetwork(cfg, rng)
        self.q2_target = QNetwork(cfg, rng)
        self.q1_target.net.copy_from(self.q1.net)
        self.q2_target.net.copy_from(self.q2.net)
        self.policy_opt = Adam(self.policy.net.parameters(), cfg.lr)
        self.q1_opt = Adam(self.q1.net.parameters(), cfg.lr)
        self.q2_opt = Adam(self.q2.net.parameters(), cfg.lr)

    # -- losses and gradients ------------------------------------------------

    def critic_losses_and_grads(self, batch: dict[str, np.ndarray],
                                target_noise: np.ndarray):
        """Soft Bellman residual of both online critics on one minibatch.

        Returns (loss1, loss2, grads1, grads2).  The bootstrap target uses
        the minimum of the two target critics at a fresh policy sample of
        the next state, minus the entropy term; it is constant with respect
        to the online critic parameters.
        """
        cfg = self.cfg
        n = batch["obs"].shape[0]
        next_act, next_logp, _ = self.policy.sample(batch["next_obs"], target_noise)
        tq1, _ = self.q1_target.value(batch["next_obs"], next_act)
        tq2, _ = self.q2_target.value(batch["next_obs"], next_act)
        soft_value = np.minimum(tq1, tq2) - cfg.alpha * next_logp
        target = batch["rew"] + cfg.gamma * (1.0 - batch["done"]) * soft_value

        q1, cache1 = self.q1.value(batch["obs"], batch["act"])
        q2, cache2 = self.q2.value(batch["obs"], batch["act"])
        err1 = q1 - target
        err2 = q2 - target
        loss1 = 0.5 * float(np.mean(err1 * err1))
        loss2 = 0.5 * float(np.mean(err2 * err2))
        grads1, _ = self.q1.backward(cache1, err1 / n)
        grads2, _ = self.q2.backward(cache2, err2 / n)
        return loss1, loss2, grads1, grads2

    def policy_loss_and_grads(self, batch: dict[str, np.ndarray],
                              noise: np.ndarray):
        """Expected alpha*logp - min(Q1, Q2) at reparameterized actions."""
        cfg = self.cfg
        n = batch["obs"].shape[0]
        action, logp, aux = self.policy.sample(batch["obs"], noise)
        q1, cache1 = self.q1.value(batch["obs"], action)
        q2, cache2 = self.q2.value(batch["obs"], action)
        q_min = np.minimum(q1, q2)
        loss = float(np.mean(cfg.alpha * logp - q_min))

        pick1 = (q1 <= q2).astype(float)  # gradient follows the argmin critic
        d_q1 = -pick1 / n
        d_q2 = -(1.0 - pick1) / n
        _, d_act1 = self.q1.backward(cache1, d_q1)
        _, d_act2 = self.q2.backward(cache2, d_q2)
        d_action = d_act1 + d_act2
        d_logp = np.full(n, cfg.alpha / n)
        grads = self.policy.backward_sample(aux, d_action, d_logp)
        return loss, grads

    # -- update steps ----------------------------------------------------------

    def apply_critic_grads(self, grads1, grads2) -> None:
        self.q1.net.set_parameters(self.q1_opt.step(self.q1.net.parameters(), grads1))
        self.q2.net.set_parameters(self.q2_opt.step(self.q2.net.parameters(), grads2))

    def apply_policy_grads(self, grads) -> None:
        self.policy.net.set_parameters(
            self.policy_opt.step(self.policy.net.parameters(), grads))

    def soft_update_targets(self) -> None:
        tau = self.cfg.tau
        for online, target in ((self.q1, self.q1_target), (self.q2, self.q2_target)):
            new = [
                (1.0 - tau) * tp + tau * op
                for tp, op in zip(target.net.parameters(), online.net.parameters())
            ]
            target.net.set_parameters(new)

    def update(self, buffer: ReplayBuffer, rng: np.random.Generator,
               grad_log: list | None = None) -> UpdateResult | None:
        """One minibatch update: both critics, then the policy, then targets.

        Returns None (no-op) while the buffer holds fewer transitions than
        one batch.  grad_log, when given, receives the flat critic and
        policy gradient vectors of this step.
        """
        cfg = self.cfg
        if buffer.size < cfg.batch_size:
            return None
        batch = buffer.sample(cfg.batch_size, rng)
        target_noise = rng.standard_normal((cfg.batch_size, cfg.act_dim))
        loss1, loss2, grads1, grads2 = self.critic_losses_and_grads(batch, target_noise)
        self.apply_critic_grads(grads1, grads2)
        policy_noise = rng.standard_normal((cfg.batch_size, cfg.act_dim))
        policy_loss, pgrads = self.policy_loss_and_grads(batch, policy_noise)
        self.apply_policy_grads(pgrads)
        self.soft_update_targets()
        if grad_log is not None:
            grad_log.append({
                "critic": flatten(grads1 + grads2),
                "policy": flatten(pgrads),
            })
        return UpdateResult(loss1, loss2, policy_loss)

    # -- persistence -------------------------------------------------------------

    def named_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        parts = {
            "policy": self.policy.net, "q1": self.q1.net, "q2": self.q2.net,
            "q1_target": self.q1_target.net, "q2_target": self.q2_target.net,
        }
        for name, net in parts.items():
            for i, p in enumerate(net.parameters()):
                out[f"sac/{name}/p{i}"] = p
        opts = {"policy": self.policy_opt, "q1": self.q1_opt, "q2": self.q2_opt}
        for name, opt in opts.items():
            for i, (m, v) in enumerate(zip(opt.m, opt.v)):
                out[f"sac/adam_{name}/m{i}"] = m
                out[f"sac/adam_{name}/v{i}"] = v
            out[f"sac/adam_{name}/t"] = np.array([float(opt.t)])
        return out

    def load_named_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        parts = {
            "policy": self.policy.net, "q1": self.q1.net, "q2": self.q2.net,
            "q1_target": self.q1_target.net, "q2_target": self.q2_target.net,
        }
        for name, net in parts.items():
            params = [arrays[f"sac/{name}/p{i}"] for i in range(2 * net.num_layers)]
            net.set_parameters([p.copy() for p in params])
        opts = {"policy": self.policy_opt, "q1": self.q1_opt, "q2": self.q2_opt}
        for name, opt in opts.items():
            for i in range(len(opt.m)):
                opt.m[i] = arrays[f"sac/adam_{name}/m{i}"].copy()
                opt.v[i] = arrays[f"sac/adam_{name}/v{i}"].copy()
            opt.t = int(arrays[f"sac/adam_{name}/t"][0])

    def policy_checksum(self) -> str:
        return checksum(self.policy.net.parameters())

    def critic_checksum(self) -> str:
        return checksum(self.q1.net.parameters() + self.q2.net.parameters())
