import math

import numpy as np
import pytest
from scipy.stats import norm

from gaitevo.nets import Adam, Mlp
from gaitevo.sac import (
    GaussianPolicy,
    ReplayBuffer,
    SacAgent,
    SacConfig,
)


def tiny_cfg(**kw):
    defaults = dict(obs_dim=3, act_dim=2, hidden=(4,), act_scale=0.2,
                    lr=1e-3, alpha=0.2, gamma=0.99, tau=0.005, batch_size=4)
    defaults.update(kw)
    return SacConfig(**defaults)


def random_batch(cfg, rng, n=4):
    return {
        "obs": rng.normal(size=(n, cfg.obs_dim)),
        "act": rng.uniform(-cfg.act_scale, cfg.act_scale, size=(n, cfg.act_dim)),
        "rew": rng.normal(size=n),
        "next_obs": rng.normal(size=(n, cfg.obs_dim)),
        "done": (rng.random(n) < 0.3).astype(float),
    }


def perturb_param(net, i, j, eps):
    params = net.parameters()
    flat = params[i].ravel()
    flat[j] += eps


# -- Mlp -----------------------------------------------------------------------


def test_mlp_backward_matches_fd():
    rng = np.random.default_rng(0)
    net = Mlp((3, 5, 2), rng)
    x = rng.normal(size=(4, 3))
    w = rng.normal(size=(4, 2))  # project output to a scalar loss
    y, cache = net.forward(x)
    loss0 = float(np.sum(w * y))
    grads, dx = net.backward(cache, w)
    eps = 1e-6
    for i, p in enumerate(net.parameters()):
        flat = p.ravel()
        gflat = grads[i].ravel()
        for j in range(p.size):
            flat[j] += eps
            lp = float(np.sum(w * net.forward(x)[0]))
            flat[j] -= 2 * eps
            lm = float(np.sum(w * net.forward(x)[0]))
            flat[j] += eps
            num = (lp - lm) / (2 * eps)
            assert abs(gflat[j] - num) < 1e-4 * max(1.0, abs(num))
    # input gradient too
    for b in range(4):
        for j in range(3):
            xp = x.copy(); xp[b, j] += eps
            xm = x.copy(); xm[b, j] -= eps
            num = (float(np.sum(w * net.forward(xp)[0]))
                   - float(np.sum(w * net.forward(xm)[0]))) / (2 * eps)
            assert abs(dx[b, j] - num) < 1e-4 * max(1.0, abs(num))


def test_adam_zero_lr_is_identity():
    rng = np.random.default_rng(1)
    net = Mlp((2, 3, 1), rng)
    opt = Adam(net.parameters(), lr=0.0)
    before = [p.copy() for p in net.parameters()]
    grads = [rng.normal(size=p.shape) for p in net.parameters()]
    after = opt.step(net.parameters(), grads)
    for b, a in zip(before, after):
        assert np.array_equal(b, a)


# -- replay buffer ---------------------------------------------------------------


def test_buffer_size_and_overwrite():
    buf = ReplayBuffer(5, 2, 1)
    for k in range(8):
        buf.push(np.full(2, k), np.full(1, k), float(k), np.full(2, k + 0.5), False)
    assert buf.size == 5
    assert buf.total_pushed == 8
    stored = set(buf.rew[:buf.size])
    assert stored == {3.0, 4.0, 5.0, 6.0, 7.0}  # oldest overwritten


def test_buffer_sample_only_stored():
    buf = ReplayBuffer(100, 1, 1)
    for k in range(10):
        buf.push([k], [k], k, [k], False)
    rng = np.random.default_rng(0)
    batch = buf.sample(6, rng)
    assert set(batch["rew"]).issubset(set(range(10)))
    idx = buf.sample_indices(6, rng)
    assert len(set(idx.tolist())) == 6  # no replacement


def test_buffer_sample_too_large():
    buf = ReplayBuffer(10, 1, 1)
    buf.push([0], [0], 0, [0], False)
    with pytest.raises(ValueError):
        buf.sample(2, np.random.default_rng(0))


# -- policy density ---------------------------------------------------------------


def test_policy_density_normalizes():
    cfg = tiny_cfg(obs_dim=2, act_dim=1, hidden=(6,), act_scale=0.3)
    policy = GaussianPolicy(cfg, np.random.default_rng(3))
    obs = np.array([0.4, -0.2])
    s = cfg.act_scale
    grid = np.linspace(-s + 1e-9, s - 1e-9, 10_001)
    dens = np.exp(policy.log_prob(np.tile(obs, (grid.size, 1)), grid[:, None]))
    integral = np.trapezoid(dens, grid)
    assert abs(integral - 1.0) < 0.01


def test_policy_density_matches_cdf_derivative():
    cfg = tiny_cfg(obs_dim=2, act_dim=1, hidden=(6,), act_scale=0.3)
    policy = GaussianPolicy(cfg, np.random.default_rng(5))
    obs = np.array([0.1, 0.9])
    raw, _ = policy.net.forward(obs[None, :])
    mean = raw[0, 0]
    std = math.exp(np.clip(raw[0, 1], -20.0, 2.0))
    s = cfg.act_scale

    def cdf(a):
        return norm.cdf((np.arctanh(a / s) - mean) / std)

    rng = np.random.default_rng(7)
    pts = rng.uniform(-0.8 * s, 0.8 * s, 100)
    eps = 1e-7
    for a in pts:
        num = (cdf(a + eps) - cdf(a - eps)) / (2 * eps)
        got = math.exp(policy.log_prob(obs[None, :], np.array([[a]]))[0])
        assert abs(got - num) < 1e-4 * max(num, 1e-12)


def test_policy_degenerate_std_is_deterministic():
    cfg = tiny_cfg(obs_dim=2, act_dim=2, hidden=(4,))
    policy = GaussianPolicy(cfg, np.random.default_rng(11))
    # drive the log-std head far below the clamp floor
    policy.net.biases[-1][cfg.act_dim:] = -60.0
    policy.net.weights[-1][:, cfg.act_dim:] = 0.0
    obs = np.array([[0.3, -0.5]])
    a1, _, _ = policy.sample(obs, np.full((1, 2), 3.0))
    a2, _, _ = policy.sample(obs, np.full((1, 2), -3.0))
    want = policy.act_mean(obs[0])
    assert np.max(np.abs(a1[0] - want)) < 1e-6
    assert np.max(np.abs(a2[0] - want)) < 1e-6


def test_logp_bounded_by_unsquashed_gaussian():
    cfg = tiny_cfg(obs_dim=2, act_dim=2, hidden=(4,))
    policy = GaussianPolicy(cfg, np.random.default_rng(13))
    rng = np.random.default_rng(17)
    obs = rng.normal(size=(50, 2))
    noise = rng.standard_normal((50, 2))
    action, logp, aux = policy.sample(obs, noise)
    # density of the unsquashed gaussian at its own mode, plus the
    # magnitude of the squash-and-scale jacobian correction
    log_std = aux["log_std"]
    gauss_peak = np.sum(-0.5 * math.log(2 * math.pi) - log_std, axis=1)
    jac = np.sum(np.abs(math.log(cfg.act_scale)
                        + np.log1p(-(aux["squashed"] ** 2))), axis=1)
    assert np.all(logp <= gauss_peak + jac + 1e-9)


# -- gradient checks ----------------------------------------------------------------


def test_critic_gradients_match_fd():
    cfg = tiny_cfg()
    rng = np.random.default_rng(19)
    agent = SacAgent(cfg, rng)
    batch = random_batch(cfg, rng)
    noise = rng.standard_normal((4, cfg.act_dim))
    l1, l2, g1, g2 = agent.critic_losses_and_grads(batch, noise)

    def total_loss():
        a, b, _, _ = agent.critic_losses_and_grads(batch, noise)
        return a + b

    eps = 1e-5
    for net, grads in ((agent.q1.net, g1), (agent.q2.net, g2)):
        for i, p in enumerate(net.parameters()):
            flat = p.ravel()
            gflat = grads[i].ravel()
            for j in range(p.size):
                flat[j] += eps
                lp = total_loss()
                flat[j] -= 2 * eps
                lm = total_loss()
                flat[j] += eps
                num = (lp - lm) / (2 * eps)
                assert abs(gflat[j] - num) < 1e-4 * max(1.0, abs(num))


def test_policy_gradients_match_fd():
    cfg = tiny_cfg()
    rng = np.random.default_rng(23)
    agent = SacAgent(cfg, rng)
    batch = random_batch(cfg, rng)
    noise = rng.standard_normal((4, cfg.act_dim))
    loss, grads = agent.policy_loss_and_grads(batch, noise)

    eps = 1e-5
    net = agent.policy.net
    for i, p in enumerate(net.parameters()):
        flat = p.ravel()
        gflat = grads[i].ravel()
        for j in range(p.size):
            flat[j] += eps
            lp, _ = agent.policy_loss_and_grads(batch, noise)
            flat[j] -= 2 * eps
            lm, _ = agent.policy_loss_and_grads(batch, noise)
            flat[j] += eps
            num = (lp - lm) / (2 * eps)
            assert abs(gflat[j] - num) < 1e-4 * max(1.0, abs(num))


def test_critic_loss_collapses_without_bootstrap():
    cfg = tiny_cfg(gamma=0.99, alpha=0.2)
    rng = np.random.default_rng(29)
    agent = SacAgent(cfg, rng)
    batch = random_batch(cfg, rng, n=6)
    batch["done"] = np.ones(6)  # kills the bootstrap term: target = r exactly
    noise = rng.standard_normal((6, cfg.act_dim))
    l1, l2, _, _ = agent.critic_losses_and_grads(batch, noise)
    q1, _ = agent.q1.value(batch["obs"], batch["act"])
    q2, _ = agent.q2.value(batch["obs"], batch["act"])
    want1 = 0.5 * np.mean((q1 - batch["rew"]) ** 2)
    want2 = 0.5 * np.mean((q2 - batch["rew"]) ** 2)
    assert abs(l1 - want1) < 1e-12 and abs(l2 - want2) < 1e-12


def test_zero_residual_gives_zero_loss():
    cfg = tiny_cfg(gamma=0.0)
    rng = np.random.default_rng(31)
    agent = SacAgent(cfg, rng)
    batch = random_batch(cfg, rng)
    q1, _ = agent.q1.value(batch["obs"], batch["act"])
    q2, _ = agent.q2.value(batch["obs"], batch["act"])
    # choose rewards that already satisfy the collapsed target r = Q
    noise = rng.standard_normal((4, cfg.act_dim))
    batch["rew"] = q1.copy()
    l1, _, g1, _ = agent.critic_losses_and_grads(batch, noise)
    assert l1 == 0.0
    assert all(np.all(g == 0.0) for g in g1)


def test_twin_symmetry_of_bootstrap():
    cfg = tiny_cfg()
    rng = np.random.default_rng(37)
    agent = SacAgent(cfg, rng)
    batch = random_batch(cfg, rng)
    noise = rng.standard_normal((4, cfg.act_dim))
    l1, l2, _, _ = agent.critic_losses_and_grads(batch, noise)
    # swap the target networks: the min is symmetric, losses unchanged
    agent.q1_target, agent.q2_target = agent.q2_target, agent.q1_target
    l1s, l2s, _, _ = agent.critic_losses_and_grads(batch, noise)
    assert l1 == l1s and l2 == l2s


class BowlCritic:
    """Analytic stand-in critic: Q(s, a) = -sum((a - c)^2)."""

    def __init__(self, center):
        self.center = center

    def value(self, obs, act):
        d = act - self.center
        return -np.sum(d * d, axis=1), act

    def backward(self, cache, dq):
        act = cache
        return [], dq[:, None] * (-2.0 * (act - self.center))


def test_policy_mean_climbs_quadratic_bowl():
    cfg = tiny_cfg(obs_dim=1, act_dim=1, hidden=(8,), alpha=0.0, lr=3e-3)
    rng = np.random.default_rng(41)
    agent = SacAgent(cfg, rng)
    center = 0.1
    agent.q1 = BowlCritic(center)
    agent.q2 = BowlCritic(center)
    obs = np.zeros((16, 1))
    batch = {"obs": obs}
    for _ in range(400):
        noise = rng.standard_normal((16, 1))
        _, grads = agent.policy_loss_and_grads(batch, noise)
        agent.apply_policy_grads(grads)
    mean_action = agent.policy.act_mean(np.zeros(1))[0]
    assert abs(mean_action - center) < 0.02


def test_entropy_only_objective_raises_log_std():
    cfg = tiny_cfg(obs_dim=1, act_dim=1, hidden=(4,), alpha=0.2, lr=1e-2)
    rng = np.random.default_rng(43)
    agent = SacAgent(cfg, rng)

    class ZeroCritic:
        def value(self, obs, act):
            return np.zeros(obs.shape[0]), act

        def backward(self, cache, dq):
            return [], np.zeros_like(cache)

    agent.q1 = ZeroCritic()
    agent.q2 = ZeroCritic()
    # start well below the entropy optimum of the squashed distribution
    agent.policy.net.biases[-1][1] = -2.0
    agent.policy.net.weights[-1][:, 1] = 0.0
    obs = np.zeros((8, 1))

    def mean_log_std():
        raw, _ = agent.policy.net.forward(obs)
        return float(np.mean(raw[:, 1]))

    before = mean_log_std()
    for _ in range(200):
        noise = rng.standard_normal((8, 1))
        loss, grads = agent.policy_loss_and_grads({"obs": obs}, noise)
        agent.apply_policy_grads(grads)
    assert mean_log_std() > before


# -- update mechanics -----------------------------------------------------------------


def fill_buffer(cfg, rng, n=64):
    buf = ReplayBuffer(256, cfg.obs_dim, cfg.act_dim)
    for _ in range(n):
        buf.push(rng.normal(size=cfg.obs_dim),
                 rng.uniform(-cfg.act_scale, cfg.act_scale, cfg.act_dim),
                 rng.normal(), rng.normal(size=cfg.obs_dim), rng.random() < 0.1)
    return buf


def test_update_noop_when_buffer_small():
    cfg = tiny_cfg(batch_size=64)
    rng = np.random.default_rng(47)
    agent = SacAgent(cfg, rng)
    buf = fill_buffer(cfg, rng, n=10)
    assert agent.update(buf, rng) is None


def test_update_zero_lr_keeps_params():
    cfg = tiny_cfg(lr=0.0, batch_size=8)
    rng = np.random.default_rng(53)
    agent = SacAgent(cfg, rng)
    buf = fill_buffer(cfg, rng, n=32)
    before_p = [p.copy() for p in agent.policy.net.parameters()]
    before_q = [p.copy() for p in agent.q1.net.parameters()]
    res = agent.update(buf, rng)
    assert res is not None
    for b, a in zip(before_p, agent.policy.net.parameters()):
        assert np.array_equal(b, a)
    for b, a in zip(before_q, agent.q1.net.parameters()):
        assert np.array_equal(b, a)


def test_update_tau_one_copies_targets():
    cfg = tiny_cfg(tau=1.0, batch_size=8)
    rng = np.random.default_rng(59)
    agent = SacAgent(cfg, rng)
    buf = fill_buffer(cfg, rng, n=32)
    agent.update(buf, rng)
    for tp, op in zip(agent.q1_target.net.parameters(), agent.q1.net.parameters()):
        assert np.array_equal(tp, op)
    for tp, op in zip(agent.q2_target.net.parameters(), agent.q2.net.parameters()):
        assert np.array_equal(tp, op)


def test_named_arrays_round_trip():
    cfg = tiny_cfg()
    rng = np.random.default_rng(61)
    agent = SacAgent(cfg, rng)
    buf = fill_buffer(cfg, rng, n=32)
    agent.update(buf, rng)
    arrays = agent.named_arrays()
    other = SacAgent(cfg, np.random.default_rng(999))
    other.load_named_arrays(arrays)
    assert other.policy_checksum() == agent.policy_checksum()
    assert other.critic_checksum() == agent.critic_checksum()
    assert other.policy_opt.t == agent.policy_opt.t
