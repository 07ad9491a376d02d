

import numpy as np
import pytest

from qlayout.circuit import ProgramGraph, onehot_features
from qlayout.errors import ConfigError
from qlayout.objective import CostModel
from qlayout.topology import CouplingGraph, build_grid
from qlayout.training import (
    DecodeStrategy,
    TrainConfig,
    _start_rng,
    decode,
    gen_random_instance,
    rollout,
    train,
)

from conftest import tiny_policy


def path3():
    return CouplingGraph(3, frozenset({(0, 1), (1, 2)}), name="path3")


class TestInstanceGeneration:
    def test_edge_prob_one(self, rng):
        pg = gen_random_instance(3, 1.0, rng)
        assert pg.num_edges == 3

    def test_small_n_rejected(self, rng):
        with pytest.raises(ConfigError):
            gen_random_instance(1, 0.5, rng)

    def test_edge_count_statistics(self, rng):
        # n=8, p=0.3: mean edges = 0.3 * 28 = 8.4, sd = sqrt(28*0.3*0.7)
        samples = 2000
        counts = [gen_random_instance(8, 0.3, rng).num_edges
                  for _ in range(samples)]
        mean = np.mean(counts)
        sigma = np.sqrt(28 * 0.3 * 0.7 / samples)
        assert abs(mean - 8.4) < 3 * sigma * 1.5

    def test_padded_features(self, rng):
        pg = gen_random_instance(3, 0.5, rng, n_max=6)
        assert pg.node_features.shape == (3, 6)


class TestRollout:
    def test_single_qubit_instance_reward_zero(self):
        pg = ProgramGraph(1, (), onehot_features(1, 4))
        pol = tiny_policy()
        res = rollout(pg, pol.cg, pol)
        assert res.reward == 0.0
        assert res.layout.is_total()

    def test_greedy_deterministic(self, rng):
        pol = tiny_policy()
        pg = gen_random_instance(3, 0.5, rng, n_max=4)
        a = rollout(pg, pol.cg, pol, mode="greedy")
        b = rollout(pg, pol.cg, pol, mode="greedy")
        assert a.layout.assign.tolist() == b.layout.assign.tolist()
        assert a.reward == b.reward

    def test_sampled_layouts_always_valid(self, rng):
        pol = tiny_policy(cg=build_grid(2, 3), n_max=5)
        for _ in range(300):
            n = int(rng.integers(2, 6))
            pg = gen_random_instance(n, 0.4, rng, n_max=5)
            res = rollout(pg, pol.cg, pol, mode="sample", rng=rng)
            res.layout.validate(6)

    def test_reward_matches_objective(self, rng):
        from qlayout.objective import swap_cost

        pol = tiny_policy()
        pg = gen_random_instance(3, 0.8, rng, n_max=4)
        cm = CostModel("literal", pol.cg.distances)
        res = rollout(pg, pol.cg, pol, cost_model=cm)
        assert res.reward == -swap_cost(res.layout, pg, cm)

    def test_instance_too_large(self, rng):
        pol = tiny_policy()
        pg = gen_random_instance(5, 0.5, rng, n_max=5)
        with pytest.raises(ConfigError):
            rollout(pg, pol.cg, pol)


class TestDecode:
    def test_strategy_validation(self):
        with pytest.raises(ConfigError):
            DecodeStrategy("greedy", k=3)
        with pytest.raises(ConfigError):
            DecodeStrategy("nope")
        assert DecodeStrategy.make("multistart_greedy").k == 10

    def test_multistart_k1_degenerates(self, rng):
        pol = tiny_policy()
        pg = gen_random_instance(3, 0.6, rng, n_max=4)
        single = decode(pg, pol.cg, pol, DecodeStrategy("greedy", seed=5))
        multi = decode(pg, pol.cg, pol,
                       DecodeStrategy("multistart_greedy", k=1, seed=5))
        assert single[1] == multi[1]
        assert single[0].assign.tolist() == multi[0].assign.tolist()

    @pytest.mark.parametrize("pair", [
        ("greedy", "multistart_greedy"), ("sampling", "multistart_sampling"),
    ])
    def test_best_of_k_never_worse(self, pair, rng):
        single_kind, multi_kind = pair
        pol = tiny_policy(cg=build_grid(2, 3), n_max=5)
        for seed in range(10):
            pg = gen_random_instance(4, 0.5, rng, n_max=5)
            _, c1 = decode(pg, pol.cg, pol,
                           DecodeStrategy.make(single_kind, seed=seed))
            _, ck = decode(pg, pol.cg, pol,
                           DecodeStrategy.make(multi_kind, k=10, seed=seed))
            assert ck <= c1

    def test_multistart_sampling_returns_min_of_individuals(self, rng):
        pol = tiny_policy(cg=build_grid(2, 3), n_max=5)
        pg = gen_random_instance(4, 0.6, rng, n_max=5)
        strategy = DecodeStrategy.make("multistart_sampling", k=10, seed=42)
        _, best = decode(pg, pol.cg, pol, strategy)
        cm = CostModel.for_graph(pol.cg)
        individual = []
        emb = pol.encode(pg)
        for start in range(10):
            res = rollout(pg, pol.cg, pol, mode="sample",
                          rng=_start_rng(42, start), cost_model=cm, emb=emb)
            individual.append(res.cost)
        assert best == min(individual)


class TestTrain:
    def small_cfg(self, **kw):
        base = dict(epochs=2, batches_per_epoch=2, batch_size=4, n_min=2,
                    n_max=3, edge_prob=0.6, seed=3, val_size=4)
        base.update(kw)
        return TrainConfig(**base)

    def test_metrics_shape_and_determinism(self):
        cg = build_grid(2, 2)
        cfg = self.small_cfg()
        runs = []
        for _ in range(2):
            pol = tiny_policy(cg=cg, n_max=cfg.n_max, seed=9)
            metrics = train(cfg, pol, cg)
            runs.append([(m.epoch, m.mean_reward, m.baseline, m.grad_norm)
                        for m in metrics])
        assert runs[0] == runs[1]
        assert len(runs[0]) == cfg.epochs

    def test_advantage_scales_gradient_linearly(self, rng):
        import qlayout.diffcore as dc

        pol = tiny_policy()
        pg = gen_random_instance(3, 0.6, rng, n_max=4)
        grads = []
        for adv in (1.0, 2.0):
            res = rollout(pg, pol.cg, pol, mode="greedy", train=True)
            pol.store.zero_grad()
            (res.log_prob * (-adv)).backward()
            grads.append({k: g.copy() for k, g in pol.store.grads().items()})
        for k in grads[0]:
            assert np.allclose(2 * grads[0][k], grads[1][k])

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            TrainConfig(batch_size=0)
        with pytest.raises(ConfigError):
            TrainConfig(edge_prob=0.0)
        with pytest.raises(ConfigError):
            TrainConfig(n_min=5, n_max=3)

    def test_whiten_flag_runs(self):
        cg = build_grid(2, 2)
        cfg = self.small_cfg(whiten_advantage=True, epochs=1)
        pol = tiny_policy(cg=cg, n_max=cfg.n_max)
        metrics = train(cfg, pol, cg)
        assert len(metrics) == 1
        assert np.isfinite(metrics[0].grad_norm)


class TestReinforceEstimator:
    def test_gradient_estimator_unbiased(self):
        # enumerable 2-step MDP: n=2 on a path of three physical qubits.
        # The empirical mean of the REINFORCE estimator over many sampled
        # trajectories must match the finite-difference gradient of the
        # exact expected reward (enumerated over all 6 trajectories).
        cg = path3()
        pol = tiny_policy(cg=cg, n_max=2, norm="graph", seed=4)
        pg = ProgramGraph(2, ((0, 1),), onehot_features(2))
        cm = CostModel("literal", cg.distances)
        num_samples = 20000

        traj = [(a0, a1) for a0 in range(3) for a1 in range(3) if a0 != a1]

        def episode(actions, record=False):
            import qlayout.diffcore as dc

            emb = pol.encode(pg, train=record)
            mask = np.ones(3, bool)
            logp_t = None
            logp = 0.0
            for t, a in enumerate(actions):
                ctx = pol.make_context(emb, t, [0, 1])
                logits = pol.pointer_logits(ctx, emb.physical)
                probs = pol.masked_distribution(logits, mask)
                if record:
                    term = dc.log(dc.gather(probs, a))
                    logp_t = term if logp_t is None else logp_t + term
                logp += float(np.log(probs.data[a]))
                mask[a] = False
            reward = -float(
                2 * cm.distance[actions[0], actions[1]])
            return logp, logp_t, reward

        def expected_reward():
            return sum(np.exp(episode(t)[0]) * episode(t)[2] for t in traj)

        # exact gradient by finite differences on a few parameters
        probs = np.array([np.exp(episode(t)[0]) for t in traj])
        rng = np.random.default_rng(0)
        counts = rng.multinomial(num_samples, probs / probs.sum())

        est = {k: np.zeros_like(v.data) for k, v in pol.store.params.items()}
        for t_actions, cnt in zip(traj, counts):
            if cnt == 0:
                continue
            _, logp_t, reward = episode(t_actions, record=True)
            pol.store.zero_grad()
            logp_t.backward()
            for k, g in pol.store.grads().items():
                est[k] += (cnt / num_samples) * reward * g

        checked = 0
        for name in ("ptr.W_G", "ctx.W"):
            t = pol.store.params[name]
            flat = t.data.ravel()
            for i in rng.choice(flat.size, size=5, replace=False):
                old = flat[i]
                flat[i] = old + 1e-5
                fp = expected_reward()
                flat[i] = old - 1e-5
                fm = expected_reward()
                flat[i] = old
                exact = (fp - fm) / 2e-5
                approx = est[name].ravel()[i]
                if abs(exact) > 1e-3:
                    assert abs(approx - exact) / abs(exact) < 0.25
                    checked += 1
        assert checked >= 3
