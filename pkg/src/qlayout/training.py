"""MDP environment, rollout/decoding strategies, and the REINFORCE loop.

Episodes consume logical qubits in ascending index order. No intermediate
reward is given; the terminal reward is the negated SWAP cost of the
finished layout. Training uses a greedy-rollout baseline: at the start of
each epoch the current policy is decoded greedily over a fixed validation
set and the scalar mean reward becomes the baseline for every episode of
that epoch.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import diffcore as dc
from .circuit import ProgramGraph, onehot_features
from .errors import ConfigError
from .objective import CostModel, Layout, fast_cost_fn
from .policy import DecoderConfig, EncoderConfig, PolicyNetwork
from .topology import CouplingGraph

STRATEGY_KINDS = ("greedy", "sampling", "multistart_greedy", "multistart_sampling")


@dataclass
class TrainConfig:
    epochs: int = 50
    batches_per_epoch: int = 20
    batch_size: int = 64
    lr: float = 3e-4
    n_min: int = 6
    n_max: int = 12
    edge_prob: float = 0.3
    seed: int = 0
    cost_mode: str = "adjacent-free"
    val_size: int = 256
    whiten_advantage: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be at least 1")
        if not 0 < self.edge_prob <= 1:
            raise ConfigError("edge_prob must be in (0, 1]")
        if self.n_min < 2 or self.n_max < self.n_min:
            raise ConfigError("need 2 <= n_min <= n_max")


@dataclass
class DecodeStrategy:
    kind: str
    k: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown decoding strategy '{self.kind}'")
        multistart = self.kind.startswith("multistart")
        if multistart and self.k < 1:
            raise ConfigError("multistart strategies need k >= 1")
        if not multistart and self.k != 1:
            raise ConfigError(f"strategy '{self.kind}' requires k=1")

    @classmethod
    def make(cls, kind, k=None, seed=0):
        if k is None:
            k = 10 if kind.startswith("multistart") else 1
        return cls(kind, k=k, seed=seed)


@dataclass
class EpisodeState:
    """Decoder-facing MDP state at one placement step."""

    pg: ProgramGraph
    cg: CouplingGraph
    layout: Layout
    current: int
    mask: np.ndarray

    @property
    def t(self):
        return int((self.layout.assign != -1).sum())

    def is_terminal(self):
        return self.t == self.pg.num_logical


def gen_random_instance(n, edge_prob, rng, n_max=None) -> ProgramGraph:
    """Erdos-Renyi program graph with randomized edge orientation and
    one-hot node features (padded to n_max)."""
    if n < 2:
        raise ConfigError("instances need at least two logical qubits")
    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < edge_prob:
                if rng.random() < 0.5:
                    edges.append((i, j))
                else:
                    edges.append((j, i))
    return ProgramGraph(n, tuple(edges), onehot_features(n, n_max))


@dataclass
class RolloutResult:
    layout: Layout
    log_prob: object  # Tensor during training, float otherwise
    reward: float
    cost: float


def rollout(pg: ProgramGraph, cg: CouplingGraph, policy: PolicyNetwork,
            mode="greedy", rng=None, cost_model=None, train=False,
            emb=None, sample_first=False, order=None) -> RolloutResult:
    """Run one episode placing every logical qubit.

    ``mode`` is "greedy" (argmax, first index on ties) or "sample".
    ``sample_first`` samples only the t=0 action and decodes greedily
    afterwards (used by multistart greedy for diversity).
    """
    n, n_phys = pg.num_logical, cg.num_physical
    if n > n_phys:
        raise ConfigError(f"instance n={n} exceeds device N={n_phys}")
    if cost_model is None:
        cost_model = CostModel.for_graph(cg)
    if order is None:
        order = list(range(n))
    if emb is None:
        emb = policy.encode(pg, train=train)

    mask = np.ones(n_phys, dtype=bool)
    assign = np.full(n, -1, dtype=np.int64)
    log_terms = []
    log_prob_value = 0.0
    for t in range(n):
        ctx = policy.make_context(emb, t, order)
        logits = policy.pointer_logits(ctx, emb.physical)
        probs = policy.masked_distribution(logits, mask)
        p = probs.data
        sample_now = mode == "sample" or (sample_first and t == 0)
        if sample_now:
            action = int(rng.choice(n_phys, p=p / p.sum()))
        else:
            action = int(np.argmax(p))
        if train:
            log_terms.append(dc.log(dc.gather(probs, action)))
        log_prob_value += float(np.log(p[action]))
        assign[order[t]] = action
        mask[action] = False

    layout = Layout(assign)
    cost = fast_cost_fn(pg, cost_model)(assign)
    log_prob = None
    if train:
        log_prob = log_terms[0]
        for term in log_terms[1:]:
            log_prob = log_prob + term
    return RolloutResult(layout, log_prob if train else log_prob_value,
                         -cost, cost)


def _start_rng(seed, start):
    return np.random.default_rng([int(seed), int(start)])


def decode(pg: ProgramGraph, cg: CouplingGraph, policy: PolicyNetwork,
           strategy: DecodeStrategy, cost_model=None):
    """Decode one instance under the given strategy; returns (Layout, cost).

    Multistart runs k rollouts on independent RNG streams derived from the
    strategy seed; the stream of start 0 matches the corresponding
    single-start strategy, so best-of-k can never be worse.
    """
    if cost_model is None:
        cost_model = CostModel.for_graph(cg)
    emb = policy.encode(pg, train=False)
    greedy_family = "greedy" in strategy.kind
    best = None
    for start in range(strategy.k):
        rng = _start_rng(strategy.seed, start)
        if greedy_family:
            res = rollout(pg, cg, policy, mode="greedy", rng=rng,
                          cost_model=cost_model, emb=emb,
                          sample_first=start > 0)
        else:
            res = rollout(pg, cg, policy, mode="sample", rng=rng,
                          cost_model=cost_model, emb=emb)
        if best is None or res.cost < best.cost:
            best = res
    return best.layout, best.cost


@dataclass
class EpochMetrics:
    epoch: int
    mean_reward: float
    baseline: float
    grad_norm: float
    wallclock_s: float

    def as_row(self):
        return [self.epoch, self.mean_reward, self.baseline, self.grad_norm,
                self.wallclock_s]


def _mean_greedy_reward(instances, cg, policy, cost_model):
    total = 0.0
    for pg in instances:
        total += rollout(pg, cg, policy, mode="greedy",
                         cost_model=cost_model).reward
    return total / len(instances)


def train(cfg: TrainConfig, policy: PolicyNetwork, cg: CouplingGraph,
          log_fn=None):
    """REINFORCE with a greedy-rollout baseline; returns per-epoch metrics."""
    cost_model = CostModel(cfg.cost_mode, cg.distances)
    inst_rng = np.random.default_rng([cfg.seed, 0])
    episode_rng = np.random.default_rng([cfg.seed, 1])
    val_rng = np.random.default_rng([cfg.seed, 2])

    validation = [
        gen_random_instance(int(val_rng.integers(cfg.n_min, cfg.n_max + 1)),
                            cfg.edge_prob, val_rng, n_max=policy.prog_feature_dim)
        for _ in range(cfg.val_size)
    ]

    params = policy.store.data()
    state = dc.adam_init(params)
    metrics = []
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        baseline = _mean_greedy_reward(validation, cg, policy, cost_model)
        epoch_rewards = []
        grad_norms = []
        for _ in range(cfg.batches_per_epoch):
            episodes = []
            for _ in range(cfg.batch_size):
                n = int(inst_rng.integers(cfg.n_min, cfg.n_max + 1))
                pg = gen_random_instance(n, cfg.edge_prob, inst_rng,
                                         n_max=policy.prog_feature_dim)
                res = rollout(pg, cg, policy, mode="sample", rng=episode_rng,
                              cost_model=cost_model, train=True)
                episodes.append(res)
                epoch_rewards.append(res.reward)

            advantages = np.array([r.reward - baseline for r in episodes])
            if cfg.whiten_advantage and len(advantages) > 1:
                std = advantages.std()
                advantages = (advantages - advantages.mean()) / (std + 1e-8)

            grad_acc = {k: np.zeros_like(v) for k, v in params.items()}
            for res, adv in zip(episodes, advantages):
                if adv == 0.0:
                    continue
                loss = res.log_prob * (-float(adv))
                policy.store.zero_grad()
                loss.backward()
                for name, g in policy.store.grads().items():
                    grad_acc[name] += g / cfg.batch_size
            dc.adam_step(params, grad_acc, state, lr=cfg.lr)
            grad_norms.append(
                float(np.sqrt(sum(np.sum(g * g) for g in grad_acc.values())))
            )
        row = EpochMetrics(
            epoch=epoch,
            mean_reward=float(np.mean(epoch_rewards)),
            baseline=float(baseline),
            grad_norm=float(np.mean(grad_norms)),
            wallclock_s=time.perf_counter() - t0,
        )
        metrics.append(row)
        if log_fn is not None:
            log_fn(row)
    return metrics


def train_new(cfg: TrainConfig, enc_cfg: EncoderConfig, dec_cfg: DecoderConfig,
              cg: CouplingGraph, shared_encoder=False, log_fn=None):
    policy = PolicyNetwork(cg, enc_cfg, dec_cfg, prog_feature_dim=cfg.n_max,
                           shared_encoder=shared_encoder, seed=cfg.seed)
    metrics = train(cfg, policy, cg, log_fn=log_fn)
    return policy, metrics


def write_metrics_csv(metrics, path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "mean_reward", "baseline", "grad_norm",
                         "wallclock_s"])
        for row in metrics:
            writer.writerow(row.as_row())
