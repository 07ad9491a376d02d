"""Dataset ingestion, end-to-end evaluation, and comparison reporting.

A dataset is a directory of ``.qasm`` files. For every instance, strategy,
and seed the harness decodes a layout, optionally refines it with local
search, and records costs and per-stage wall time. Summaries aggregate
mean/std across seeds, overall and grouped by circuit family (filename
prefix) and by two-qubit-gate-count bucket. Externally produced baseline
costs can be joined from a CSV.
"""

from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import ProgramGraph, build_program_graph, parse_qasm
from .errors import ConfigError, ParseError, QLayoutError
from .objective import CostModel
from .policy import PolicyNetwork
from .postprocess import SearchConfig, local_search
from .topology import CouplingGraph
from .training import DecodeStrategy, decode

log = logging.getLogger(__name__)

GATE_BUCKETS = [(0, 10), (10, 25), (25, 50), (50, 100), (100, None)]


@dataclass
class BenchRun:
    dataset: Path
    device: CouplingGraph
    policy: PolicyNetwork
    strategies: list
    postprocess: bool = True
    cost_mode: str = "adjacent-free"
    seeds: list = field(default_factory=lambda: [0])
    search: SearchConfig = None
    multistart_k: int = 10

    def __post_init__(self):
        if self.policy.cg.topology_hash() != self.device.topology_hash():
            raise ConfigError(
                "checkpoint was trained for a different device topology"
            )


@dataclass
class ReportRow:
    instance: str
    family: str
    n: int
    two_qubit_gates: int
    strategy: str
    seed: int
    rl_cost: float
    pp_cost: float
    wall_ms_rl: float
    wall_ms_pp: float

    FIELDS = ("instance", "family", "n", "two_qubit_gates", "strategy",
              "seed", "rl_cost", "pp_cost", "wall_ms_rl", "wall_ms_pp")

    def as_row(self):
        return [getattr(self, f) for f in self.FIELDS]


def family_from_name(stem):
    return stem.split("_")[0] if "_" in stem else "unknown"


def _gate_bucket(count):
    for lo, hi in GATE_BUCKETS:
        if hi is None or count < hi:
            if count >= lo:
                return f"[{lo},{hi if hi is not None else 'inf'})"
    return "unknown"


def load_dataset(path, policy):
    """Parse every .qasm file; unparseable files are skipped with a warning."""
    instances = []
    skipped = 0
    n_cap = policy.prog_feature_dim if policy.feature_kind == "onehot" else None
    for f in sorted(Path(path).glob("*.qasm")):
        try:
            circ = parse_qasm(f.read_text())
            if policy.feature_kind == "engineered":
                pg = build_program_graph(circ, features="engineered")
            else:
                if circ.num_qubits > n_cap:
                    raise QLayoutError(
                        f"{circ.num_qubits} qubits exceed checkpoint n_max={n_cap}"
                    )
                pg = build_program_graph(circ, n_max=n_cap)
            instances.append((f.stem, pg))
        except QLayoutError as exc:
            log.warning("skipping %s: %s", f.name, exc)
            skipped += 1
    return instances, skipped


def run_bench(cfg: BenchRun):
    """Returns (rows, summary)."""
    cost_model = CostModel(cfg.cost_mode, cfg.device.distances)
    instances, skipped = load_dataset(cfg.dataset, cfg.policy)
    rows = []
    for name, pg in instances:
        family = family_from_name(name)
        for kind in cfg.strategies:
            for seed in cfg.seeds:
                strategy = DecodeStrategy.make(
                    kind, k=cfg.multistart_k if kind.startswith("multistart")
                    else 1, seed=seed)
                t0 = time.perf_counter()
                layout, rl_cost = decode(pg, cfg.device, cfg.policy, strategy,
                                         cost_model)
                wall_rl = (time.perf_counter() - t0) * 1e3
                pp_cost, wall_pp = rl_cost, 0.0
                if cfg.postprocess:
                    search = cfg.search or SearchConfig(
                        cost_mode=cfg.cost_mode, seed=seed)
                    t1 = time.perf_counter()
                    refined = local_search(layout, pg, cfg.device, search)
                    wall_pp = (time.perf_counter() - t1) * 1e3
                    from .objective import fast_cost_fn

                    pp_cost = fast_cost_fn(pg, cost_model)(refined.assign)
                rows.append(ReportRow(
                    instance=name, family=family, n=pg.num_logical,
                    two_qubit_gates=pg.num_edges, strategy=kind, seed=seed,
                    rl_cost=rl_cost, pp_cost=pp_cost,
                    wall_ms_rl=wall_rl, wall_ms_pp=wall_pp,
                ))
    rows.sort(key=lambda r: (r.instance, r.strategy, r.seed))
    return rows, summarize(rows, skipped=skipped)


def _stats(values):
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "std": float(arr.std()),
            "count": len(arr)}


def _group_summary(rows, key_fn):
    groups = {}
    for r in rows:
        groups.setdefault(key_fn(r), []).append(r)
    return {
        k: {
            "rl_cost": _stats([r.rl_cost for r in g]),
            "pp_cost": _stats([r.pp_cost for r in g]),
        }
        for k, g in sorted(groups.items())
    }


def summarize(rows, skipped=0, baseline=None):
    summary = {
        "instances": len({r.instance for r in rows}),
        "skipped": skipped,
        "by_strategy": _group_summary(rows, lambda r: r.strategy),
        "by_family": _group_summary(rows, lambda r: r.family),
        "by_gate_bucket": _group_summary(
            rows, lambda r: _gate_bucket(r.two_qubit_gates)),
    }
    if rows:
        summary["overall"] = {
            "rl_cost": _stats([r.rl_cost for r in rows]),
            "pp_cost": _stats([r.pp_cost for r in rows]),
        }
    if baseline is not None:
        summary["baseline"] = _baseline_summary(rows, baseline)
    return summary


def _baseline_summary(rows, baseline):
    joined = [r for r in rows if r.instance in baseline]
    missing_in_dataset = sorted(
        set(baseline) - {r.instance for r in rows})
    for name in missing_in_dataset:
        log.warning("baseline instance '%s' not in dataset, ignored", name)
    out = {"joined_rows": len(joined),
           "ignored_baseline_instances": missing_in_dataset}
    if joined:
        base_mean = float(np.mean([baseline[r.instance] for r in joined]))
        ours_rl = float(np.mean([r.rl_cost for r in joined]))
        ours_pp = float(np.mean([r.pp_cost for r in joined]))
        out["baseline_mean"] = base_mean
        if base_mean != 0:
            out["improvement_rl"] = (base_mean - ours_rl) / base_mean
            out["improvement_pp"] = (base_mean - ours_pp) / base_mean
    return out


def import_baseline(path):
    """CSV with columns instance,cost -> dict."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {
            "instance", "cost"
        }.issubset(reader.fieldnames):
            raise ParseError(
                f"baseline CSV needs 'instance,cost' columns, "
                f"got {reader.fieldnames}"
            )
        for lineno, record in enumerate(reader, start=2):
            try:
                out[record["instance"]] = float(record["cost"])
            except (TypeError, ValueError) as exc:
                raise ParseError(f"bad cost value: {exc}", line=lineno)
    return out


def write_report(rows, path, baseline=None):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(ReportRow.FIELDS)
        if baseline is not None:
            header.append("baseline_cost")
        writer.writerow(header)
        for r in rows:
            row = r.as_row()
            if baseline is not None:
                row.append(baseline.get(r.instance, ""))
            writer.writerow(row)


def write_summary(summary, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)


# --- synthetic embeddable instances ---------------------------------

def gen_embeddable_instance(cg: CouplingGraph, n, rng, n_max=None
                            ) -> ProgramGraph:
    """Program graph sampled as a random connected n-node subgraph of the
    device, so a zero-cost layout exists by construction (adjacent-free
    mode)."""
    from .circuit import onehot_features

    adj = cg.adjacency_matrix()
    start = int(rng.integers(cg.num_physical))
    chosen = [start]
    chosen_set = {start}
    while len(chosen) < n:
        frontier = sorted(
            {int(v) for u in chosen for v in np.nonzero(adj[u])[0]
             if int(v) not in chosen_set}
        )
        if not frontier:
            raise ConfigError(f"device too small for an {n}-node subgraph")
        pick = int(frontier[rng.integers(len(frontier))])
        chosen.append(pick)
        chosen_set.add(pick)
    relabel = {p: i for i, p in enumerate(chosen)}
    edges = []
    for a, b in cg.edges:
        if a in chosen_set and b in chosen_set:
            i, j = relabel[a], relabel[b]
            edges.append((i, j) if rng.random() < 0.5 else (j, i))
    return ProgramGraph(n, tuple(edges), onehot_features(n, n_max))


def gen_embeddable_dataset(cg, n, count, rng, n_max=None):
    return [gen_embeddable_instance(cg, n, rng, n_max) for _ in range(count)]


# --- context-encoding ablation --------------------------------------

def run_context_ablation(cg, train_cfg, enc_cfg, dec_cfg, test_instances,
                         out_path=None, multistart_k=10, log_fn=None):
    """Train one policy per context encoding and report the mean decoded
    cost under all four strategies as a CSV grid."""
    from dataclasses import replace

    from .training import train_new

    cost_model = CostModel(train_cfg.cost_mode, cg.distances)
    strategies = ["greedy", "sampling", "multistart_greedy",
                  "multistart_sampling"]
    results = []
    for kind in ("project_concat", "concat_project", "stack_project"):
        dcfg = replace(dec_cfg, context_kind=kind)
        if kind == "stack_project":
            dcfg = replace(dcfg, context_dim=enc_cfg.embed_dim)
        policy, _ = train_new(train_cfg, enc_cfg, dcfg, cg, log_fn=log_fn)
        row = {"context_encoding": kind}
        for strat in strategies:
            strategy = DecodeStrategy.make(
                strat, k=multistart_k if strat.startswith("multistart")
                else 1, seed=train_cfg.seed)
            costs = [decode(pg, cg, policy, strategy, cost_model)[1]
                     for pg in test_instances]
            row[strat] = float(np.mean(costs))
        results.append(row)
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["context_encoding"] + strategies)
            writer.writeheader()
            writer.writerows(results)
    return results
