"""OpenQASM 2.0 parsing, program graphs, and per-qubit node features.

The parser covers the restricted subset the layout stage needs: register
declarations, the standard single-qubit gates, cx/cz/swap, and
barrier/measure (which are ignored for graph building). Gate parameters
are parsed and discarded.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyCircuitError, ParseError, UnsupportedGateError

SINGLE_QUBIT_GATES = frozenset(
    "id x y z h s sdg t tdg sx sxdg rx ry rz p u u1 u2 u3".split()
)
TWO_QUBIT_GATES = frozenset(["cx", "cz", "swap"])
_IGNORED = frozenset(["barrier", "measure"])

_STMT_RE = re.compile(r"^(\w+)\s*(?:\(([^)]*)\))?\s*(.*)$", re.S)
_OPERAND_RE = re.compile(r"^(\w+)\s*(?:\[\s*(\d+)\s*\])?$")


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple

    @property
    def is_two_qubit(self):
        return len(self.qubits) == 2

    @property
    def control(self):
        return self.qubits[0] if self.is_two_qubit else None

    @property
    def target(self):
        return self.qubits[-1]


@dataclass(frozen=True)
class Circuit:
    num_qubits: int
    gates: tuple


def _statements(source):
    """Yield (statement_text, line_number) pairs, comments stripped."""
    buf = []
    start_line = None
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("//", 1)[0]
        for ch in line:
            if ch == ";":
                stmt = "".join(buf).strip()
                if stmt:
                    yield stmt, start_line if start_line is not None else lineno
                buf = []
                start_line = None
            else:
                if ch.strip() and start_line is None:
                    start_line = lineno
                buf.append(ch)
        buf.append(" ")
    tail = "".join(buf).strip()
    if tail:
        raise ParseError(f"unterminated statement '{tail[:40]}'", line=start_line)


def parse_qasm(source: str) -> Circuit:
    qregs = {}  # name -> (offset, size)
    cregs = set()
    num_qubits = 0
    gates = []

    def resolve(operand, line):
        m = _OPERAND_RE.match(operand.strip())
        if not m:
            raise ParseError(f"cannot parse operand '{operand}'", line=line)
        name, idx = m.group(1), m.group(2)
        if name in cregs:
            return None
        if name not in qregs:
            raise ParseError(f"unknown register '{name}'", line=line)
        offset, size = qregs[name]
        if idx is None:
            return [offset + k for k in range(size)]
        idx = int(idx)
        if idx >= size:
            raise ParseError(
                f"index {idx} out of range for register '{name}[{size}]'", line=line
            )
        return [offset + idx]

    for stmt, line in _statements(source):
        m = _STMT_RE.match(stmt)
        if not m:
            raise ParseError(f"cannot parse statement '{stmt[:40]}'", line=line)
        head, _params, rest = m.group(1), m.group(2), m.group(3).strip()

        if head == "OPENQASM" or head == "include":
            continue
        if head in ("qreg", "creg"):
            dm = re.match(r"^(\w+)\s*\[\s*(\d+)\s*\]$", rest)
            if not dm:
                raise ParseError(f"malformed {head} declaration '{rest}'", line=line)
            name, size = dm.group(1), int(dm.group(2))
            if head == "qreg":
                if name in qregs:
                    raise ParseError(f"duplicate qreg '{name}'", line=line)
                qregs[name] = (num_qubits, size)
                num_qubits += size
            else:
                cregs.add(name)
            continue
        if head in _IGNORED:
            continue
        if head == "gate" or head == "opaque":
            raise ParseError("gate definitions are not supported", line=line)

        if head not in SINGLE_QUBIT_GATES and head not in TWO_QUBIT_GATES:
            raise UnsupportedGateError(head, line=line)

        operands = [resolve(op, line) for op in rest.split(",")] if rest else []
        operands = [op for op in operands if op is not None]
        if head in SINGLE_QUBIT_GATES:
            if len(operands) != 1:
                raise ParseError(
                    f"gate '{head}' expects one operand, got {len(operands)}",
                    line=line,
                )
            for q in operands[0]:
                gates.append(Gate(head, (q,)))
        else:
            if len(operands) != 2:
                raise ParseError(
                    f"gate '{head}' expects two operands, got {len(operands)}",
                    line=line,
                )
            if len(operands[0]) != 1 or len(operands[1]) != 1:
                raise ParseError(
                    f"two-qubit gate '{head}' requires indexed operands", line=line
                )
            a, b = operands[0][0], operands[1][0]
            if a == b:
                raise ParseError(
                    f"two-qubit gate '{head}' needs distinct qubits", line=line
                )
            gates.append(Gate(head, (a, b)))

    return Circuit(num_qubits, tuple(gates))


@dataclass(frozen=True)
class ProgramGraph:
    """Directed multigraph of logical-qubit interactions with node features.

    ``edges`` keeps one entry per two-qubit gate occurrence; multiplicity is
    implicit in the repetition.
    """

    num_logical: int
    edges: tuple
    node_features: np.ndarray = field(compare=False)

    def __post_init__(self):
        feats = np.asarray(self.node_features, dtype=np.float64)
        if feats.shape[0] != self.num_logical:
            raise ValueError(
                f"need one feature row per node, got {feats.shape[0]} rows for "
                f"{self.num_logical} nodes"
            )
        object.__setattr__(self, "node_features", feats)
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))

    @property
    def num_edges(self):
        return len(self.edges)

    def multiplicities(self):
        return Counter(self.edges)

    def edge_arrays(self):
        if not self.edges:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        arr = np.asarray(self.edges, dtype=np.int64)
        return arr[:, 0], arr[:, 1]

    def undirected_adjacency(self):
        a = np.zeros((self.num_logical, self.num_logical), dtype=bool)
        for i, j in self.edges:
            a[i, j] = a[j, i] = True
        return a


def onehot_features(n, n_max=None):
    n_max = n if n_max is None else n_max
    if n_max < n:
        raise ValueError(f"n_max={n_max} smaller than n={n}")
    feats = np.zeros((n, n_max), dtype=np.float64)
    feats[np.arange(n), np.arange(n)] = 1.0
    return feats


def build_program_graph(c: Circuit, features="onehot", n_max=None, walk_radius=4):
    """One directed edge (control -> target) per two-qubit gate occurrence."""
    edges = tuple(g.qubits for g in c.gates if g.is_two_qubit)
    if features == "onehot":
        feats = onehot_features(c.num_qubits, n_max)
    elif features == "engineered":
        feats = feature_matrix(extract_features(c, walk_radius))
    else:
        raise ValueError(f"unknown feature kind '{features}'")
    return ProgramGraph(c.num_qubits, edges, feats)


@dataclass(frozen=True)
class FeatureVector:
    mu_s: float
    mu_c: float
    mu_t: float
    influence: float
    pagerank: float
    causal_cone: float

    def as_array(self):
        return np.array(
            [self.mu_s, self.mu_c, self.mu_t, self.influence, self.pagerank,
             self.causal_cone]
        )


def feature_matrix(features):
    return np.stack([f.as_array() for f in features])


def _pagerank(adj_counts, damping=0.85, tol=1e-9, max_iter=200):
    """Power iteration on the row-normalized adjacency; dangling rows
    redistribute uniformly."""
    n = adj_counts.shape[0]
    out_deg = adj_counts.sum(axis=1)
    dangling = out_deg == 0
    trans = np.zeros_like(adj_counts, dtype=np.float64)
    nz = ~dangling
    trans[nz] = adj_counts[nz] / out_deg[nz, None]
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        nxt = (1 - damping) / n + damping * (
            trans.T @ x + x[dangling].sum() / n
        )
        if np.abs(nxt - x).sum() < tol:
            x = nxt
            break
        x = nxt
    return x


def extract_features(c: Circuit, walk_radius: int = 4):
    """Engineered structural node features for every qubit."""
    n = c.num_qubits
    if n < 1:
        raise EmptyCircuitError("circuit has no qubits")
    eta = len(c.gates)
    if eta == 0:
        raise EmptyCircuitError("circuit has no gates")

    singles = np.zeros(n)
    controls = np.zeros(n)
    targets = np.zeros(n)
    adj_counts = np.zeros((n, n))
    two_qubit_gates = []
    for g in c.gates:
        if g.is_two_qubit:
            controls[g.control] += 1
            targets[g.target] += 1
            adj_counts[g.control, g.target] += 1
            two_qubit_gates.append(g.qubits)
        else:
            singles[g.qubits[0]] += 1

    pr = _pagerank(adj_counts)

    # undirected interaction adjacency for the bounded-radius reachability score
    und = adj_counts + adj_counts.T > 0

    def influence(j):
        if n == 1:
            return 0.0
        reached = {j}
        frontier = {j}
        for _ in range(walk_radius):
            nxt = set()
            for u in frontier:
                for v in np.nonzero(und[u])[0]:
                    if v not in reached:
                        reached.add(int(v))
                        nxt.add(int(v))
            if not nxt:
                break
            frontier = nxt
        return (len(reached) - 1) / (n - 1)

    def causal_cone(j):
        cone = {j}
        for a, b in two_qubit_gates:
            if a in cone or b in cone:
                cone.add(a)
                cone.add(b)
        return len(cone) / n

    return [
        FeatureVector(
            mu_s=singles[j] / eta,
            mu_c=controls[j] / eta,
            mu_t=targets[j] / eta,
            influence=influence(j),
            pagerank=float(pr[j]),
            causal_cone=causal_cone(j),
        )
        for j in range(n)
    ]
