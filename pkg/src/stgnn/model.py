"""Two-layer significance-weighted aggregation network.

Each layer maps a node's previous-layer state together with the states
of its top-m significant neighbors, the latter combined under softmax
weights derived from the neighbors' significance scores and a learnable
per-rank correction vector.  Layer one starts from frozen random node
features and applies ReLU; the output layer is linear so pair cosines
can span [-1, 1].

Everything here is plain numpy and pure: given (graph, features,
parameters, time) the embedding of a node is deterministic.  The
training module re-implements the same computation in batched form; this
module is the readable reference the batched path is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from stgnn.significance import CandidateList, top_m_neighbors
from stgnn.temporal_graph import TemporalGraph

NORM_EPS = 1e-12


@dataclass
class ModelParams:
    """Learnable tensors: two per-layer weight pairs plus the rank correction.

    Shapes: w1_self, w1_nbr (d0, d1); w2_self, w2_nbr (d1, d2); beta (m,).
    The same container doubles as the gradient holder.
    """

    w1_self: np.ndarray
    w1_nbr: np.ndarray
    w2_self: np.ndarray
    w2_nbr: np.ndarray
    beta: np.ndarray

    @property
    def m(self) -> int:
        return self.beta.shape[0]

    def arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]

    def copy(self) -> "ModelParams":
        return ModelParams(**{name: a.copy() for name, a in self.arrays()})

    def zeros_like(self) -> "ModelParams":
        return ModelParams(**{name: np.zeros_like(a) for name, a in self.arrays()})

    def check_finite(self) -> None:
        for name, a in self.arrays():
            if not np.all(np.isfinite(a)):
                raise FloatingPointError(f"non-finite values in {name}")


def init_params(
    rng: np.random.Generator, d0: int = 128, d1: int = 16, d2: int = 16, m: int = 10
) -> ModelParams:
    """Glorot-uniform weight matrices; rank corrections start at zero
    (uniform neighbor weights)."""

    def glorot(fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    return ModelParams(
        w1_self=glorot(d0, d1),
        w1_nbr=glorot(d0, d1),
        w2_self=glorot(d1, d2),
        w2_nbr=glorot(d1, d2),
        beta=np.zeros(m, dtype=np.float64),
    )


def random_features(num_nodes: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Frozen input features: uniform in [-1, 1], never trained."""
    return rng.uniform(-1.0, 1.0, size=(num_nodes, dim))


def phi(scores, beta) -> np.ndarray:
    """Softmax weights over rank-aligned score * correction products.

    ``scores`` are the top-k significance values in rank order; rank i
    pairs with beta[i].  Computed with max subtraction since raw scores
    can reach the hundreds on high-frequency pairs.
    """
    scores = np.asarray(scores, dtype=np.float64)
    k = scores.shape[0]
    if k == 0:
        raise ValueError("phi over an empty candidate list; skip the neighbor term")
    if k > np.asarray(beta).shape[0]:
        raise ValueError(f"{k} scores exceed the rank-correction capacity {len(beta)}")
    z = scores * np.asarray(beta, dtype=np.float64)[:k]
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def stagg_layer(
    self_in: np.ndarray,
    nbr_ins: list[np.ndarray],
    scores,
    w_self: np.ndarray,
    w_nbr: np.ndarray,
    beta: np.ndarray,
    activate: bool,
) -> np.ndarray:
    """One aggregation layer: self map plus significance-weighted neighbor map.

    With no neighbors the neighbor term is zero.  ``activate`` applies
    ReLU (hidden layer); the output layer runs it with identity.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if len(nbr_ins) != scores.shape[0]:
        raise ValueError(f"{len(nbr_ins)} neighbor inputs vs {scores.shape[0]} scores")
    out = self_in @ w_self
    if nbr_ins:
        weights = phi(scores, beta)
        agg = np.zeros_like(nbr_ins[0])
        for w_i, x_i in zip(weights, nbr_ins):
            agg = agg + w_i * x_i
        out = out + agg @ w_nbr
    return np.maximum(out, 0.0) if activate else out


def forward_node(
    g: TemporalGraph,
    feats: np.ndarray,
    params: ModelParams,
    u: int,
    t: float,
    m: int | None = None,
    lam: float = 1.0,
    selector=None,
) -> np.ndarray:
    """Embedding of node u at time t via the two-layer computation tree.

    Layer-1 states of u and of each of its top-m neighbors are built from
    their own top-m neighbors' raw features; layer 2 fuses u's layer-1
    state with its neighbors'.  All candidate lists are taken at the same
    query time t and share one rank-correction vector.

    ``selector(g, node, t, m)`` overrides neighbor selection (used by the
    selection-ablated variants); it defaults to significance top-m.
    """
    if m is None:
        m = params.m
    if selector is None:
        selector = lambda g_, n_, t_, m_: top_m_neighbors(g_, n_, t_, m_, lam=lam)

    lists: dict[int, CandidateList] = {}

    def cand(node: int) -> CandidateList:
        if node not in lists:
            lists[node] = selector(g, node, t, m)
        return lists[node]

    def layer1(node: int) -> np.ndarray:
        cl = cand(node)
        nbr_feats = [feats[e.neighbor] for e in cl.entries]
        return stagg_layer(
            feats[node], nbr_feats, cl.scores(), params.w1_self, params.w1_nbr,
            params.beta, activate=True,
        )

    cl_u = cand(u)
    h1 = {node: layer1(node) for node in [u, *cl_u.neighbor_ids()]}
    return stagg_layer(
        h1[u],
        [h1[v] for v in cl_u.neighbor_ids()],
        cl_u.scores(),
        params.w2_self,
        params.w2_nbr,
        params.beta,
        activate=False,
    )


def random_neighbor_selector(rng: np.random.Generator, lam: float = 1.0):
    """Selector drawing up to m historical neighbors uniformly at random.

    The sampled neighbors keep their true significance scores and are
    ordered score-descending so rank corrections stay aligned.
    """

    def select(g: TemporalGraph, u: int, t: float, m: int) -> CandidateList:
        full = top_m_neighbors(g, u, t, m=max(m, g.num_nodes), lam=lam)
        entries = list(full.entries)
        if len(entries) > m:
            pick = rng.choice(len(entries), size=m, replace=False)
            entries = [entries[i] for i in sorted(pick)]
        return CandidateList(owner=u, at_time=t, entries=tuple(entries), capacity=m)

    return select


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity, 0 when either vector is numerically null."""
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na < NORM_EPS or nb < NORM_EPS:
        return 0.0
    return float(a @ b / (na * nb))


def save_checkpoint(path, params: ModelParams, feats: np.ndarray, seed: int) -> None:
    """Round-trip-exact dump of the five tensors, features, and seed."""
    np.savez(
        path,
        feats=feats,
        seed=np.asarray(seed, dtype=np.int64),
        **{name: a for name, a in params.arrays()},
    )


def load_checkpoint(path) -> tuple[ModelParams, np.ndarray, int]:
    with np.load(path) as data:
        params = ModelParams(
            w1_self=data["w1_self"],
            w1_nbr=data["w1_nbr"],
            w2_self=data["w2_self"],
            w2_nbr=data["w2_nbr"],
            beta=data["beta"],
        )
        return params, data["feats"], int(data["seed"])
