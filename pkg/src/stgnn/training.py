"""Significance-weighted cosine loss, exact gradients, Adam, training loop.

The loss treats each training event as a positive sample weighted by its
forward-window significance label and pairs it with one uniformly drawn
non-interacting negative per positive, weighted by the batch mean of the
positive labels.

Gradients of the full loss -> output layer -> hidden layer -> softmax
rank-weighting composition are derived by hand and evaluated in batched
numpy.  The batched path is intentionally redundant with the reference
forward in stgnn.model; tests pin them against each other and against
central finite differences.
"""

from __future__ import annotations

import logging
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from stgnn.model import ModelParams, init_params, random_features
from stgnn.significance import SignificanceIndex, significance_label, top_m_neighbors
from stgnn.temporal_graph import TemporalGraph, _pair_key

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12


def named_rng(seed: int, *names) -> np.random.Generator:
    """Independent generator derived from one master seed and a stream name.

    Every random decision (features, negatives, ablation sampling, eval
    pairs) draws from its own named stream so that model variants sharing
    a seed also share data conditions.
    """
    entropy = [int(seed)] + [zlib.crc32(str(n).encode("utf-8")) for n in names]
    return np.random.default_rng(entropy)


@dataclass(frozen=True)
class TrainSample:
    """One supervision point: a (u, v) pair at time t with its window label."""

    u: int
    v: int
    t: float
    positive: bool
    s_delta: int


@dataclass
class TrainConfig:
    """Training hyperparameters and model-variant switches."""

    lr: float = 0.01
    epochs: int = 50
    batch_size: int = 128
    m: int = 10
    p: float = 0.5
    lam: float = 1.0
    seed: int = 0
    d0: int = 128
    d1: int = 16
    d2: int = 16
    use_significant_selection: bool = True
    use_intimate_window: bool = True
    early_stop_patience: int = 10
    negative_tries: int = 100

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")
        if not 0.0 <= self.p < 1.0:
            raise ValueError(f"window proportion must lie in [0, 1), got {self.p}")


@dataclass
class AdamState:
    """First/second moment accumulators shaped like the parameters."""

    m1: ModelParams
    m2: ModelParams
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(m1=params.zeros_like(), m2=params.zeros_like())


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState, lr: float) -> None:
    """Standard bias-corrected Adam update, applied in place."""
    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for (name, p), (_, g), (_, m1), (_, m2) in zip(
        params.arrays(), grads.arrays(), state.m1.arrays(), state.m2.arrays()
    ):
        m1 *= state.beta1
        m1 += (1.0 - state.beta1) * g
        m2 *= state.beta2
        m2 += (1.0 - state.beta2) * g * g
        p -= lr * (m1 / bc1) / (np.sqrt(m2 / bc2) + state.eps)


class TrainingDiverged(RuntimeError):
    """Loss went non-finite; carries the last finite parameters."""

    def __init__(self, message: str, params: ModelParams, history: list[float]):
        super().__init__(message)
        self.params = params
        self.history = history


@dataclass
class TrainResult:
    params: ModelParams
    feats: np.ndarray
    loss_history: list[float]
    epoch_seconds: list[float] = field(default_factory=list)
    skipped_negatives: int = 0


def significance_loss(h_u, h_v, s_delta: int, s_bar: float) -> float:
    """Per-sample loss: positives pull cosine toward 1 scaled by their
    label, negatives hinge the cosine at 0 scaled by the batch mean label."""
    from stgnn.model import cosine

    if s_bar <= 0:
        raise ValueError(f"balance factor must be positive, got {s_bar}")
    c = cosine(np.asarray(h_u, dtype=np.float64), np.asarray(h_v, dtype=np.float64))
    if s_delta >= 1:
        return (1.0 - c) * float(s_delta)
    return max(0.0, c) * s_bar


def build_positive_samples(g: TemporalGraph, delta: float | None) -> list[TrainSample]:
    """One positive per training event, labeled by its window count.

    With ``delta`` None (window ablated) every label is 1.  Labels are
    counted against the training stream only, so windows reaching past
    the split never see test data.
    """
    out = []
    for u, v, t in g.events:
        s = significance_label(g, u, v, t, delta) if delta is not None else 1
        out.append(TrainSample(u=u, v=v, t=t, positive=True, s_delta=s))
    return out


def _valid_negative(g: TemporalGraph, u: int, w: int, t: float, delta: float | None) -> bool:
    if w == u:
        return False
    if delta is not None:
        return g.count_in_window(u, w, t, t + delta) == 0
    ts = g.pair_index.get(_pair_key(u, w))
    if ts is None:
        return True
    i = np.searchsorted(ts, t, side="left")
    return not (i < ts.shape[0] and ts[i] == t)


def _draw_negative(
    g: TemporalGraph, pos: TrainSample, rng: np.random.Generator, delta: float | None, tries: int
) -> TrainSample | None:
    for _ in range(tries):
        w = int(rng.integers(g.num_nodes))
        if _valid_negative(g, pos.u, w, pos.t, delta):
            return TrainSample(u=pos.u, v=w, t=pos.t, positive=False, s_delta=0)
    return None


def sample_negatives(
    g: TemporalGraph,
    positives: list[TrainSample],
    rng: np.random.Generator,
    delta: float | None = None,
    tries: int = 100,
) -> list[TrainSample]:
    """One negative (u, w, t) per positive (u, v, t), w uniform among nodes
    with no (u, w) contact inside the positive's window.

    Positives whose negatives cannot be found within ``tries`` draws are
    skipped with a warning, so the result can be shorter than the input.
    """
    out = []
    skipped = 0
    for pos in positives:
        neg = _draw_negative(g, pos, rng, delta, tries)
        if neg is None:
            skipped += 1
        else:
            out.append(neg)
    if skipped:
        logger.warning("skipped %d positive(s): no valid negative found", skipped)
    return out


# ---------------------------------------------------------------------------
# Batched computation tree
# ---------------------------------------------------------------------------


class _BatchTree:
    """Flattened two-hop computation trees for one mini-batch.

    An *entry* is one (time, node) layer-1 unit: the node plus its
    candidate list.  A *root* is an entry used at layer 2, carrying the
    entry indices of its candidate neighbors.  Samples reference two
    roots each.  Entries are deduplicated, so positives and their
    attached negatives share the anchor-node subtree.
    """

    def __init__(self, m: int):
        self.m = m
        self._entry_ids: dict[tuple[float, int], int] = {}
        self.owner: list[int] = []
        self.nbr_ids: list[np.ndarray] = []
        self.nbr_scores: list[np.ndarray] = []
        self._root_ids: dict[tuple[float, int], int] = {}
        self.root_entry: list[int] = []
        self.root_nbr_entries: list[np.ndarray] = []
        self.sample_roots: list[tuple[int, int]] = []
        self.sample_positive: list[bool] = []
        self.sample_sdelta: list[float] = []

    def add_entry(self, node: int, t: float, query) -> int:
        key = (t, node)
        idx = self._entry_ids.get(key)
        if idx is not None:
            return idx
        ids, scores = query(node)
        idx = len(self.owner)
        self._entry_ids[key] = idx
        self.owner.append(node)
        self.nbr_ids.append(np.asarray(ids, dtype=np.int64))
        self.nbr_scores.append(np.asarray(scores, dtype=np.float64))
        return idx

    def add_root(self, node: int, t: float, query) -> int:
        key = (t, node)
        idx = self._root_ids.get(key)
        if idx is not None:
            return idx
        e = self.add_entry(node, t, query)
        nbr_entries = np.asarray(
            [self.add_entry(int(v), t, query) for v in self.nbr_ids[e]], dtype=np.int64
        )
        idx = len(self.root_entry)
        self._root_ids[key] = idx
        self.root_entry.append(e)
        self.root_nbr_entries.append(nbr_entries)
        return idx

    def add_sample(self, root_u: int, root_v: int, positive: bool, s_delta: float) -> None:
        self.sample_roots.append((root_u, root_v))
        self.sample_positive.append(positive)
        self.sample_sdelta.append(float(s_delta))

    def finalize(self) -> "_FlatBatch":
        m = self.m
        n_e = len(self.owner)
        n_r = len(self.root_entry)
        owner = np.asarray(self.owner, dtype=np.int64)
        nbrs = np.zeros((n_e, m), dtype=np.int64)
        scores = np.zeros((n_e, m), dtype=np.float64)
        mask = np.zeros((n_e, m), dtype=bool)
        for i, (ids, sc) in enumerate(zip(self.nbr_ids, self.nbr_scores)):
            k = ids.shape[0]
            nbrs[i, :k] = ids
            scores[i, :k] = sc
            mask[i, :k] = True
        root_entry = np.asarray(self.root_entry, dtype=np.int64)
        root_nbrs = np.zeros((n_r, m), dtype=np.int64)
        for i, es in enumerate(self.root_nbr_entries):
            root_nbrs[i, : es.shape[0]] = es
        su = np.asarray([r[0] for r in self.sample_roots], dtype=np.int64)
        sv = np.asarray([r[1] for r in self.sample_roots], dtype=np.int64)
        positive = np.asarray(self.sample_positive, dtype=bool)
        sdelta = np.asarray(self.sample_sdelta, dtype=np.float64)
        pos_sd = sdelta[positive]
        s_bar = float(pos_sd.mean()) if pos_sd.size else 1.0
        weight = np.where(positive, sdelta, s_bar)
        return _FlatBatch(owner, nbrs, scores, mask, root_entry, root_nbrs, su, sv, positive, weight)


@dataclass
class _FlatBatch:
    owner: np.ndarray       # (E,)
    nbrs: np.ndarray        # (E, m) node ids, zero-padded
    scores: np.ndarray      # (E, m)
    mask: np.ndarray        # (E, m) bool
    root_entry: np.ndarray  # (R,)
    root_nbrs: np.ndarray   # (R, m) entry ids, zero-padded
    su: np.ndarray          # (S,) root ids
    sv: np.ndarray          # (S,)
    positive: np.ndarray    # (S,) bool
    weight: np.ndarray      # (S,) s_delta for positives, s_bar for negatives


def _masked_phi(scores: np.ndarray, mask: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax of score * beta over the valid ranks."""
    z = scores * beta[None, :]
    z = np.where(mask, z, -np.inf)
    zmax = np.max(z, axis=1, keepdims=True)
    zmax = np.where(np.isfinite(zmax), zmax, 0.0)
    e = np.where(mask, np.exp(z - zmax), 0.0)
    denom = e.sum(axis=1, keepdims=True)
    return e / np.where(denom > 0.0, denom, 1.0)


def _forward_backward(
    fb: _FlatBatch,
    params: ModelParams,
    feats: np.ndarray,
    want_grads: bool = True,
    detach_phi: bool = False,
) -> tuple[float, ModelParams | None]:
    """Mean batch loss and (optionally) its exact parameter gradients."""
    xw1s = feats @ params.w1_self  # (N, d1)
    xw1n = feats @ params.w1_nbr

    phi_e = _masked_phi(fb.scores, fb.mask, params.beta)  # (E, m)
    nbr_gather = xw1n[fb.nbrs]  # (E, m, d1)
    pre = xw1s[fb.owner] + np.einsum("em,emd->ed", phi_e, nbr_gather)
    h1 = np.maximum(pre, 0.0)

    phi_r = phi_e[fb.root_entry]  # (R, m)
    h1_nbr = h1[fb.root_nbrs]  # (R, m, d1)
    agg = np.einsum("rm,rmd->rd", phi_r, h1_nbr)
    h2 = h1[fb.root_entry] @ params.w2_self + agg @ params.w2_nbr  # (R, d2)

    hu, hv = h2[fb.su], h2[fb.sv]
    nu = np.linalg.norm(hu, axis=1)
    nv = np.linalg.norm(hv, axis=1)
    ok = (nu > NORM_EPS) & (nv > NORM_EPS)
    denom = np.where(ok, nu * nv, 1.0)
    cos = np.where(ok, np.einsum("sd,sd->s", hu, hv) / denom, 0.0)

    per_sample = np.where(
        fb.positive, (1.0 - cos) * fb.weight, np.maximum(0.0, cos) * fb.weight
    )
    n_samples = per_sample.shape[0]
    loss = float(per_sample.mean())
    if not want_grads:
        return loss, None

    # d loss / d cos, including the hinge subgradient (zero at the kink)
    dcos = np.where(fb.positive, -fb.weight, np.where(cos > 0.0, fb.weight, 0.0))
    dcos = np.where(ok, dcos / n_samples, 0.0)

    dhu = dcos[:, None] * (hv / denom[:, None] - cos[:, None] * hu / np.where(ok, nu * nu, 1.0)[:, None])
    dhv = dcos[:, None] * (hu / denom[:, None] - cos[:, None] * hv / np.where(ok, nv * nv, 1.0)[:, None])

    d_h2 = np.zeros_like(h2)
    np.add.at(d_h2, fb.su, dhu)
    np.add.at(d_h2, fb.sv, dhv)

    g_w2_self = h1[fb.root_entry].T @ d_h2
    g_w2_nbr = agg.T @ d_h2

    d_h1 = np.zeros_like(h1)
    np.add.at(d_h1, fb.root_entry, d_h2 @ params.w2_self.T)
    d_agg = d_h2 @ params.w2_nbr.T  # (R, d1)
    mask_r = fb.mask[fb.root_entry]
    d_phi = np.zeros_like(phi_e)
    np.add.at(
        d_phi, fb.root_entry, np.einsum("rd,rmd->rm", d_agg, h1_nbr) * mask_r
    )
    np.add.at(
        d_h1,
        fb.root_nbrs.ravel(),
        (phi_r[:, :, None] * d_agg[:, None, :]).reshape(-1, h1.shape[1]),
    )

    d_pre = d_h1 * (pre > 0.0)
    d_xw1s = np.zeros_like(xw1s)
    np.add.at(d_xw1s, fb.owner, d_pre)
    d_phi += np.einsum("ed,emd->em", d_pre, nbr_gather) * fb.mask
    d_xw1n = np.zeros_like(xw1n)
    np.add.at(
        d_xw1n,
        fb.nbrs.ravel(),
        (phi_e[:, :, None] * d_pre[:, None, :]).reshape(-1, xw1n.shape[1]),
    )

    if detach_phi:
        g_beta = np.zeros_like(params.beta)
    else:
        inner = np.sum(d_phi * phi_e, axis=1, keepdims=True)
        d_z = phi_e * (d_phi - inner)
        g_beta = np.sum(d_z * fb.scores, axis=0)

    grads = ModelParams(
        w1_self=feats.T @ d_xw1s,
        w1_nbr=feats.T @ d_xw1n,
        w2_self=g_w2_self,
        w2_nbr=g_w2_nbr,
        beta=g_beta,
    )
    return loss, grads


def _tree_from_graph(batch: list[TrainSample], g: TemporalGraph, config: TrainConfig) -> _FlatBatch:
    """Build the batch tree with pure (immutable-graph) candidate queries."""
    tree = _BatchTree(config.m)
    for s in batch:
        def query(node, _t=s.t):
            cl = top_m_neighbors(g, node, _t, config.m, lam=config.lam)
            return np.asarray(cl.neighbor_ids(), dtype=np.int64), cl.scores()

        ru = tree.add_root(s.u, s.t, query)
        rv = tree.add_root(s.v, s.t, query)
        tree.add_sample(ru, rv, s.positive, s.s_delta)
    return tree.finalize()


def batch_loss(
    batch: list[TrainSample], g: TemporalGraph, feats: np.ndarray, params: ModelParams,
    config: TrainConfig,
) -> float:
    """Mean batch loss under pure candidate queries (no gradients)."""
    loss, _ = _forward_backward(_tree_from_graph(batch, g, config), params, feats, want_grads=False)
    return loss


def backward(
    batch: list[TrainSample], g: TemporalGraph, feats: np.ndarray, params: ModelParams,
    config: TrainConfig, _detach_phi: bool = False,
) -> ModelParams:
    """Exact gradients of the mean batch loss for all five tensors.

    Propagates through the cosine, both aggregation layers, the shared
    softmax rank-weighting (including its Jacobian), and ReLU (zero
    subgradient at the kink).  Frozen input features get no gradient.
    """
    if not batch:
        raise ValueError("backward over an empty batch")
    fb = _tree_from_graph(batch, g, config)
    _, grads = _forward_backward(fb, params, feats, detach_phi=_detach_phi)
    for name, a in grads.arrays():
        if not np.all(np.isfinite(a)):
            raise FloatingPointError(f"non-finite gradient in {name}")
    return grads


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------


def _capture_chunk(
    index: SignificanceIndex,
    chunk: list[TrainSample],
    negs: list[TrainSample | None],
    config: TrainConfig,
    sel_rng: np.random.Generator,
) -> _FlatBatch:
    """Advance the streaming index over one chronological chunk, recording
    each sample's computation tree before its event is inserted.

    Samples sharing a timestamp are all captured before any of their
    events enter the index, preserving strictly-before semantics.
    """
    tree = _BatchTree(config.m)
    if config.use_significant_selection:
        query_at = lambda t: (lambda node: index.top_m(node, t, config.m))
    else:
        query_at = lambda t: (lambda node: index.random_m(node, t, config.m, sel_rng))

    i = 0
    n = len(chunk)
    while i < n:
        j = i
        t = chunk[i].t
        while j < n and chunk[j].t == t:
            j += 1
        query = query_at(t)
        for k in range(i, j):
            pos, neg = chunk[k], negs[k]
            ru = tree.add_root(pos.u, t, query)
            rv = tree.add_root(pos.v, t, query)
            tree.add_sample(ru, rv, True, pos.s_delta)
            if neg is not None:
                rw = tree.add_root(neg.v, t, query)
                tree.add_sample(ru, rw, False, 0.0)
        for k in range(i, j):
            index.add_event(chunk[k].u, chunk[k].v, t)
        i = j
    return tree.finalize()


def train(g_train: TemporalGraph, config: TrainConfig, delta: float | None) -> TrainResult:
    """Chronological mini-batch training with 1:1 negative sampling.

    ``delta`` is the intimate-window size from the power-law fit; it
    keeps governing negative validity even when the window ablation
    flattens the labels, so all variants of one seed see identical data.
    ``delta`` may be None only in window-ablated runs (negatives then
    only avoid contacts at the exact sample time).

    Fixed seed implies a bitwise-reproducible loss trajectory.
    """
    if delta is None and config.use_intimate_window:
        raise ValueError("window size required unless the intimate window is ablated")
    feats = random_features(g_train.num_nodes, config.d0, named_rng(config.seed, "features"))
    params = init_params(named_rng(config.seed, "params"), config.d0, config.d1, config.d2, config.m)
    adam = AdamState.for_params(params)
    neg_rng = named_rng(config.seed, "train-negatives")
    sel_rng = named_rng(config.seed, "train-selection")

    label_delta = delta if config.use_intimate_window else None
    positives = build_positive_samples(g_train, label_delta)

    history: list[float] = []
    epoch_seconds: list[float] = []
    skipped_total = 0
    best = np.inf
    stale = 0

    for epoch in range(config.epochs):
        tic = time.perf_counter()
        negs = [_draw_negative(g_train, p, neg_rng, delta, config.negative_tries) for p in positives]
        n_skip = sum(1 for x in negs if x is None)
        skipped_total += n_skip
        if n_skip and epoch == 0:
            logger.warning("epoch 0: %d positive(s) have no valid negative", n_skip)

        index = SignificanceIndex(g_train.num_nodes, lam=config.lam)
        loss_sum = 0.0
        n_seen = 0
        for start in range(0, len(positives), config.batch_size):
            chunk = positives[start : start + config.batch_size]
            chunk_negs = negs[start : start + config.batch_size]
            fb = _capture_chunk(index, chunk, chunk_negs, config, sel_rng)
            loss, grads = _forward_backward(fb, params, feats)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}", params.copy(), history
                )
            adam_step(params, grads, adam, config.lr)
            loss_sum += loss * fb.su.shape[0]
            n_seen += fb.su.shape[0]
        epoch_loss = loss_sum / max(n_seen, 1)
        history.append(epoch_loss)
        epoch_seconds.append(time.perf_counter() - tic)

        if epoch_loss < best - 1e-9:
            best = epoch_loss
            stale = 0
        else:
            stale += 1
            if stale >= config.early_stop_patience:
                logger.info("early stop at epoch %d (plateau of %d)", epoch, stale)
                break

    return TrainResult(
        params=params,
        feats=feats,
        loss_history=history,
        epoch_seconds=epoch_seconds,
        skipped_negatives=skipped_total,
    )
