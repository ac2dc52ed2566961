"""Gaussian belief propagation on a linearized pairwise factor graph.

A directed message ``s -> r`` is kept in observation form: a pseudo
measurement ``alpha = H x_r + v`` with ``v ~ N(0, gamma)``. Absorbing a
message into a Gaussian is one Kalman update; the BP division is realized by
leaving the destination's message out of the product, never by dividing.

Two engines produce the same numbers:

* ``"kalman"`` walks vehicles and messages with ``kalman_update`` (reference);
* ``"information"`` batches every directed edge in information form, which is
  what the experiment runs use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy import sparse

from coopaoa.gaussian import Gaussian, NumericalError, check_covariance, kalman_update, psd_clip, symmetrize
from coopaoa.geometry import AoAPair
from coopaoa.slr import LinearModel

GAMMA_FLOOR = 1e-12
TWO_PI = 2.0 * np.pi


def _wrap(a):
    return np.pi - np.mod(np.pi - a, TWO_PI)


@dataclass(frozen=True, eq=False)
class Message:
    """Directed message ``sender -> receiver`` as ``alpha ~ N(H x_receiver, gamma)``."""

    alpha: np.ndarray
    H: np.ndarray
    gamma: np.ndarray = field(repr=False)
    sender: int = -1
    receiver: int = -1
    iteration: int = 0

    def __post_init__(self):
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        if H.shape[0] != alpha.size or gamma.shape != (alpha.size, alpha.size):
            raise ValueError("Message: inconsistent dimensions")
        if not np.all(np.isfinite(alpha)) or not np.all(np.isfinite(H)):
            raise NumericalError("Message: non-finite entries")
        check_covariance(gamma, "message gamma")
        if np.linalg.eigvalsh(gamma).min() <= 0.0:
            raise NumericalError("message gamma is not positive definite")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "gamma", gamma)

    def absorb_into(self, belief: Gaussian) -> Gaussian:
        return kalman_update(belief, self.H, self.alpha, self.gamma)


@dataclass(frozen=True)
class GraphEdge:
    i: int
    j: int
    measurement: AoAPair
    model: LinearModel


@dataclass
class FactorGraph:
    """Priors indexed by vehicle id (0..N-1) plus linearized pair edges (i < j)."""

    priors: list[Gaussian]
    edges: list[GraphEdge] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.priors)
        seen = set()
        for e in self.edges:
            if not (0 <= e.i < e.j < n):
                raise ValueError(f"edge ({e.i}, {e.j}) is not canonical or references a missing vehicle")
            if (e.i, e.j) in seen:
                raise ValueError(f"duplicate edge ({e.i}, {e.j})")
            seen.add((e.i, e.j))

    @property
    def n_vehicles(self) -> int:
        return len(self.priors)

    def edge(self, i: int, j: int) -> GraphEdge:
        a, b = min(i, j), max(i, j)
        for e in self.edges:
            if e.i == a and e.j == b:
                return e
        raise KeyError(f"no edge between {i} and {j}")

    def neighbors(self, i: int) -> list[int]:
        out = [e.j for e in self.edges if e.i == i] + [e.i for e in self.edges if e.j == i]
        return sorted(out)


Inbox = Mapping[tuple[int, int], Message]  # keyed by (sender, receiver)


def extrinsic_belief(graph: FactorGraph, i: int, exclude: int | None, inbox: Inbox) -> Gaussian:
    """Prior of ``i`` updated with every message into ``i`` except the one from ``exclude``."""
    belief = graph.priors[i]
    for (s, r), msg in sorted(inbox.items()):
        if r == i and s != exclude:
            belief = msg.absorb_into(belief)
    return belief


def _repair_gamma(gamma: np.ndarray) -> np.ndarray:
    return psd_clip(gamma, floor=GAMMA_FLOOR)


def compute_message(
    model: LinearModel,
    measurement: AoAPair,
    extrinsic: Gaussian,
    sender_is_i: bool = True,
    scalar: bool = False,
    sender: int = -1,
    receiver: int = -1,
    iteration: int = 0,
) -> Message:
    """Message from one end of an edge to the other.

    With ``sender_is_i`` the sender is the edge's first vehicle:
    ``alpha = z - A_i mu - b``, ``H = A_j``, ``gamma = R + omega + A_i P A_i^T``
    (roles swap otherwise). ``scalar`` keeps only the bearing measured by the
    sender. For angular models, alpha is moved to the 2*pi branch nearest the
    receiver's predicted bearing at the linearization point.
    """
    A_s, A_r = (model.A_i, model.A_j) if sender_is_i else (model.A_j, model.A_i)
    z, b, R, om = measurement.z, model.b, measurement.noise_cov, model.omega
    alpha = z - A_s @ extrinsic.mean - b
    if model.angular and model.lin_mean is not None:
        d = A_r.shape[1]
        lin_r = model.lin_mean[d:] if sender_is_i else model.lin_mean[:d]
        pred = A_r @ lin_r
        alpha = pred + _wrap(alpha - pred)
    gamma = R + om + A_s @ extrinsic.cov @ A_s.T
    H = A_r
    if scalar:
        row = [0] if sender_is_i else [1]
        alpha, H, gamma = alpha[row], H[row], gamma[np.ix_(row, row)]
    return Message(alpha, H, _repair_gamma(symmetrize(gamma)), sender, receiver, iteration)


def compute_belief(prior: Gaussian, inbox: Iterable[Message]) -> Gaussian:
    """Prior updated with every incoming message."""
    belief = prior
    for msg in inbox:
        belief = msg.absorb_into(belief)
    return belief


def joint_belief(graph: FactorGraph, i: int, j: int, inbox: Inbox) -> Gaussian:
    """6-dim pair belief: product of the two extrinsics times the edge likelihood."""
    edge = graph.edge(i, j)
    i, j = edge.i, edge.j
    ext_i = extrinsic_belief(graph, i, j, inbox)
    ext_j = extrinsic_belief(graph, j, i, inbox)
    prod = Gaussian.block_product(ext_i, ext_j)
    m = edge.model
    wrap = np.full(m.b.size, m.angular)
    return kalman_update(prod, m.A, edge.measurement.z - m.b, m.omega + edge.measurement.noise_cov, wrap=wrap)


@dataclass
class SweepResult:
    """Beliefs after a BP run, plus the pair beliefs and the final inbox."""

    means: np.ndarray            # (N, d)
    covs: np.ndarray             # (N, d, d)
    joint_means: np.ndarray      # (E, 2d)
    joint_covs: np.ndarray       # (E, 2d, 2d)
    edge_index: list[tuple[int, int]]
    inbox: dict[tuple[int, int], Message]
    state: "_MessageState | None" = field(default=None, repr=False)

    @property
    def beliefs(self) -> list[Gaussian]:
        return [Gaussian(m, c) for m, c in zip(self.means, self.covs)]

    @property
    def joint_beliefs(self) -> dict[tuple[int, int], Gaussian]:
        return {ij: Gaussian(m, c) for ij, m, c in zip(self.edge_index, self.joint_means, self.joint_covs)}


def bp_sweep(
    graph: FactorGraph,
    M: int,
    inbox: Inbox | None = None,
    engine: str = "information",
    scalar: bool = False,
    check: bool = True,
) -> SweepResult:
    """Run ``M`` synchronous (flooding) BP iterations, then compute beliefs.

    Every directed message at iteration t is built from the inbox of
    iteration t-1; an empty or missing inbox means all-ones messages.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if engine == "kalman":
        return _sweep_kalman(graph, M, dict(inbox or {}), scalar, check)
    if engine == "information":
        arrays = EdgeArrays.from_graph(graph)
        state = None
        if inbox:
            state = _MessageState.from_inbox(inbox, arrays, graph.priors[0].dim)
        res = sweep_arrays(_stack_priors(graph.priors), arrays, M, scalar=scalar, check=check, state=state)
        return res
    raise ValueError(f"unknown engine {engine!r}")


def _check_all(what: str, covs: np.ndarray, *vectors: np.ndarray) -> None:
    for v in vectors:
        if not np.all(np.isfinite(v)):
            raise NumericalError(f"{what}: non-finite values")
    if covs.size:
        check_covariance(covs, what)


def _sweep_kalman(graph: FactorGraph, M: int, inbox: dict, scalar: bool, check: bool) -> SweepResult:
    for t in range(1, M + 1):
        new = {}
        for e in graph.edges:
            for s, r, s_is_i in ((e.i, e.j, True), (e.j, e.i, False)):
                ext = extrinsic_belief(graph, s, r, inbox)
                new[(s, r)] = compute_message(e.model, e.measurement, ext, s_is_i, scalar, s, r, t)
        inbox = new
    beliefs = [compute_belief(p, [m for (s, r), m in sorted(inbox.items()) if r == v])
               for v, p in enumerate(graph.priors)]
    joints = [joint_belief(graph, e.i, e.j, inbox) for e in graph.edges]
    d = graph.priors[0].dim if graph.priors else 0
    means = np.array([b.mean for b in beliefs]).reshape(len(beliefs), d)
    covs = np.array([b.cov for b in beliefs]).reshape(len(beliefs), d, d)
    jm = np.array([g.mean for g in joints]).reshape(len(joints), 2 * d)
    jc = np.array([g.cov for g in joints]).reshape(len(joints), 2 * d, 2 * d)
    if check:
        _check_all("beliefs", covs, means)
        _check_all("joint beliefs", jc, jm)
    return SweepResult(means, covs, jm, jc, [(e.i, e.j) for e in graph.edges], inbox)


# ---------------------------------------------------------------------------
# batched information-form engine


@dataclass
class EdgeArrays:
    """Linearized edges stacked for the batched engine (E undirected edges)."""

    i: np.ndarray        # (E,)
    j: np.ndarray        # (E,)
    z: np.ndarray        # (E, m)
    R: np.ndarray        # (E, m, m)
    A: np.ndarray        # (E, m, 2d)
    b: np.ndarray        # (E, m)
    omega: np.ndarray    # (E, m, m)
    angular: bool = True
    lin_mean: np.ndarray | None = None  # (E, 2d)

    @property
    def n_edges(self) -> int:
        return self.i.size

    @classmethod
    def from_graph(cls, graph: FactorGraph) -> "EdgeArrays":
        d = graph.priors[0].dim if graph.priors else 3
        E = len(graph.edges)
        if E == 0:
            return cls(np.zeros(0, int), np.zeros(0, int), np.zeros((0, 2)), np.zeros((0, 2, 2)),
                       np.zeros((0, 2, 2 * d)), np.zeros((0, 2)), np.zeros((0, 2, 2)))
        ang = {e.model.angular for e in graph.edges}
        if len(ang) != 1:
            raise ValueError("mixed angular and non-angular edges are not supported")
        angular = ang.pop()
        lin = None
        if angular and all(e.model.lin_mean is not None for e in graph.edges):
            lin = np.array([e.model.lin_mean for e in graph.edges])
        return cls(
            np.array([e.i for e in graph.edges]),
            np.array([e.j for e in graph.edges]),
            np.array([e.measurement.z for e in graph.edges]),
            np.array([e.measurement.noise_cov for e in graph.edges]),
            np.array([e.model.A for e in graph.edges]),
            np.array([e.model.b for e in graph.edges]),
            np.array([e.model.omega for e in graph.edges]),
            angular,
            lin,
        )


@dataclass
class _MessageState:
    """Directed-edge messages: index k < E is i->j, k >= E is j->i."""

    alpha: np.ndarray  # (2E, m)
    H: np.ndarray      # (2E, m, d)
    gamma: np.ndarray  # (2E, m, m)
    J: np.ndarray      # (2E, d, d)  information contribution to receiver
    h: np.ndarray      # (2E, d)
    iteration: int = 0

    @classmethod
    def from_inbox(cls, inbox: Inbox, arrays: EdgeArrays, d: int) -> "_MessageState":
        E = arrays.n_edges
        alpha, H, gamma = [], [], []
        for k in range(2 * E):
            s, r = (arrays.i[k], arrays.j[k]) if k < E else (arrays.j[k - E], arrays.i[k - E])
            msg = inbox.get((int(s), int(r)))
            if msg is None:
                raise ValueError("batched engine needs either no inbox or a message for every direction")
            alpha.append(msg.alpha)
            H.append(msg.H)
            gamma.append(msg.gamma)
        return cls.build(np.array(alpha), np.array(H), np.array(gamma), max(m.iteration for m in inbox.values()))

    @classmethod
    def build(cls, alpha, H, gamma, iteration=0) -> "_MessageState":
        Gi = np.linalg.inv(gamma)
        HtGi = np.swapaxes(H, -1, -2) @ Gi
        J = symmetrize(HtGi @ H)
        h = np.einsum("kdm,km->kd", HtGi, alpha)
        return cls(alpha, H, gamma, J, h, iteration)

    def to_inbox(self, arrays: EdgeArrays) -> dict[tuple[int, int], Message]:
        E = arrays.n_edges
        out = {}
        for k in range(2 * E):
            s, r = (arrays.i[k], arrays.j[k]) if k < E else (arrays.j[k - E], arrays.i[k - E])
            out[(int(s), int(r))] = Message(self.alpha[k], self.H[k], self.gamma[k], int(s), int(r), self.iteration)
        return out


def _stack_priors(priors: list[Gaussian]) -> tuple[np.ndarray, np.ndarray]:
    return np.array([p.mean for p in priors]), np.array([p.cov for p in priors])


def _information(covs: np.ndarray) -> np.ndarray:
    # eigen-floored inverse so singular (zero-variance) priors stay usable
    w, V = np.linalg.eigh(symmetrize(covs))
    scale = np.maximum(w.max(axis=-1, keepdims=True), 1.0)
    w = np.maximum(w, 1e-12 * scale)
    return symmetrize((V / w[..., None, :]) @ np.swapaxes(V, -1, -2))


class _Topology:
    """Sparse sum operators for extrinsic and full beliefs."""

    def __init__(self, n: int, i: np.ndarray, j: np.ndarray):
        E = i.size
        self.sender = np.concatenate([i, j])
        self.receiver = np.concatenate([j, i])
        k = np.arange(2 * E)
        rev = np.concatenate([k[E:], k[:E]])
        # belief of v sums every message with receiver v
        self.into = sparse.csr_matrix((np.ones(2 * E), (self.receiver, k)), shape=(n, 2 * E))
        # extrinsic for directed k sums messages into sender[k], minus the reverse one
        rows, cols = [], []
        by_receiver = [[] for _ in range(n)]
        for kk in range(2 * E):
            by_receiver[self.receiver[kk]].append(kk)
        for kk in range(2 * E):
            for src in by_receiver[self.sender[kk]]:
                if src != rev[kk]:
                    rows.append(kk)
                    cols.append(src)
        self.excl = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(2 * E, 2 * E))


def _fuse(op, prior_J, prior_h, J, h):
    d = prior_J.shape[-1]
    n = op.shape[0]
    if J.shape[0]:
        Jt = prior_J + (op @ J.reshape(J.shape[0], -1)).reshape(n, d, d)
        ht = prior_h + op @ h
    else:
        Jt, ht = prior_J.copy(), prior_h.copy()
    cov = symmetrize(np.linalg.inv(symmetrize(Jt)))
    mean = np.einsum("kab,kb->ka", cov, ht)
    return mean, cov


def sweep_arrays(
    priors: tuple[np.ndarray, np.ndarray],
    arrays: EdgeArrays,
    M: int,
    scalar: bool = False,
    check: bool = True,
    state: _MessageState | None = None,
    topology: _Topology | None = None,
    build_inbox: bool = True,
) -> SweepResult:
    """Batched BP on stacked arrays; see ``bp_sweep``."""
    pm, pc = priors
    n, d = pm.shape
    E = arrays.n_edges
    topo = topology or _Topology(n, arrays.i, arrays.j)
    Jp = _information(pc)
    hp = np.einsum("nab,nb->na", Jp, pm)
    if E == 0:
        jm, jc = np.zeros((0, 2 * d)), np.zeros((0, 2 * d, 2 * d))
        return SweepResult(pm.copy(), pc.copy(), jm, jc, [], {}, None)

    snd, _rcv = topo.sender, topo.receiver
    A_i, A_j = arrays.A[:, :, :d], arrays.A[:, :, d:]
    A_s = np.concatenate([A_i, A_j])
    A_r = np.concatenate([A_j, A_i])
    z2 = np.concatenate([arrays.z, arrays.z])
    b2 = np.concatenate([arrays.b, arrays.b])
    base = arrays.R + arrays.omega
    base2 = np.concatenate([base, base])
    pred = None
    if arrays.angular and arrays.lin_mean is not None:
        lin_r = np.concatenate([arrays.lin_mean[:, d:], arrays.lin_mean[:, :d]])
        pred = np.einsum("kmd,kd->km", A_r, lin_r)
    if scalar:
        rows = np.concatenate([np.zeros(E, int), np.ones(E, int)])
        kk = np.arange(2 * E)
        A_s, A_r = A_s[kk, rows][:, None, :], A_r[kk, rows][:, None, :]
        z2, b2 = z2[kk, rows][:, None], b2[kk, rows][:, None]
        base2 = base2[kk, rows, rows][:, None, None]
        if pred is not None:
            pred = pred[kk, rows][:, None]

    Jsnd, hsnd = Jp[snd], hp[snd]
    for _ in range(M):
        if state is None:
            ext_m, ext_c = pm[snd], pc[snd]
        else:
            ext_m, ext_c = _fuse(topo.excl, Jsnd, hsnd, state.J, state.h)
            if check:
                _check_all("extrinsic beliefs", ext_c, ext_m)
        alpha = z2 - np.einsum("kmd,kd->km", A_s, ext_m) - b2
        if pred is not None:
            alpha = pred + _wrap(alpha - pred)
        gamma = psd_clip(base2 + A_s @ ext_c @ np.swapaxes(A_s, -1, -2), floor=GAMMA_FLOOR)
        it = 1 if state is None else state.iteration + 1
        state = _MessageState.build(alpha, A_r, gamma, it)
        if check:
            _check_all("messages", gamma, alpha, state.J, state.h)

    means, covs = _fuse(topo.into, Jp, hp, state.J, state.h)
    ext_m, ext_c = _fuse(topo.excl, Jsnd, hsnd, state.J, state.h)
    jm, jc = _joint_update(ext_m, ext_c, arrays, d)
    if check:
        _check_all("beliefs", covs, means)
        _check_all("joint beliefs", jc, jm)
    ij = list(zip(arrays.i.tolist(), arrays.j.tolist()))
    inbox = state.to_inbox(arrays) if build_inbox else {}
    return SweepResult(means, covs, jm, jc, ij, inbox, state)


def _joint_update(ext_m, ext_c, arrays: EdgeArrays, d: int):
    E = arrays.n_edges
    mu = np.concatenate([ext_m[:E], ext_m[E:]], axis=1)
    P = np.zeros((E, 2 * d, 2 * d))
    P[:, :d, :d] = ext_c[:E]
    P[:, d:, d:] = ext_c[E:]
    A = arrays.A
    innov = arrays.z - arrays.b - np.einsum("emk,ek->em", A, mu)
    if arrays.angular:
        innov = _wrap(innov)
    PAt = P @ np.swapaxes(A, -1, -2)
    S = symmetrize(A @ PAt + arrays.omega + arrays.R)
    K = np.swapaxes(np.linalg.solve(S, np.swapaxes(PAt, -1, -2)), -1, -2)
    mean = mu + np.einsum("ekm,em->ek", K, innov)
    cov = symmetrize(P - K @ np.swapaxes(PAt, -1, -2))
    return mean, cov
