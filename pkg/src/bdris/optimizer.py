"""Joint precoder / scattering-matrix optimization for multi-user MISO sum-rate.

The outer loop alternates a weighted-MMSE precoder step with a projected
gradient ascent on the scattering blocks.  Both steps are monotone, so the
recorded rate trajectory never decreases.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import ChannelRealization, SceneConfig
from .scattering import (
    Architecture,
    RankDeficientError,
    RisConfig,
    ScatteringState,
    UnsupportedArchitectureError,
    check_feasible,
    gather_blocks,
    polar_factor,
    random_feasible,
    scatter_blocks,
    transfer_state,
)

LN2 = math.log(2.0)


class BisectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class OptimizerParams:
    max_outer_iterations: int = 200
    rel_tolerance: float = 1e-4
    initial_step: float = 1.0
    shrink: float = 0.5
    sufficient_increase: float = 1e-4
    inner_steps: int = 10
    max_backtracks: int = 40

    def __post_init__(self):
        if self.max_outer_iterations < 1 or self.inner_steps < 1 or self.max_backtracks < 1:
            raise ValueError("iteration counts must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink factor must lie in (0, 1)")
        if self.rel_tolerance <= 0 or self.initial_step <= 0 or self.sufficient_increase <= 0:
            raise ValueError("tolerances and step parameters must be positive")


@dataclass
class SolveResult:
    rate_trajectory: list[float]
    final_state: ScatteringState
    final_precoder: np.ndarray
    iterations_used: int

    @property
    def rate(self) -> float:
        return self.rate_trajectory[-1]


# --------------------------------------------------------------------------
# rate evaluation on raw blocks

def effective_channels(ch: ChannelRealization, phi: np.ndarray) -> np.ndarray:
    """Rows ``a_k^H = h_k^H Phi_{l_k} G``, shape ``(K, N)``."""
    X = phi @ ch.G  # (L, Ms, N)
    return np.einsum("km,kmn->kn", ch.h.conj(), X[ch.sector_of_user])


def _user_rates(A: np.ndarray, W: np.ndarray, noise: float) -> np.ndarray:
    P = np.abs(A @ W) ** 2
    sig = np.diagonal(P)
    interf = P.sum(axis=1) - sig + noise
    return np.log2(1 + sig / interf)


class _Objective:
    """Sum-rate as a function of the stacked blocks for a fixed channel and precoder."""

    def __init__(self, ch: ChannelRealization, state: ScatteringState, W: np.ndarray):
        self.ch, self.W = ch, W
        self.cfg = state.config
        self.perm, self.pairing = state.cell_permutation, state.pairing
        self.B = ch.G @ W  # incident field per stream, (Ms, K)
        self.users_of = [np.flatnonzero(ch.sector_of_user == l) for l in range(self.cfg.L)]

    def phi(self, blocks):
        return scatter_blocks(self.cfg, blocks, self.perm, self.pairing)

    def value(self, blocks) -> float:
        A = effective_channels(self.ch, self.phi(blocks))
        return float(_user_rates(A, self.W, self.ch.noise_power).sum())

    def gradient(self, blocks) -> np.ndarray:
        """Derivative with respect to the conjugate blocks (steepest-ascent direction)."""
        ch, B = self.ch, self.B
        phi = self.phi(blocks)
        A = effective_channels(ch, phi)
        S = A @ self.W
        P = np.abs(S) ** 2
        total = P.sum(axis=1) + ch.noise_power
        interf = total - np.diagonal(P)
        alpha = S / total[:, None] - S / interf[:, None]
        np.fill_diagonal(alpha, np.diagonal(S) / total)
        alpha /= LN2
        D = np.zeros_like(phi)
        BH = B.conj().T
        for l, users in enumerate(self.users_of):
            if users.size:
                D[l] = ch.h[users].T @ (alpha[users] @ BH)
        return gather_blocks(self.cfg, D, self.perm, self.pairing)


def sum_rate(ch: ChannelRealization, state: ScatteringState, W: np.ndarray) -> float:
    check_feasible(state, 1e-6)
    A = effective_channels(ch, scatter_blocks(state.config, state.blocks, state.cell_permutation, state.pairing))
    return float(_user_rates(A, np.asarray(W), ch.noise_power).sum())


def received_powers(ch: ChannelRealization, state: ScatteringState, W: np.ndarray) -> np.ndarray:
    """Desired-signal power ``|a_k^H w_k|^2`` of every user."""
    A = effective_channels(ch, scatter_blocks(state.config, state.blocks, state.cell_permutation, state.pairing))
    return np.abs(np.diagonal(A @ W)) ** 2


# --------------------------------------------------------------------------
# precoder

def matched_filter(A: np.ndarray, P: float) -> np.ndarray:
    """Equal-power matched filters ``sqrt(P/K) a_k / ||a_k||``."""
    K = A.shape[0]
    a = A.conj().T  # columns a_k
    norms = np.linalg.norm(a, axis=0)
    W = np.zeros_like(a)
    nz = norms > 0
    W[:, nz] = math.sqrt(P / K) * a[:, nz] / norms[nz]
    return W


def _scale_to_power(W, P):
    p = float(np.sum(np.abs(W) ** 2))
    return W * math.sqrt(P / p) if p > 0 else W


def wmmse_step(A: np.ndarray, W: np.ndarray, P: float, noise: float) -> np.ndarray:
    """One weighted-MMSE update of the precoder for fixed effective channels ``A``."""
    N, K = W.shape
    if P == 0:
        return np.zeros_like(W)
    S = A @ W
    total = np.sum(np.abs(S) ** 2, axis=1) + noise
    s = np.diagonal(S)
    u = s.conj() / total
    e = 1 - np.abs(s) ** 2 / total
    w = 1 / np.maximum(e, 1e-300)

    c = w * np.abs(u) ** 2
    Bm = (A.conj().T * c) @ A  # sum_k c_k a_k a_k^H
    Bm = (Bm + Bm.conj().T) / 2
    R = A.conj().T * (w * u.conj())  # columns w_k u_k^* a_k
    if not np.any(R):
        return W.copy()
    lam, Q = np.linalg.eigh(Bm)
    lam = np.maximum(lam, 0.0)
    QR = Q.conj().T @ R
    row_energy = np.sum(np.abs(QR) ** 2, axis=1)
    keep = lam > 1e-12 * max(lam[-1], 1e-300)

    def power(mu):
        return float(np.sum(row_energy[keep] / (lam[keep] + mu) ** 2))

    def solution(mu):
        d = np.zeros_like(lam)
        d[keep] = 1 / (lam[keep] + mu)
        return Q @ (d[:, None] * QR)

    if power(0.0) <= P:
        return _scale_to_power(solution(0.0), P)

    hi = max(float(lam[-1]), 1e-300) * 1e-6
    for _ in range(200):
        if power(hi) <= P:
            break
        hi *= 2
    else:
        raise BisectionError("could not bracket the power-constraint multiplier")
    lo = 0.0
    while hi - lo > 1e-10 * hi:
        mid = (lo + hi) / 2
        if power(mid) > P:
            lo = mid
        else:
            hi = mid
    return _scale_to_power(solution(hi), P)


def precoder_update(ch: ChannelRealization, state: ScatteringState, W: np.ndarray,
                    P: float, noise: float | None = None) -> np.ndarray:
    noise = ch.noise_power if noise is None else noise
    check_feasible(state)
    phi = scatter_blocks(state.config, state.blocks, state.cell_permutation, state.pairing)
    A = effective_channels(ch, phi)
    return _precoder_step(A, np.asarray(W, dtype=complex), P, noise)


def _precoder_step(A, W, P, noise):
    new = wmmse_step(A, W, P, noise)
    # the true WMMSE step is monotone; this only guards the bisection tolerance
    if _user_rates(A, new, noise).sum() < _user_rates(A, W, noise).sum():
        return W
    return new


# --------------------------------------------------------------------------
# scattering blocks

def _ascend(obj: _Objective, blocks: np.ndarray, params: OptimizerParams, value=None):
    f = obj.value(blocks) if value is None else value
    radius = math.sqrt(float(np.sum(np.abs(blocks) ** 2)))
    rho = params.initial_step
    for _ in range(params.inner_steps):
        g = obj.gradient(blocks)
        gnorm = math.sqrt(float(np.sum(np.abs(g) ** 2)))
        if not gnorm > 1e-14 * max(abs(f), 1.0):
            break
        accepted = False
        for _ in range(params.max_backtracks):
            step = rho * radius / gnorm
            try:
                trial = polar_factor(blocks + step * g)
            except RankDeficientError:
                rho *= params.shrink
                continue
            ft = obj.value(trial)
            gain = float(np.real(np.vdot(g, trial - blocks)))
            if ft > f and ft - f >= params.sufficient_increase * gain:
                accepted = True
                break
            rho *= params.shrink
        if not accepted:
            break
        blocks, f = trial, ft
        rho = min(rho / params.shrink, params.initial_step)
    return blocks, f


def ris_update(ch: ChannelRealization, state: ScatteringState, W: np.ndarray,
               params: OptimizerParams | None = None) -> ScatteringState:
    params = params or OptimizerParams()
    check_feasible(state)
    obj = _Objective(ch, state, np.asarray(W, dtype=complex))
    f0 = obj.value(state.blocks)
    blocks, f = _ascend(obj, state.blocks, params, f0)
    if not f > f0:
        return state
    return replace(state, blocks=blocks)


# --------------------------------------------------------------------------
# combinatorial helpers

def equal_partitions(n: int, size: int):
    """All partitions of ``range(n)`` into groups of ``size``, as flat orders.

    Each group is sorted and groups are ordered by their first element, so
    the identity order comes first.
    """
    def rec(items):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for mates in itertools.combinations(rest, size - 1):
            remaining = tuple(x for x in rest if x not in mates)
            for tail in rec(remaining):
                yield (first, *mates) + tail
    if n % size:
        raise ValueError("group size must divide the number of cells")
    for order in rec(tuple(range(n))):
        yield np.array(order)


def _grouping_terms(ch: ChannelRealization, W: np.ndarray):
    """Per-user, per-cell departure and incident amplitudes, each ``(K, cells)``."""
    B = ch.G @ W  # (Ms, K)
    return np.abs(ch.h), np.abs(B.T)


def grouping_score(ch: ChannelRealization, W: np.ndarray, order: np.ndarray, group_cells: int) -> float:
    """Sum over users and groups of ``||h_k[g]|| ||b_k[g]||``.

    This bounds the desired-signal amplitude each group can deliver to a user
    once its block is free to rotate the incident field onto the departure
    channel.
    """
    hh, bb = _grouping_terms(ch, W)
    groups = np.asarray(order).reshape(-1, group_cells)
    return float(np.sum(np.sqrt(np.sum(hh[:, groups] ** 2, -1) * np.sum(bb[:, groups] ** 2, -1))))


def select_grouping(ch: ChannelRealization, config: RisConfig, W: np.ndarray, method: str = "greedy",
                    scene: SceneConfig | None = None, params: OptimizerParams | None = None,
                    seed=0, refinements: int = 4, P: float | None = None) -> np.ndarray:
    """Choose the cell permutation of a dynamically group-connected surface.

    ``greedy`` visits cells by decreasing composite energy; every group is
    seeded with the strongest unassigned cell and grown one cell at a time
    with the cell that raises :func:`grouping_score` the most.  The incident
    field in that score depends on the precoder, so the partition and the
    precoder are refined alternately (``refinements`` rounds, coherent
    blocks plus a few WMMSE steps) and the best partition by rate is kept.
    ``exhaustive``
    runs a full :func:`solve` for every equal partition (practical up to
    about 8 cells) and keeps the best; ties go to the earliest partition.
    """
    if config.architecture is not Architecture.DYNAMIC_GROUP:
        raise UnsupportedArchitectureError("grouping is only selected for dynamic_group")
    W = np.asarray(W, dtype=complex)
    K = config.group_cells
    if P is None:
        P = float(np.sum(np.abs(W) ** 2))
    if method == "exhaustive":
        if scene is None:
            raise ValueError("exhaustive grouping needs the scene")
        best, best_rate = None, -math.inf
        init = random_feasible(config, seed)
        for order in equal_partitions(config.cells, K):
            start = replace(init, cell_permutation=order)
            res = solve(ch, config, scene, params, seed, init_state=start, init_precoder=W)
            if res.rate > best_rate:
                best, best_rate = order, res.rate
        return best
    if method != "greedy":
        raise ValueError(f"unknown grouping method {method!r}")

    best, best_rate = None, -math.inf
    for _ in range(refinements):
        order = _greedy_order(ch, W, K)
        blocks = coherent_blocks(ch, config, order, W)
        A = effective_channels(ch, scatter_blocks(config, blocks, order))
        W = matched_filter(A, P)
        for _ in range(3):
            W = _precoder_step(A, W, P, ch.noise_power)
        rate = float(_user_rates(A, W, ch.noise_power).sum())
        if best is not None and np.array_equal(order, best):
            break
        if rate > best_rate:
            best, best_rate = order, rate
    return best


def _greedy_order(ch, W, K):
    hh, bb = _grouping_terms(ch, W)
    energy = np.sum(hh * bb, axis=0)
    ranked = list(np.argsort(-energy, kind="stable"))
    h2, b2 = hh ** 2, bb ** 2
    order = []
    while ranked:
        group = [ranked.pop(0)]
        hs, bs = h2[:, group[0]].copy(), b2[:, group[0]].copy()
        while len(group) < K:
            cand = np.array(ranked)
            score = np.sum(np.sqrt((hs[:, None] + h2[:, cand]) * (bs[:, None] + b2[:, cand])), axis=0)
            pick = int(cand[np.argmax(score)])  # first maximum keeps the lower rank on ties
            ranked.remove(pick)
            group.append(pick)
            hs += h2[:, pick]
            bs += b2[:, pick]
        order.extend(sorted(group))
    groups = _swap_search(np.array(order).reshape(-1, K), h2, b2)
    groups = sorted(sorted(g) for g in groups.tolist())
    return np.array([c for g in groups for c in g])


def _swap_search(groups, h2, b2, max_passes=20):
    """Exchange cells between groups while the grouping score improves."""
    groups = groups.copy()
    G = groups.shape[0]

    def group_score(cells):
        return np.sum(np.sqrt(h2[:, cells].sum(-1) * b2[:, cells].sum(-1)))

    for _ in range(max_passes):
        improved = False
        for g1 in range(G):
            for g2 in range(g1 + 1, G):
                base = group_score(groups[g1]) + group_score(groups[g2])
                for a in range(groups.shape[1]):
                    for b in range(groups.shape[1]):
                        x, y = groups[g1].copy(), groups[g2].copy()
                        x[a], y[b] = y[b], x[a]
                        if group_score(x) + group_score(y) > base * (1 + 1e-12):
                            groups[g1], groups[g2] = x, y
                            base = group_score(x) + group_score(y)
                            improved = True
        if not improved:
            break
    return groups


def coherent_blocks(ch: ChannelRealization, config: RisConfig, order, W: np.ndarray) -> np.ndarray:
    """Per-group blocks that co-phase every user's incident field onto its departure channel.

    Block ``g`` is the polar factor of ``sum_k h_k[g] b_k[g]^H`` placed in the
    row slab of user ``k``'s sector; for one user this attains
    ``||h[g]|| ||b[g]||`` in every group.
    """
    L, Kc = config.L, config.group_cells
    groups = np.asarray(order).reshape(-1, Kc)
    B = ch.G @ W
    C = np.zeros(config.block_shape, dtype=complex)
    for k, l in enumerate(ch.sector_of_user):
        C[:, l * Kc:(l + 1) * Kc, :] += ch.h[k][groups][:, :, None] * B[groups, k].conj()[:, None, :]
    u, _, vh = np.linalg.svd(C, full_matrices=False)
    return u @ vh


def _incident_single_user(ch: ChannelRealization) -> np.ndarray:
    """Incident field per element for the best transmit direction of a rank-one ``G``."""
    if ch.G.shape[1] == 1:
        return ch.G[:, 0]
    _, s, vh = np.linalg.svd(ch.G, full_matrices=False)
    return ch.G @ vh[0].conj()


def _lexicographic_ties(sigma, key_from, key_to):
    """Among optimal rank matchings, prefer the lexicographically smallest."""
    sigma = sigma.copy()
    for vals in np.unique(key_from):
        src = np.flatnonzero(key_from == vals)
        sigma[src] = np.sort(sigma[src])
    inv = np.argsort(sigma)
    for vals in np.unique(key_to):
        dst = np.flatnonzero(key_to == vals)
        srcs = np.sort(inv[dst])
        sigma[srcs] = np.sort(dst)
    return sigma


def pair_antennas(ch: ChannelRealization, config: RisConfig):
    """Route the i-th strongest incident element to the i-th strongest departure element.

    Returns ``(sigma, theta)`` with ``Phi[sigma[i], i] = exp(1j * theta[i])``;
    the phases co-phase every routed contribution, so the received amplitude
    is ``sum_i |h[sigma[i]]| |g[i]|``, the rearrangement maximum.
    """
    if config.architecture is not Architecture.NON_DIAGONAL:
        raise UnsupportedArchitectureError("pairing applies to the non-diagonal architecture")
    if ch.n_users != 1:
        raise UnsupportedArchitectureError("non-diagonal pairing is only defined for a single user")
    g = _incident_single_user(ch)
    h = ch.h[0]
    ag, ah = np.abs(g), np.abs(h)
    og = np.argsort(-ag, kind="stable")
    oh = np.argsort(-ah, kind="stable")
    sigma = np.empty(config.M, dtype=int)
    sigma[og] = oh
    sigma = _lexicographic_ties(sigma, ag, ah)
    theta = np.angle(h[sigma]) - np.angle(g)
    return sigma, np.mod(theta, 2 * math.pi)


# --------------------------------------------------------------------------
# closed-form single-user oracles

def alignment_power(h: np.ndarray, G: np.ndarray, P: float) -> float:
    """Best received power of a single-connected reflective surface when ``G`` has rank one."""
    G = np.asarray(G)
    if G.ndim == 1:
        G = G[:, None]
    return P * float(np.sum(np.abs(h) * np.linalg.norm(G, axis=1))) ** 2


def matched_rotation_power(h: np.ndarray, G: np.ndarray, P: float) -> float:
    """Best received power of a fully-connected reflective surface: ``P ||h||^2 sigma_max(G)^2``."""
    G = np.asarray(G)
    smax = np.linalg.norm(G) if G.ndim == 1 else np.linalg.norm(G, 2)
    return P * float(np.linalg.norm(h)) ** 2 * float(smax) ** 2


# --------------------------------------------------------------------------
# orchestration

def solve(ch: ChannelRealization, config: RisConfig, scene: SceneConfig,
          params: OptimizerParams | None = None, rng=None,
          init_state: ScatteringState | None = None, init_precoder: np.ndarray | None = None) -> SolveResult:
    """Alternate precoder and scattering updates until the rate stalls.

    ``init_state`` may belong to another architecture of the same surface;
    it is carried into ``config``'s feasible set with :func:`transfer_state`.
    """
    params = params or OptimizerParams()
    rng = np.random.default_rng(rng)
    scene.check_compatible(config)
    P, noise = scene.tx_power, ch.noise_power

    if init_state is None:
        state = random_feasible(config, rng)
    elif init_state.config == config:
        state = init_state
    else:
        state = transfer_state(init_state, config)

    if config.architecture is Architecture.NON_DIAGONAL and init_state is None:
        sigma, theta = pair_antennas(ch, config)
        state = ScatteringState(config, np.exp(1j * theta)[:, None, None], pairing=sigma)

    def channels(st):
        return effective_channels(ch, scatter_blocks(config, st.blocks, st.cell_permutation, st.pairing))

    W = matched_filter(channels(state), P) if init_precoder is None else np.asarray(init_precoder, dtype=complex)

    if config.architecture is Architecture.DYNAMIC_GROUP and (init_state is None or init_state.cell_permutation is None):
        state = replace(state, cell_permutation=select_grouping(ch, config, W, P=P))
        if init_precoder is None:
            W = matched_filter(channels(state), P)

    check_feasible(state)
    rate = float(_user_rates(channels(state), W, noise).sum())
    trajectory = [rate]
    used = 0
    for used in range(1, params.max_outer_iterations + 1):
        W = _precoder_step(channels(state), W, P, noise)
        obj = _Objective(ch, state, W)
        f_w = obj.value(state.blocks)
        blocks, f = _ascend(obj, state.blocks, params, f_w)
        if f > f_w:
            state = replace(state, blocks=blocks)
        new = max(f, f_w)
        trajectory.append(new)
        if abs(new - rate) <= params.rel_tolerance * abs(rate):
            break
        rate = new
    return SolveResult(trajectory, state, W, used)


def solve_nested(ch: ChannelRealization, configs: list[RisConfig], scene: SceneConfig,
                 params: OptimizerParams | None = None, rng=None) -> list[SolveResult]:
    """Solve a chain of nested feasible sets, poorest first.

    Each run starts from the previous solution, which is feasible for the
    richer set, so the final rates are non-decreasing along the chain.
    """
    rng = np.random.default_rng(rng)
    out = []
    prev = None
    for cfg in configs:
        if prev is None:
            res = solve(ch, cfg, scene, params, rng)
        else:
            res = solve(ch, cfg, scene, params, rng, init_state=prev.final_state, init_precoder=prev.final_precoder)
        out.append(res)
        prev = res
    return out
