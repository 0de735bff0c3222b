"""Block-coordinate descent for the sub-Gaussian diagonal-domain model.

One iteration = multiplicative updates of the nonnegative factors
(t -> v -> z -> g, each an exact minimizer of the Jensen/tangent
surrogate for its block), then per-row updates of every diagonalizer
Q_i, then a scale renormalization that leaves the objective unchanged.
Every sub-update is monotone: the objective never increases.

The Gaussian (beta = 2) algorithm is kept as a separate code path; at
beta = 2 the generic multiplicative rule degenerates to the familiar
square-root rule, which the tests use as a cross-check.
"""

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import linalg, model, objective
from .errors import NonFiniteError

# row projections are floored at this fraction of the frame scale inside
# the diagonalizer update; see _row_system
PROJ_FLOOR = 1e-8
# relative diagonal load on row-update systems; near-silent bins carry
# effectively rank-1 data, leaving the solve singular at machine
# precision along a direction the objective is flat in
DIAG_LOAD = 1e-14


def _phi(p2, chi, beta):
    """Contrast weights phi_ijm; reduces to |p|^2 at beta = 2."""
    y = (p2 / chi).sum(axis=2, keepdims=True)
    return p2 * y ** ((beta - 2.0) / 2.0)


@dataclass
class UpdateWorkspace:
    """Current-state quantities the update rules are built from.

    projections p_ijm = q_im^H x_ij, the gains chi, the contrast
    weights phi, and the row-update radii r (all I x J x M).
    """

    projections: np.ndarray
    chi: np.ndarray
    phi: np.ndarray
    r: np.ndarray


def workspace(state: model.SeparationState, X: np.ndarray) -> UpdateWorkspace:
    beta = state.hyper.beta
    p = model.projections(state, X)
    chi = model.mixture_gain(state)
    p2 = np.abs(p) ** 2
    s = (p2 / chi).sum(axis=2, keepdims=True)
    s_safe = np.where(s > 0, s, 1.0)
    pa = np.maximum(np.abs(p), PROJ_FLOOR * np.sqrt(s_safe * chi))
    r = pa ** (1.0 - 2.0 / beta) * chi ** (1.0 / beta) * s_safe ** (1.0 / beta - 0.5)
    r = np.where(s > 0, r, 1.0)
    return UpdateWorkspace(projections=p, chi=chi, phi=_phi(p2, chi, beta), r=r)


def _check_factor(name, factor):
    if not np.isfinite(factor).all():
        raise NonFiniteError(f"update factor for {name!r} contains NaN/Inf")


def update_tvzg(state: model.SeparationState, X: np.ndarray, on_phase=None):
    """One multiplicative sweep over t, v, z, g for general beta in (2, 4].

    Each factor is theta <- theta * (beta*num / (2*den))^{2/(beta+2)}
    with num/den the phi- and chi-weighted partner sums; chi and phi are
    recomputed before every family so each family sees the latest state.
    """
    beta = state.hyper.beta
    eps = state.hyper.floor_eps
    expo = 2.0 / (beta + 2.0)
    t, v, z = state.source.T, state.source.V, state.source.Z
    g = state.spatial.G
    p2 = np.abs(model.projections(state, X)) ** 2

    for name in ("t", "v", "z", "g"):
        chi = model.mixture_gain(state)
        a = _phi(p2, chi, beta) / chi**2
        b = 1.0 / chi
        if name == "t":
            w = np.einsum("kn,inm->ikm", z, g, optimize=True)
            num = np.einsum("ikm,kj,ijm->ik", w, v, a, optimize=True)
            den = np.einsum("ikm,kj,ijm->ik", w, v, b, optimize=True)
            arr = t
        elif name == "v":
            w = np.einsum("kn,inm->ikm", z, g, optimize=True)
            num = np.einsum("ik,ikm,ijm->kj", t, w, a, optimize=True)
            den = np.einsum("ik,ikm,ijm->kj", t, w, b, optimize=True)
            arr = v
        elif name == "z":
            ca = np.einsum("kj,ijm->ikm", v, a, optimize=True)
            cb = np.einsum("kj,ijm->ikm", v, b, optimize=True)
            num = np.einsum("ik,ikm,inm->kn", t, ca, g, optimize=True)
            den = np.einsum("ik,ikm,inm->kn", t, cb, g, optimize=True)
            arr = z
        else:
            sigma = model.compute_source_psd(state.source)
            num = np.einsum("ijn,ijm->inm", sigma, a, optimize=True)
            den = np.einsum("ijn,ijm->inm", sigma, b, optimize=True)
            arr = g
        factor = (beta * num / (2.0 * den)) ** expo
        _check_factor(name, factor)
        arr *= factor
        np.maximum(arr, eps, out=arr)
        if on_phase is not None:
            on_phase(name, state)
    return state


def update_tvzg_gaussian(state: model.SeparationState, X: np.ndarray, on_phase=None):
    """Gaussian sweep: theta <- theta * sqrt(num/den) with phi = |p|^2."""
    eps = state.hyper.floor_eps
    t, v, z = state.source.T, state.source.V, state.source.Z
    g = state.spatial.G
    p2 = np.abs(model.projections(state, X)) ** 2

    for name in ("t", "v", "z", "g"):
        chi = model.mixture_gain(state)
        a = p2 / chi**2
        b = 1.0 / chi
        if name == "t":
            w = np.einsum("kn,inm->ikm", z, g, optimize=True)
            num = np.einsum("ikm,kj,ijm->ik", w, v, a, optimize=True)
            den = np.einsum("ikm,kj,ijm->ik", w, v, b, optimize=True)
            arr = t
        elif name == "v":
            w = np.einsum("kn,inm->ikm", z, g, optimize=True)
            num = np.einsum("ik,ikm,ijm->kj", t, w, a, optimize=True)
            den = np.einsum("ik,ikm,ijm->kj", t, w, b, optimize=True)
            arr = v
        elif name == "z":
            ca = np.einsum("kj,ijm->ikm", v, a, optimize=True)
            cb = np.einsum("kj,ijm->ikm", v, b, optimize=True)
            num = np.einsum("ik,ikm,inm->kn", t, ca, g, optimize=True)
            den = np.einsum("ik,ikm,inm->kn", t, cb, g, optimize=True)
            arr = z
        else:
            sigma = model.compute_source_psd(state.source)
            num = np.einsum("ijn,ijm->inm", sigma, a, optimize=True)
            den = np.einsum("ijn,ijm->inm", sigma, b, optimize=True)
            arr = g
        factor = np.sqrt(num / den)
        _check_factor(name, factor)
        arr *= factor
        np.maximum(arr, eps, out=arr)
        if on_phase is not None:
            on_phase(name, state)
    return state


# ---------------------------------------------------------------------------
# diagonalizer updates


def _row_system(Xa, chi, Qa, m, beta):
    """Per-bin quantities for the sub-Gaussian update of row m.

    Returns (r, U, B) with shapes (B, J), (B, M, M), (B, M, M); the new
    row solves (Q B)^{-1} e_m.  Frames with zero energy are masked out
    of all sums (they contribute nothing to the objective).

    |p_m| is floored at a small fraction of the frame scale
    sqrt(s * chi): a frame whose row-m projection rounds to exactly zero
    otherwise degenerates the auxiliary r, and the blown-up weights drop
    out of the solve (multiplied by |p_m|^2 = 0) while still dominating
    the ray scale, which collapses the solved row and lifts the
    determinant term of the objective.  The floor keeps both sides
    consistent; the tangency slack it introduces is second order in the
    floor, far below the descent tolerance.
    """
    p = np.einsum("imc,ijc->ijm", Qa, Xa, optimize=True)
    pa = np.abs(p)
    s = (pa**2 / chi).sum(axis=2)
    mask = s > 0
    s_safe = np.where(mask, s, 1.0)
    cm = chi[:, :, m]
    pm = np.maximum(pa[:, :, m], PROJ_FLOOR * np.sqrt(s_safe * cm))
    r = pm ** (1.0 - 2.0 / beta) * cm ** (1.0 / beta) * s_safe ** (
        1.0 / beta - 0.5
    )
    r = np.where(mask, r, 1.0)
    rb = r**beta
    w1 = np.where(mask, 1.0 / np.sqrt(pm ** (4.0 - beta) * rb), 0.0)
    w2 = np.where(mask, pm ** (beta - 2.0) / rb, 0.0)
    xc = Xa.conj()
    u = np.einsum("ij,ija,ijb->iab", w1, Xa, xc, optimize=True)
    q = Qa[:, m, :].conj()
    uq = np.einsum("iab,ib->ia", u, q, optimize=True)
    quq = np.einsum("ia,ia->i", q.conj(), uq, optimize=True).real
    b = (
        quq[:, None, None] * u
        + np.einsum("ij,ija,ijb->iab", w2, Xa, xc, optimize=True)
        - uq[:, :, None] * uq.conj()[:, None, :]
    )
    return r, u, b


def row_update_terms(state: model.SeparationState, X: np.ndarray, row: int):
    """Expose (r, U, B) for one diagonalizer row at the current state."""
    chi = model.mixture_gain(state)
    r, u, b = _row_system(X, chi, state.spatial.Q, row, state.hyper.beta)
    return {"r": r, "U": u, "B": b}


def _active_bins(X):
    return np.flatnonzero(np.abs(X).max(axis=(1, 2)) > 0)


def _blocks(n, workers):
    workers = max(1, min(workers, n))
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def update_q_subgaussian(
    state: model.SeparationState,
    X: np.ndarray,
    workers: int = 1,
    collect=None,
    on_phase=None,
):
    """Row-wise diagonalizer update for beta in (2, 4].

    Each row m is re-solved from (Q_i B_im)^{-1} e_m and then rescaled
    along its ray so that sum_j |q^H x_j|^beta / r_j^beta = 2J/beta,
    which is the exact minimizer of the row surrogate.  Bins with no
    energy are left untouched.  `collect['post_scale_sum']` receives the
    recomputed post-scale sums, `collect['active']` the updated bins.
    """
    beta = state.hyper.beta
    n_bins, n_frames, n_ch = X.shape
    chi = model.mixture_gain(state)
    q_all = state.spatial.Q
    active = _active_bins(X)
    if collect is not None:
        collect["post_scale_sum"] = np.full((n_bins, n_ch), np.nan)
        collect["active"] = active
    if active.size == 0:
        return state

    ident = np.eye(n_ch)

    def one_row(m, lo, hi):
        sel = active[lo:hi]
        xa = X[sel]
        r, _, b = _row_system(xa, chi[sel], q_all[sel], m, beta)
        # the ray-scale step below is invariant to positive rescaling of
        # the solve direction, so normalizing B per bin costs nothing and
        # keeps the systems within floating-point range
        bmax = np.abs(b).reshape(sel.size, -1).max(axis=1)
        bn = b / bmax[:, None, None] + DIAG_LOAD * np.eye(n_ch)
        qb = q_all[sel] @ bn
        qnew = linalg.solve(qb, np.broadcast_to(ident[m], (sel.size, n_ch)))
        pnew = np.einsum("ic,ijc->ij", qnew.conj(), xa, optimize=True)
        rb = r**beta
        ssum = (np.abs(pnew) ** beta / rb).sum(axis=1)
        scale = (2.0 * n_frames / (beta * ssum)) ** (1.0 / beta)
        if not np.isfinite(scale).all():
            raise NonFiniteError("diagonalizer row scale is NaN/Inf")
        qnew = qnew * scale[:, None]
        q_all[sel, m, :] = qnew.conj()
        if collect is not None:
            post = np.einsum("ic,ijc->ij", qnew.conj(), xa, optimize=True)
            collect["post_scale_sum"][sel, m] = (np.abs(post) ** beta / rb).sum(axis=1)

    if workers > 1 and active.size > 1:
        blocks = _blocks(active.size, workers)
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            for m in range(n_ch):
                futs = [pool.submit(one_row, m, lo, hi) for lo, hi in blocks]
                for f in futs:
                    f.result()
                if on_phase is not None:
                    on_phase(f"q_row_{m}", state)
    else:
        for m in range(n_ch):
            one_row(m, 0, active.size)
            if on_phase is not None:
                on_phase(f"q_row_{m}", state)
    return state


def update_q_gaussian(
    state: model.SeparationState, X: np.ndarray, workers: int = 1, on_phase=None
):
    """Standard iterative-projection row update for the Gaussian model."""
    n_bins, n_frames, n_ch = X.shape
    chi = model.mixture_gain(state)
    q_all = state.spatial.Q
    active = _active_bins(X)
    if active.size == 0:
        return state

    ident = np.eye(n_ch)

    def one_row(m, lo, hi):
        sel = active[lo:hi]
        xa = X[sel]
        w = 1.0 / chi[sel, :, m]
        u = np.einsum("ij,ija,ijb->iab", w, xa, xa.conj(), optimize=True) / n_frames
        # solve against a per-bin-normalized, lightly loaded copy for
        # conditioning; the q^H U q normalization below uses the true U
        umax = np.abs(u).reshape(sel.size, -1).max(axis=1)
        un = u / umax[:, None, None] + DIAG_LOAD * np.eye(n_ch)
        qu = q_all[sel] @ un
        qnew = linalg.solve(qu, np.broadcast_to(ident[m], (sel.size, n_ch)))
        quq = np.einsum(
            "ia,iab,ib->i", qnew.conj(), u, qnew, optimize=True
        ).real
        if (quq <= 0).any() or not np.isfinite(quq).all():
            raise NonFiniteError("iterative projection normalizer is not positive")
        qnew = qnew / np.sqrt(quq)[:, None]
        q_all[sel, m, :] = qnew.conj()

    if workers > 1 and active.size > 1:
        blocks = _blocks(active.size, workers)
        with ThreadPoolExecutor(max_workers=len(blocks)) as pool:
            for m in range(n_ch):
                futs = [pool.submit(one_row, m, lo, hi) for lo, hi in blocks]
                for f in futs:
                    f.result()
                if on_phase is not None:
                    on_phase(f"q_row_{m}", state)
    else:
        for m in range(n_ch):
            one_row(m, 0, active.size)
            if on_phase is not None:
                on_phase(f"q_row_{m}", state)
    return state


# ---------------------------------------------------------------------------


def normalize_and_rescale(state: model.SeparationState):
    """Push scale ambiguities into canonical positions; chi is unchanged.

    Per source: divide g by its grand mean over (bin, channel) and fold
    the factor into z.  Per basis: divide t by its column sum and fold
    the factor into v.  Both moves leave every product t*v*z*g intact.
    """
    t, v, z = state.source.T, state.source.V, state.source.Z
    g = state.spatial.G
    c_n = g.mean(axis=(0, 2))
    if not np.isfinite(c_n).all() or (c_n <= 0).any():
        raise NonFiniteError("degenerate gain normalization")
    g /= c_n[None, :, None]
    z *= c_n[None, :]
    d_k = t.sum(axis=0)
    t /= d_k[None, :]
    v *= d_k[:, None]
    state.floor()
    return state


@dataclass
class IterationReport:
    iteration: int
    cost_before: float
    cost_after: float
    phase_ms: dict


def run(
    state: model.SeparationState,
    X: np.ndarray,
    hyper: model.Hyperparams = None,
    workers: int = 1,
    on_subupdate=None,
    on_iteration=None,
):
    """Run the configured iteration count; returns (state, trace).

    `hyper` overrides state.hyper when given.  on_subupdate(name, state)
    fires after every sub-update ('t', 'v', 'z', 'g', 'q_row_<m>',
    'normalize'); on_iteration(report) after each full iteration.
    `workers` only splits the frequency axis, so results are independent
    of the worker count.
    """
    if hyper is not None:
        state.hyper = hyper
        state.validate()
    trace = objective.CostTrace()
    gaussian = state.hyper.algorithm == "gaussian"
    iters = state.hyper.iterations
    cost_before = objective.current_cost(state, X) if iters > 0 else None
    for it in range(1, iters + 1):
        phase_ms = {}
        t0 = time.perf_counter()
        if gaussian:
            update_tvzg_gaussian(state, X, on_phase=on_subupdate)
        else:
            update_tvzg(state, X, on_phase=on_subupdate)
        t1 = time.perf_counter()
        phase_ms["tvzg"] = (t1 - t0) * 1000.0
        if gaussian:
            update_q_gaussian(state, X, workers=workers, on_phase=on_subupdate)
        else:
            update_q_subgaussian(state, X, workers=workers, on_phase=on_subupdate)
        t2 = time.perf_counter()
        phase_ms["q"] = (t2 - t1) * 1000.0
        normalize_and_rescale(state)
        if on_subupdate is not None:
            on_subupdate("normalize", state)
        t3 = time.perf_counter()
        phase_ms["normalize"] = (t3 - t2) * 1000.0
        cost = objective.current_cost(state, X)
        ms = (time.perf_counter() - t0) * 1000.0
        trace.append(it, cost, ms)
        if on_iteration is not None:
            on_iteration(IterationReport(it, cost_before, cost, phase_ms))
        cost_before = cost
    return state, trace
