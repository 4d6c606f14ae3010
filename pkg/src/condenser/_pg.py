"""Projected-gradient engine for the convex quadratics used across the package.

Minimizes  q(w) = w' A w + 2 b' w  over a product of capped simplexes
{0 <= w <= cap, sum w = total} (one block per plate).

The driver takes Barzilai-Borwein spectral steps in short bursts and accepts
the best point of each burst only if it does not increase the objective;
otherwise it backtracks to an exact-line-search descent step (which cannot
fail off the optimum).  Accepted iterates therefore form a non-increasing
objective trace while keeping the spectral behavior BB needs -- per-step
monotone acceptance measurably stalls on these kernel matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError


def project_capped_simplex(w, caps, total):
    """Euclidean projection of w onto {0 <= v <= caps, sum v = total}.

    Water-filling: v_i = clip(w_i - tau, 0, caps_i) with tau located exactly
    by bisection over the sorted breakpoints of the piecewise-linear,
    nonincreasing mass function sum_i v_i(tau).
    """
    w = np.asarray(w, dtype=float)
    caps = np.broadcast_to(np.asarray(caps, dtype=float), w.shape)
    if np.any(caps < 0):
        raise ValueError("caps must be >= 0")
    total = float(total)
    if total < 0:
        raise ValueError("total must be >= 0")
    cap_sum = float(caps.sum())  # inf-safe
    if cap_sum < total:
        raise InfeasibleError(
            f"cap total {cap_sum:.6g} is below the prescribed mass {total:.6g}")
    if total == 0.0:
        return np.zeros_like(w)

    finite = np.isfinite(caps)
    lower = w[finite] - caps[finite]
    bps = np.unique(np.concatenate([w, lower]))

    def mass(tau):
        return float(np.minimum(np.maximum(w - tau, 0.0), caps).sum())

    def solve_segment(tm):
        # regimes are constant on the open interval containing tm
        act = w - tm > 0
        sat = finite & (w - tm >= caps)
        free = act & ~sat
        nf = int(free.sum())
        if nf == 0:
            return None
        return (w[free].sum() + caps[sat].sum() - total) / nf, free

    if mass(bps[0]) < total:
        # tau* below every breakpoint: all finite-cap nodes saturated
        got = solve_segment(bps[0] - max(1.0, abs(bps[0])))
        if got is None:
            # no free nodes below every breakpoint: caps are all finite and
            # saturated, which realizes the total exactly (Sigma caps = total)
            return caps.astype(float).copy()
        tau = got[0]
    else:
        lo_i, hi_i = 0, len(bps) - 1
        while hi_i - lo_i > 1:
            mid = (lo_i + hi_i) // 2
            if mass(bps[mid]) >= total:
                lo_i = mid
            else:
                hi_i = mid
        got = solve_segment(0.5 * (bps[lo_i] + bps[hi_i]))
        if got is None:
            # mass is constant on the segment; either endpoint attains it
            tau = bps[lo_i] if abs(mass(bps[lo_i]) - total) <= \
                abs(mass(bps[hi_i]) - total) else bps[hi_i]
        else:
            tau = got[0]
    v = np.minimum(np.maximum(w - tau, 0.0), caps)
    # exact mass repair over the strictly free nodes kills roundoff drift
    freev = (v > 0) & (v < caps)
    nf = int(freev.sum())
    if nf:
        v[freev] += (total - v.sum()) / nf
        np.clip(v, 0.0, caps, out=v)
    return v


@dataclass
class PGResult:
    w: np.ndarray
    objective: float
    converged: bool
    iterations: int
    kkt_residual: float
    constants: np.ndarray          # per-plate multiplier estimates c_j
    trace: np.ndarray              # columns: iter, objective, step, kkt_residual
    active_at_cap: list
    active_at_zero: list
    matvecs: int = 0


def block_constants_and_kkt(W, w, caps, slices, totals, free_margin_rel):
    """Per-plate multiplier estimate c_j and the normalized KKT violation.

    W is the weighted potential at every node (half the gradient of q).
    c_j: median of W over strictly free nodes; with no free nodes, the
    midpoint between max W over carried and min W over below-cap nodes.
    """
    consts = np.zeros(len(slices))
    viol = 0.0
    for j, sl in enumerate(slices):
        Wj = W[sl]
        wj = w[sl]
        cj = caps[sl]
        margin = free_margin_rel * totals[j]
        carried = wj > margin
        below = wj < cj - margin
        free = carried & below
        if np.any(free):
            c = float(np.median(Wj[free]))
        else:
            hi = float(Wj[carried].max()) if np.any(carried) else 0.0
            lo = float(Wj[below].min()) if np.any(below) else hi
            c = 0.5 * (hi + lo)
        consts[j] = c
        scale = max(1.0, abs(c))
        v = 0.0
        if np.any(below):
            v = max(v, float((c - Wj[below]).max()))
        if np.any(carried):
            v = max(v, float((Wj[carried] - c).max()))
        viol = max(viol, v / scale)
    return consts, viol


def minimize_quadratic(A, b, slices, totals, caps, *, tol_kkt=1e-6,
                       tol_obj=1e-10, patience=20, max_iters=50_000,
                       free_margin_rel=1e-8, seed=None, record_trace=True,
                       burst=48):
    """Projected-gradient/BB minimization of w'Aw + 2b'w over per-plate capped
    simplexes.  Deterministic for a fixed seed.  Trace rows are accepted
    iterates; their objective column is non-increasing."""
    N = A.shape[0]
    b = np.zeros(N) if b is None else np.asarray(b, dtype=float)
    caps = np.asarray(caps, dtype=float)
    totals = [float(t) for t in totals]

    def project(v):
        out = np.empty_like(v)
        for j, sl in enumerate(slices):
            out[sl] = project_capped_simplex(v[sl], caps[sl], totals[j])
        return out

    rng = np.random.default_rng(seed)
    w0 = np.empty(N)
    for j, sl in enumerate(slices):
        cj = caps[sl]
        m = sl.stop - sl.start
        if np.all(np.isinf(cj)):
            base = np.full(m, totals[j] / m)
        else:
            finite = np.where(np.isfinite(cj), cj, 0.0)
            top = finite.max() if finite.max() > 0 else 1.0
            base = np.where(np.isfinite(cj), cj, top)
            base = base * (totals[j] / base.sum())
        if seed is not None:
            base = base * (0.25 + rng.random(m))
        w0[sl] = base
    w = project(w0)

    matvecs = 0

    def q_of(v):
        nonlocal matvecs
        matvecs += 1
        z = A @ v
        return float(v @ z + 2.0 * (b @ v)), z

    q, z = q_of(w)
    g = 2.0 * (z + b)
    diag_max = float(np.abs(np.diag(A)).max()) if N else 1.0
    alpha = 1.0 / (2.0 * diag_max + 1e-300)
    a_lo, a_hi = 1e-14 / diag_max, 1e14 / diag_max

    consts, kkt = block_constants_and_kkt(g / 2.0, w, caps, slices, totals,
                                          free_margin_rel)
    trace = [(0, q, 0.0, kkt)] if record_trace else []
    hist = [q]
    converged = kkt < tol_kkt
    outer = 0
    use_bb1 = True
    while not converged and outer < max_iters:
        outer += 1
        # --- free BB burst from the current accepted iterate ---------------
        bw, bz, bq = w, z, q
        cw, cz, cq, cg = w, z, q, g
        best_inner_kkt = kkt
        step_used = alpha
        for _ in range(burst):
            wt = project(cw - alpha * cg)
            qt, zt = q_of(wt)
            s = wt - cw
            y = 2.0 * (zt - cz)
            cw, cz, cq = wt, zt, qt
            cg = 2.0 * (cz + b)
            if cq < bq:
                bw, bz, bq = cw, cz, cq
            _, ikkt = block_constants_and_kkt(cg / 2.0, cw, caps, slices,
                                              totals, free_margin_rel)
            if ikkt < best_inner_kkt:
                best_inner_kkt = ikkt
            ss = float(s @ s)
            sy = float(s @ y)
            yy = float(y @ y)
            if sy > 0.0:
                anew = ss / sy if use_bb1 else sy / yy
                use_bb1 = not use_bb1
                alpha = min(max(anew, a_lo), a_hi)
            if ikkt < tol_kkt and cq <= q:
                bw, bz, bq = cw, cz, cq
                break
            if cq > q + 10.0 * (abs(q) + 1.0):
                break  # runaway burst; fall back below
        if bq <= q:
            w, z, q = bw, bz, bq
            g = 2.0 * (z + b)
        else:
            # backtracking fallback: exact line search along the projected
            # direction at a cautious step; guaranteed descent off the optimum
            acons = 1.0 / (2.0 * diag_max)
            d = project(w - acons * g) - w
            matvecs += 1
            Ad = A @ d
            gd = float(g @ d)
            dAd = float(d @ Ad)
            lam = 1.0 if dAd <= 0 else min(1.0, max(0.0, -gd / (2.0 * dAd)))
            if gd < 0.0 and lam > 0.0:
                w = w + lam * d
                z = z + lam * Ad
                q = float(w @ z + 2.0 * (b @ w))
                g = 2.0 * (z + b)
                step_used = lam * acons
            alpha = acons
        consts, kkt = block_constants_and_kkt(g / 2.0, w, caps, slices, totals,
                                              free_margin_rel)
        hist.append(q)
        if record_trace:
            trace.append((outer, q, step_used, kkt))
        if kkt < tol_kkt:
            window = min(patience, len(hist) - 1)
            if window == 0 or hist[-1 - window] - q <= tol_obj * max(1.0, abs(q)):
                converged = True

    at_cap, at_zero = [], []
    for j, sl in enumerate(slices):
        margin = free_margin_rel * totals[j]
        at_cap.append(np.flatnonzero(w[sl] >= caps[sl] - margin))
        at_zero.append(np.flatnonzero(w[sl] <= margin))
    tr = np.array(trace) if trace else np.zeros((0, 4))
    return PGResult(w=w, objective=q, converged=converged, iterations=outer,
                    kkt_residual=kkt, constants=consts, trace=tr,
                    active_at_cap=at_cap, active_at_zero=at_zero,
                    matvecs=matvecs)
