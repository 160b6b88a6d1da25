"""Brownian loop-measure masses Lambda(V1,...,Vk; D).

The radial decomposition roots every loop at its closest point to the origin
(exterior-disk domain families) or its furthest point (disk families), so

    Lambda = (1/pi) Int Int m(s e^{i theta}) s ds dtheta

with m the bubble mass of loops rooted on the circle C_s that stay on the
root's far side, hit every listed set, and avoid any removed set.  Nodes are
estimated by record-and-drop walks: the walk runs in the root circle's
complement, marks each target on first touch, and at the moment the last
target is marked the closing-leg density at the root is either the exact
one-circle boundary kernel (pure domains) or a small-arc frequency (domains
with extra removed sets).  Concentric-circle configurations collapse to an
exact quadrature of closed-form kernels (the fast path), which doubles as
the oracle for the Monte Carlo route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .engine import Estimate, RngStream, _circle_harmonic_sample
from .geometry import (Annulus, Circle, ClosedDisk, CompactSet, Disk, Domain,
                       DomainMinusSet, ExteriorDisk, HullComplement,
                       UnionSet, as_complex)

TWO_PI = 2.0 * math.pi


class QuadratureNonconvergent(RuntimeError):
    pass


class ShellRangeInsufficient(RuntimeError):
    """Dyadic shells fail to cover the sets' radial extent."""


# ---------------------------------------------------------------------------
# exact concentric machinery


def rho_exact(R: float, terms: int = 200) -> float:
    """Mass of bubbles at 1 in {|z|>1} leaving the annulus 1 < |z| < R,
    summed in closed form: 1/(2 log R) + 2 Sum m R^-m/(R^m - R^-m)."""
    if R <= 1:
        raise ValueError("need R > 1")
    total = 1.0 / (2.0 * math.log(R))
    for m in range(1, terms + 1):
        num = R**-m
        den = R**m - num
        t = 2.0 * m * num / den
        total += t
        if t < 1e-17 * total:
            break
    return total


def _concentric_radii(sets, tol: float = 1e-12):
    """If every set is an origin-centered circle or closed disk, return their
    radii; otherwise None.  These configurations are rotation-symmetric and
    nested, so 'hit all' degenerates to 'hit the outermost'."""
    radii = []
    for V in sets:
        if isinstance(V, (Circle, ClosedDisk)) and abs(V.center) <= tol:
            radii.append(V.radius)
        else:
            return None
    return radii


def loop_mass_circles(s: float, R: float) -> Estimate:
    """Mass of loops outside the disk of radius s that hit both C_1 and C_R,
    by adaptive quadrature of 2 Int_s^1 rho(R/r) dr/r.

    Exact up to quadrature error since rho is summed in closed form; the
    limit closed form log[log(R/s)/log R] holds up to O(1/(R log R)).
    """
    if not (0 < s <= 1 < R):
        raise ValueError("need 0 < s <= 1 < R")
    if s == 1.0:
        return Estimate(0.0, 0.0, 0, 0)
    val, err = integrate.quad(lambda u: 2.0 * rho_exact(R * math.exp(u)),
                              0.0, math.log(1.0 / s), limit=200)
    if err > 1e-8 * max(1.0, abs(val)):
        raise QuadratureNonconvergent(f"quad error {err:.2g}")
    return Estimate(val, err, 0, 0)


def _concentric_profile(radii, r_schedule):
    """Exact Lambda(sets; O_r) for origin-centered circle/disk sets at every
    r in the schedule, via the collapsed radial integral."""
    a_min, a_max = min(radii), max(radii)
    out = []
    for r in r_schedule:
        if r >= a_min:
            out.append(Estimate(0.0, 0.0, 0, 0))
            continue
        val, err = integrate.quad(
            lambda u: 2.0 * rho_exact(a_max * math.exp(-u)),
            math.log(r), math.log(a_min), limit=200)
        out.append(Estimate(val, err, 0, 0))
    return out


# ---------------------------------------------------------------------------
# Monte Carlo node machinery


def _kernel_exterior(W, z, s):
    """Boundary Poisson density of {|w| > s} at the root z on C_s."""
    return (np.abs(W) ** 2 - s * s) / (TWO_PI * s * np.abs(W - z) ** 2)


def _kernel_disk(W, z, S):
    """Boundary Poisson density of {|w| < S} at the root z on C_S."""
    return (S * S - np.abs(W) ** 2) / (TWO_PI * S * np.abs(W - z) ** 2)


def _node_walks(s, roots, targets, absorbers, n_per_root, eps_hat, gen,
                family="exterior", eta=None):
    """One ladder level of the node estimator at root radius s.

    Starts n_per_root walkers at each root offset radially by eps_hat*s into
    the domain, marks targets on first touch, and returns per-root arrays
    (mean payoff, payoff variance) where payoff already includes the pi/eps
    normalization of the bubble density.
    """
    k = len(targets)
    nr = len(roots)
    N = nr * n_per_root
    root_rep = np.repeat(np.asarray(roots, dtype=complex), n_per_root)
    sign = 1.0 if family == "exterior" else -1.0
    z = root_rep * (1.0 + sign * eps_hat)
    eps_abs = eps_hat * s
    wos_eps = 1e-6 * s
    hit = np.zeros((N, k), dtype=bool)
    for j, t in enumerate(targets):
        # a target containing the root itself is hit by every loop
        hit[:, j] = t.dist_wos(root_rep, wos_eps) <= wos_eps
    payoff = np.zeros(N)
    alive = np.ones(N, dtype=bool)
    use_arc = bool(absorbers)
    ctrl = 1.5 * max([s] + [t.radial_range()[1] for t in targets]
                     + [a.radial_range()[1] for a in absorbers])
    while np.any(alive):
        if family == "exterior":
            # every feature sits inside |w| <= ctrl; walkers that stray far
            # re-enter through an exact harmonic-measure jump onto C_ctrl
            far = alive & (np.abs(z) > 2.0 * ctrl)
            if np.any(far):
                z[far] = _circle_harmonic_sample(z[far], ctrl, gen)
        idx = np.flatnonzero(alive)
        za = z[idx]
        d_close = np.abs(np.abs(za) - s)
        dmin = d_close.copy()
        code = np.zeros(idx.size, dtype=int)  # 0 closure, 1.. targets, -1 abs
        for j, t in enumerate(targets):
            dt = t.dist_wos(za, wos_eps)
            dt[hit[idx, j]] = np.inf
            better = dt < dmin
            dmin[better] = dt[better]
            code[better] = j + 1
        for a in absorbers:
            da = a.dist_wos(za, wos_eps)
            better = da < dmin
            dmin[better] = da[better]
            code[better] = -1
        arrived = dmin <= wos_eps
        if np.any(arrived):
            ia = idx[arrived]
            ca = code[arrived]
            # absorber or closure without full hits: payoff stays 0
            closure = ca == 0
            if np.any(closure):
                ic = ia[closure]
                done_all = hit[ic].all(axis=1) if k else np.ones(ic.size, bool)
                if use_arc and np.any(done_all):
                    icd = ic[done_all]
                    E = s * z[icd] / np.abs(z[icd])
                    near = np.abs(E - root_rep[icd]) <= eta
                    payoff[icd] = near / (2.0 * eta)
                alive[ic] = False
            tgt = ca >= 1
            if np.any(tgt):
                it = ia[tgt]
                jt = ca[tgt] - 1
                hit[it, jt] = True
                done = hit[it].all(axis=1)
                if np.any(done) and not use_arc:
                    fin = it[done]
                    W = np.empty(fin.size, dtype=complex)
                    for j in range(k):
                        mask = jt[done] == j
                        if np.any(mask):
                            W[mask] = targets[j].nearest(z[fin][mask])
                    if family == "exterior":
                        payoff[fin] = _kernel_exterior(W, root_rep[fin], s)
                    else:
                        payoff[fin] = _kernel_disk(W, root_rep[fin], s)
                    alive[fin] = False
            alive[ia[ca == -1]] = False
        idx = np.flatnonzero(alive)
        if idx.size:
            za = z[idx]
            r = np.abs(np.abs(za) - s)
            for j, t in enumerate(targets):
                dt = t.dist_wos(za, wos_eps)
                dt[hit[idx, j]] = np.inf
                r = np.minimum(r, dt)
            for a in absorbers:
                r = np.minimum(r, a.dist_wos(za, wos_eps))
            if family == "exterior":
                r = np.minimum(r, 10.0 * np.abs(za))
            th = gen.uniform(0.0, TWO_PI, size=idx.size)
            z[idx] = za + r * np.exp(1j * th)
    payoff *= math.pi / eps_abs
    payoff = payoff.reshape(nr, n_per_root)
    return payoff.mean(axis=1), payoff.var(axis=1) / n_per_root


def _node_mass(s, n_theta, targets, absorbers, n_per_node, eps_hats, rng,
               family="exterior", eta_frac=0.05):
    """Richardson-extrapolated node value: the theta-average of the bubble
    mass m(s e^{i theta}) over n_theta equispaced roots, with its variance."""
    thetas = TWO_PI * (np.arange(n_theta) + 0.5) / n_theta
    roots = s * np.exp(1j * thetas)
    eta = eta_frac * s if absorbers else None
    n_per_root = max(n_per_node // n_theta, 8)
    means, variances = [], []
    for lvl, eh in enumerate(sorted(eps_hats)):
        gen = rng.child(lvl).generator()
        m, v = _node_walks(s, roots, targets, absorbers, n_per_root, eh, gen,
                           family=family, eta=eta)
        means.append(float(m.mean()))
        variances.append(float(v.sum()) / len(roots) ** 2)
    # Richardson in eps_hat (values carry A + c*eps_hat + ... bias)
    e = np.asarray(sorted(eps_hats), dtype=float)
    if len(e) == 1:
        return means[0], variances[0]
    if len(e) == 2:
        a, b = e
        w1, w2 = -b / (a - b), a / (a - b)
        val = w1 * means[0] + w2 * means[1]
        var = w1**2 * variances[0] + w2**2 * variances[1]
        return float(val), float(var)
    from .engine import richardson
    val, err = richardson(e, means, [math.sqrt(v) for v in variances])
    return float(val), float(err**2)


def _radial_extent(sets, family):
    if family == "exterior":
        return min(V.radial_range()[1] for V in sets)
    return max(V.radial_range()[0] for V in sets)


@dataclass(frozen=True)
class LoopMassQuery:
    """A loop-mass computation: mass of loops in `domain` hitting every set."""

    sets: tuple
    domain: Domain
    d_log: float = 0.25
    n_theta: int = 16
    n_per_node: int = 4096
    eps_hats: tuple = (0.2, 0.1)
    force_mc: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        if len(self.sets) < 1:
            raise ValueError("need at least one set")


def _split_domain(D: Domain):
    """Reduce a domain to (family, limit radius, removed compact sets).

    family 'exterior' covers O_r = {|z| > r} possibly minus compact sets and
    the whole plane minus compact sets (r = 0); family 'disk' covers D_R.
    """
    removed = []
    while isinstance(D, DomainMinusSet):
        removed.append(D.removed)
        D = D.base
    if isinstance(D, ExteriorDisk):
        if D.center != 0:
            raise ValueError("exterior-family domains must be origin-centered")
        return "exterior", D.radius, removed
    if isinstance(D, Disk):
        if D.center != 0:
            raise ValueError("disk-family domains must be origin-centered")
        return "disk", D.radius, removed
    if isinstance(D, HullComplement):
        removed.append(D.hull)
        return "exterior", 0.0, removed
    raise ValueError(f"unsupported loop-mass domain {type(D).__name__}")


def loop_mass(q: LoopMassQuery, seed: int) -> Estimate:
    """Mass of loops in q.domain hitting every set in q.sets."""
    family, limit, removed = _split_domain(q.domain)
    sets = list(q.sets)
    if not removed and not q.force_mc:
        radii = _concentric_radii(sets)
        if radii is not None and family == "exterior" and limit > 0:
            if limit >= min(radii):
                return Estimate(0.0, 0.0, 0, seed)
            prof = _concentric_profile(radii, [limit])
            return prof[0]
    s_edge = _radial_extent(sets, family)
    if family == "exterior":
        if limit >= s_edge:
            return Estimate(0.0, 0.0, 0, seed)
        lo, hi = math.log(max(limit, 1e-300)), math.log(s_edge)
        if limit == 0.0:
            # whole-plane-minus-removed-sets queries: truncate six e-folds
            # below the sets' reach; the discarded tail is huge-loop mass
            # controlled by the removed sets
            lo = hi - 6.0
    else:
        if limit <= s_edge:
            return Estimate(0.0, 0.0, 0, seed)
        lo, hi = math.log(s_edge), math.log(limit)
    n_seg = max(int(math.ceil((hi - lo) / q.d_log)), 2)
    us = np.linspace(lo, hi, n_seg + 1)
    w = np.full(n_seg + 1, us[1] - us[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    rng = RngStream(seed)
    total, var = 0.0, 0.0
    for i, u in enumerate(us):
        s = math.exp(u)
        m, v = _node_mass(s, q.n_theta, sets, removed, q.n_per_node,
                          q.eps_hats, rng.child(i), family=family)
        c = 2.0 * w[i] * s * s
        total += c * m
        var += c * c * v
    return Estimate(total, math.sqrt(var), q.n_per_node * (n_seg + 1), seed)


def loop_mass_profile(sets, r_schedule, seed: int, d_log: float = 0.25,
                      n_theta: int = 16, n_per_node: int = 4096,
                      eps_hats=(0.2, 0.1), force_mc: bool = False):
    """Lambda(sets; O_r) for every r in a decreasing schedule, sharing one
    radial node grid so schedule differences carry no extra noise.

    Returns (estimates, covariance matrix).  Concentric circle/disk
    configurations use the exact quadrature fast path unless force_mc.
    """
    r_schedule = sorted((float(r) for r in r_schedule), reverse=True)
    sets = list(sets)
    if not force_mc:
        radii = _concentric_radii(sets)
        if radii is not None:
            ests = _concentric_profile(radii, r_schedule)
            cov = np.diag([e.stderr**2 for e in ests])
            return ests, cov
    s_edge = _radial_extent(sets, "exterior")
    marks = [math.log(r) for r in r_schedule if r < s_edge]
    if not marks:
        raise ValueError("schedule entirely outside the sets' radial reach")
    hi = math.log(s_edge)
    # node grid: union of refined segments between consecutive marks
    edges = [hi] + marks
    us = [hi]
    for a, b in zip(edges[:-1], edges[1:]):
        m = max(int(math.ceil((a - b) / d_log)), 1)
        seg = np.linspace(a, b, m + 1)
        us.extend(seg[1:])
    us = np.asarray(us)
    rng = RngStream(seed)
    vals = np.zeros(len(us))
    vars = np.zeros(len(us))
    for i, u in enumerate(us):
        s = math.exp(u)
        mval, v = _node_mass(s, n_theta, sets, [], n_per_node, eps_hats,
                             rng.child(i), family="exterior")
        vals[i] = mval
        vars[i] = v
    ests = []
    cvars = np.zeros(len(us))
    for j, r in enumerate(r_schedule):
        lo = math.log(r)
        inside = us >= lo - 1e-12
        uu = us[inside]
        order = np.argsort(uu)
        uu = uu[order]
        vv = vals[inside][order]
        gg = vars[inside][order]
        # trapezoid weights on the (non-uniform) grid
        wts = np.zeros(len(uu))
        wts[:-1] += 0.5 * np.diff(uu)
        wts[1:] += 0.5 * np.diff(uu)
        c = 2.0 * wts * np.exp(2.0 * uu)
        total = float(np.sum(c * vv))
        var = float(np.sum(c * c * gg))
        ests.append(Estimate(total, math.sqrt(var), n_per_node * len(uu), seed))
        full = np.flatnonzero(inside)[order]
        cvars[full] = c * c * gg
    # covariance: schedules share nodes, so cov(j,k) = variance of the
    # shallower schedule's nodes
    n = len(r_schedule)
    cov = np.zeros((n, n))
    for j in range(n):
        for kk in range(j, n):
            lo = math.log(r_schedule[j])  # shallower (larger r)
            inside = us >= lo - 1e-12
            cov[j, kk] = cov[kk, j] = float(np.sum(cvars[inside]))
    return ests, cov


def cascade_check(sets, extra: CompactSet, D: Domain, seed: int,
                  query_kwargs: dict | None = None):
    """Residual of the splitting identity

        Lambda(sets; D) = Lambda(sets + extra; D) + Lambda(sets; D - extra)

    Returns (residual, combined stderr).  The left and first right term use
    the closed-kernel payoff; the removed-set term uses the independent
    arc-frequency payoff, so the identity is a genuine cross-check.
    """
    kw = query_kwargs or {}
    a = loop_mass(LoopMassQuery(tuple(sets), D, **kw), seed)
    b = loop_mass(LoopMassQuery(tuple(sets) + (extra,), D, **kw), seed + 1)
    c = loop_mass(LoopMassQuery(tuple(sets), DomainMinusSet(D, extra), **kw),
                  seed + 2)
    resid = a.value - b.value - c.value
    err = math.sqrt(a.stderr**2 + b.stderr**2 + c.stderr**2)
    return resid, err


def dyadic_loop_mass(V1: CompactSet, V2: CompactSet, D: Domain, j_range,
                     seed: int, query_kwargs: dict | None = None) -> Estimate:
    """Lambda(V1, V2; D) summed over dyadic shells: loops are classified by
    the integer shell exp(j-1) <= closest-radius < exp(j) they start in.

    Raises ShellRangeInsufficient when the requested shells do not cover the
    sets' radial reach within the domain.
    """
    kw = dict(query_kwargs or {})
    family, limit, removed = _split_domain(D)
    if family != "exterior" or removed:
        raise ValueError("dyadic splitting implemented for exterior domains")
    s_edge = _radial_extent([V1, V2], "exterior")
    js = sorted(int(j) for j in j_range)
    lo_edge = math.exp(js[0] - 1)
    hi_edge = math.exp(js[-1])
    if lo_edge > limit * (1 + 1e-9) or hi_edge < s_edge * (1 - 1e-9):
        raise ShellRangeInsufficient(
            f"shells cover [{lo_edge:.3g}, {hi_edge:.3g}] but need "
            f"[{limit:.3g}, {s_edge:.3g}]")
    total = None
    for j in js:
        a = max(math.exp(j - 1), limit)
        b = min(math.exp(j), s_edge)
        if b <= a:
            continue
        part = _band_loop_mass([V1, V2], a, b, seed + j, **kw)
        total = part if total is None else total.plus(part)
    return total if total is not None else Estimate(0.0, 0.0, 0, seed)


def _band_loop_mass(sets, s_lo, s_hi, seed, d_log=0.25, n_theta=16,
                    n_per_node=4096, eps_hats=(0.2, 0.1)):
    """Mass of loops hitting all sets whose closest-to-origin radius lies in
    [s_lo, s_hi] (one shell of the dyadic decomposition)."""
    lo, hi = math.log(s_lo), math.log(s_hi)
    n_seg = max(int(math.ceil((hi - lo) / d_log)), 1)
    us = np.linspace(lo, hi, n_seg + 1)
    w = np.full(n_seg + 1, (hi - lo) / n_seg if n_seg else 0.0)
    w[0] *= 0.5
    w[-1] *= 0.5
    rng = RngStream(seed)
    total, var = 0.0, 0.0
    for i, u in enumerate(us):
        s = math.exp(u)
        m, v = _node_mass(s, n_theta, list(sets), [], n_per_node, eps_hats,
                          rng.child(i), family="exterior")
        c = 2.0 * w[i] * s * s
        total += c * m
        var += c * c * v
    return Estimate(total, math.sqrt(var), n_per_node * (n_seg + 1), seed)
