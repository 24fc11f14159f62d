"""Quadratic Bezier fitting and evaluation for per-edge lane geometry.

An edge stores a single interior control point, which determines a
quadratic curve. ``elevate_to_cubic`` exports the same curve in cubic
form (degree elevation is lossless) for consumers that expect four
control points.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Point2 = tuple[float, float]

_NEWTON_STEPS = 2


@dataclass(frozen=True)
class EdgeCurve:
    """Quadratic Bezier: fixed endpoints p0/p1 and one interior control c."""

    p0: Point2
    c: Point2
    p1: Point2


def _eval(p0, c, p1, t):
    t = np.asarray(t, dtype=float)[:, None]
    return (1.0 - t) ** 2 * p0 + 2.0 * t * (1.0 - t) * c + t**2 * p1


def _chord_params(pts: np.ndarray) -> np.ndarray | None:
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    total = float(seg.sum())
    if total == 0.0:
        return None
    return np.concatenate(([0.0], np.cumsum(seg))) / total


def _solve_control(pts, t, p0, p1) -> np.ndarray | None:
    # Weighted least squares with the basis weight phi = 2 t (1 - t);
    # closed form since c is the only unknown.
    phi = 2.0 * t * (1.0 - t)
    denom = float((phi**2).sum())
    if denom <= 1e-300:
        return None
    resid = pts - ((1.0 - t) ** 2)[:, None] * p0 - (t**2)[:, None] * p1
    return (phi[:, None] * resid).sum(axis=0) / denom


def _cubic_roots(a, b, c, d) -> np.ndarray:
    # Real roots of a x^3 + b x^2 + c x + d per row, NaN padded; a must be
    # bounded away from zero (callers route near-linear rows elsewhere).
    roots = np.full((len(a), 3), np.nan)
    shift = b / (3.0 * a)
    p = (3.0 * a * c - b * b) / (3.0 * a * a)
    q = (2.0 * b**3 - 9.0 * a * b * c + 27.0 * a * a * d) / (27.0 * a**3)
    disc = (0.5 * q) ** 2 + (p / 3.0) ** 3
    one = disc > 0.0
    if one.any():
        sq = np.sqrt(disc[one])
        roots[one, 0] = np.cbrt(-0.5 * q[one] + sq) + np.cbrt(-0.5 * q[one] - sq)
    tri = ~one
    if tri.any():
        m = 2.0 * np.sqrt(-np.minimum(p[tri], 0.0) / 3.0)
        denom = np.where(m > 0.0, p[tri] * m, 1.0)
        arg = np.where(m > 0.0, np.clip(3.0 * q[tri] / denom, -1.0, 1.0), 1.0)
        theta = np.arccos(arg) / 3.0
        for k in range(3):
            roots[tri, k] = m * np.cos(theta - 2.0 * np.pi * k / 3.0)
    return roots - shift[:, None]


def _project_params(pts, p0, c, p1, newton=_NEWTON_STEPS) -> np.ndarray:
    # Nearest parameter per point. The stationarity condition
    # (B(t) - q) . B'(t) = 0 is a cubic in t, so the candidates are its
    # real roots in [0, 1] plus the interval endpoints; a couple of Newton
    # steps then squeeze out the root-formula rounding error.
    n = len(pts)
    qa = p0 - 2.0 * c + p1
    qb = 2.0 * (c - p0)
    qc = p0 - pts
    a = np.full(n, 2.0 * float(qa @ qa))
    b = np.full(n, 3.0 * float(qa @ qb))
    cf = float(qb @ qb) + 2.0 * (qc @ qa)
    d = qc @ qb
    roots = np.full((n, 3), np.nan)
    mag = np.maximum(np.maximum(np.abs(b), np.abs(cf)), np.abs(d))
    linear = a <= 1e-13 * np.maximum(mag, 1e-300)
    if (~linear).any():
        roots[~linear] = _cubic_roots(a[~linear], b[~linear], cf[~linear], d[~linear])
    if linear.any():
        denom = np.where(np.abs(cf[linear]) > 1e-300, cf[linear], 1.0)
        roots[linear, 0] = -d[linear] / denom
    cand = np.concatenate([roots, np.zeros((n, 1)), np.ones((n, 1))], axis=1)
    invalid = ~np.isfinite(cand) | (cand < 0.0) | (cand > 1.0)
    cand = np.where(invalid, 0.0, cand)
    tt = cand[..., None]
    curve = (1.0 - tt) ** 2 * p0 + 2.0 * tt * (1.0 - tt) * c + tt**2 * p1
    dist = ((curve - pts[:, None, :]) ** 2).sum(axis=2)
    dist = np.where(invalid, np.inf, dist)
    t = cand[np.arange(n), dist.argmin(axis=1)]
    d2 = 2.0 * qa
    for _ in range(newton):
        diff = _eval(p0, c, p1, t) - pts
        db = 2.0 * (1.0 - t)[:, None] * (c - p0) + 2.0 * t[:, None] * (p1 - c)
        num = (diff * db).sum(axis=1)
        den = (db * db).sum(axis=1) + diff @ d2
        t = np.clip(t - num / np.where(np.abs(den) > 1e-300, den, 1.0), 0.0, 1.0)
    return t


def _residual_sq(pts, p0, c, p1, t) -> float:
    r = _eval(p0, c, p1, t) - pts
    return float((r * r).sum())


def _gauss_newton(pts, p0, c, p1, t, iters, stop_sq):
    # Joint refinement of (c, t_1..t_n): the per-point parameters are
    # eliminated from the normal equations, leaving a 2x2 solve for the
    # control step, with halving line search on the true residual.
    best = _residual_sq(pts, p0, c, p1, t)
    for _ in range(iters):
        if best < stop_sq:
            break
        r = _eval(p0, c, p1, t) - pts
        phi = 2.0 * t * (1.0 - t)
        db = 2.0 * (1.0 - t)[:, None] * (c - p0) + 2.0 * t[:, None] * (p1 - c)
        norm_sq = (db * db).sum(axis=1)
        norm_sq = np.where(norm_sq < 1e-300, 1.0, norm_sq)
        unit = db / np.sqrt(norm_sq)[:, None]
        w = phi * phi
        hxx = float((w * (1.0 - unit[:, 0] ** 2)).sum())
        hyy = float((w * (1.0 - unit[:, 1] ** 2)).sum())
        hxy = float((-w * unit[:, 0] * unit[:, 1]).sum())
        proj = r - unit * ((unit * r).sum(axis=1))[:, None]
        gx = float((phi * proj[:, 0]).sum())
        gy = float((phi * proj[:, 1]).sum())
        det = hxx * hyy - hxy * hxy
        if abs(det) < 1e-300:
            break
        dc = np.array([(-gx * hyy + gy * hxy) / det, (-gy * hxx + gx * hxy) / det])
        alpha, improved = 1.0, False
        while alpha > 1e-12:
            c_try = c + alpha * dc
            dt = -((r + phi[:, None] * (alpha * dc)) * db).sum(axis=1) / norm_sq
            t_try = np.clip(t + dt, 0.0, 1.0)
            s = _residual_sq(pts, p0, c_try, p1, t_try)
            if s < best:
                c, t, best = c_try, t_try, s
                improved = True
                break
            alpha *= 0.5
        if not improved:
            break
    return c, best


def _polish(pts, p0, c, p1, stop_sq, alt_rounds, gn_iters):
    # Alternation is cheap and monotone but only linearly convergent, so a
    # short run hands off to the joint step for the final digits.
    t = _project_params(pts, p0, c, p1)
    best_c, best_s = c, _residual_sq(pts, p0, c, p1, t)
    for _ in range(alt_rounds):
        if best_s < stop_sq:
            return best_c, best_s
        c_new = _solve_control(pts, t, p0, p1)
        if c_new is None:
            break
        t_new = _project_params(pts, p0, c_new, p1)
        s = _residual_sq(pts, p0, c_new, p1, t_new)
        if not s < best_s:
            break
        best_c, best_s, t = c_new, s, t_new
    c_gn, s_gn = _gauss_newton(pts, p0, best_c, p1, t, gn_iters, stop_sq)
    if s_gn < best_s:
        t_gn = _project_params(pts, p0, c_gn, p1)
        s_gn = _residual_sq(pts, p0, c_gn, p1, t_gn)
        if s_gn < best_s:
            best_c, best_s = c_gn, s_gn
    return best_c, best_s


def _conic_control(pts) -> np.ndarray | None:
    # Samples of a quadratic lie on a conic, and the tangents of a
    # quadratic at its endpoints meet at the control point. Recovering the
    # conic from >= 5 points and intersecting the endpoint tangents gives c
    # without ever estimating the parameterization. Returns None for
    # degenerate input (collinear points, parallel tangents).
    mu = pts.mean(axis=0)
    q = pts - mu
    spread = float(np.sqrt((q * q).sum(axis=1).mean()))
    if not spread > 0.0:
        return None
    q = q / spread
    x, y = q[:, 0], q[:, 1]
    design = np.stack([x * x, x * y, y * y, x, y, np.ones_like(x)], axis=1)
    try:
        _, _, vt = np.linalg.svd(design, full_matrices=False)
    except np.linalg.LinAlgError:
        return None
    ca, cb, cc, cd, ce, _ = vt[-1]
    g0 = np.array([2.0 * ca * x[0] + cb * y[0] + cd, cb * x[0] + 2.0 * cc * y[0] + ce])
    g1 = np.array([2.0 * ca * x[-1] + cb * y[-1] + cd, cb * x[-1] + 2.0 * cc * y[-1] + ce])
    d0 = np.array([-g0[1], g0[0]])
    d1 = np.array([-g1[1], g1[0]])
    det = d1[0] * d0[1] - d0[0] * d1[1]
    n0, n1 = float(np.hypot(*d0)), float(np.hypot(*d1))
    if n0 == 0.0 or n1 == 0.0 or abs(det) < 1e-12 * n0 * n1:
        return None
    gap = q[-1] - q[0]
    step = (d1[0] * gap[1] - gap[0] * d1[1]) / det
    out = (q[0] + step * d0) * spread + mu
    if not np.isfinite(out).all():
        return None
    return out


def fit_control_point(points) -> EdgeCurve:
    """Fit the interior control of a quadratic Bezier through fixed endpoints.

    The first and last input points are kept as p0/p1; the control point
    minimizes the summed squared distance from each input point to the
    curve. A chord-length least-squares estimate seeds projection/re-solve
    alternation plus a joint refinement; inputs with five or more points
    also try a candidate built from the conic through the samples, which
    pins down strongly bent curves that the chord seeding misjudges.
    Points sampled from an actual quadratic are recovered to floating-point
    accuracy. Zero total chord length degenerates to ``c == p0``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise ValueError("need an ordered list of >= 3 2D points")
    p0, p1 = pts[0].copy(), pts[-1].copy()

    t0 = _chord_params(pts)
    if t0 is None:
        return EdgeCurve(tuple(p0), tuple(p0), tuple(p1))  # all points coincide

    scale = 1.0 + float(np.abs(pts).max())
    stop_sq = (1e-14 * scale) ** 2
    seeds = [t0]
    if len(pts) <= 6:
        # few interior points leave the parameterization ambiguous; try a
        # spread of pacings and keep the best
        seeds += [np.linspace(0.0, 1.0, len(pts)), t0 * t0, np.sqrt(t0)]
    best_c, best_s = None, np.inf
    for t_seed in seeds:
        c_seed = _solve_control(pts, t_seed, p0, p1)
        if c_seed is None:
            continue
        c_fit, s_fit = _polish(pts, p0, c_seed, p1, stop_sq, alt_rounds=8, gn_iters=40)
        if s_fit < best_s:
            best_c, best_s = c_fit, s_fit
        if best_s < stop_sq:
            break
    if best_c is None:
        best_c = 0.5 * (p0 + p1)
    if len(pts) >= 5 and not best_s < stop_sq:
        c_conic = _conic_control(pts)
        if c_conic is not None:
            c_fit, s_fit = _polish(pts, p0, c_conic, p1, stop_sq, alt_rounds=3, gn_iters=25)
            if s_fit < best_s:
                best_c = c_fit
    return EdgeCurve(tuple(p0), (float(best_c[0]), float(best_c[1])), tuple(p1))


def sample_curve(e: EdgeCurve, n: int) -> list[Point2]:
    """Evaluate the curve at n uniform parameters; endpoints are exact."""
    if n < 2:
        raise ValueError("need n >= 2 samples")
    t = np.linspace(0.0, 1.0, n)
    out = _eval(np.asarray(e.p0), np.asarray(e.c), np.asarray(e.p1), t)
    return [(float(x), float(y)) for x, y in out]


def elevate_to_cubic(e: EdgeCurve) -> tuple[Point2, Point2, Point2, Point2]:
    """Return the cubic control polygon tracing the identical curve."""
    p0, c, p1 = (np.asarray(v, dtype=float) for v in (e.p0, e.c, e.p1))
    q1 = p0 + (2.0 / 3.0) * (c - p0)
    q2 = p1 + (2.0 / 3.0) * (c - p1)
    return tuple(e.p0), (float(q1[0]), float(q1[1])), (float(q2[0]), float(q2[1])), tuple(e.p1)
