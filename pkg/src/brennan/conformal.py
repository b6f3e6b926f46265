"""Schwarz-Christoffel map from the unit disk onto a polygon.

    f(z) = center + scale * int_0^z prod_k (1 - s / z_k) ** (alpha_k - 1) ds

with prevertices ``z_k = exp(i t_k)``. Integrals are compound Gauss-Jacobi
rules: the first panel leaving a prevertex carries the Jacobi weight of that
vertex, later panels are Gauss-Legendre, and no panel is longer than half
the distance from its start to the nearest prevertex.
"""
from __future__ import annotations

import cmath
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares
from scipy.special import roots_jacobi, roots_legendre

from brennan.errors import CrowdingOverflow, NoConvergence, OutsideDomain
from brennan.polygon import BoundaryPolygon, point_in_polygon, polygon_from_vertices, read_csv

log = logging.getLogger(__name__)

MAX_PANELS = 2000
GAP_MIN = 1e-9
TOL_VERTEX = 1e-6  # relative to the polygon diameter
TOL_INV = 1e-9  # relative to the polygon diameter
SPIKE_ALPHA = 0.1  # intermediate polygons avoid sharper tips


# ---------------------------------------------------------------------------
# quadrature kernels


@numba.njit(cache=True)
def _logsum(zeta, z, beta, skip):
    s = 0j
    for j in range(z.shape[0]):
        if j != skip:
            s += beta[j] * np.log(1.0 - zeta / z[j])
    return s


@numba.njit(cache=True, error_model="numpy")
def _integrate_paths(za, zb, sng, sign, owner, n_out, z, beta, xj, wj, xl, wl, want_grad):
    """Sum ``sign * int_{za}^{zb} F`` into ``out[owner]`` for every path.

    ``sng[p]`` is the prevertex index sitting at ``za[p]`` or -1. With
    ``want_grad`` also returns ``G[o, m]``, the derivative of ``out[o]`` with
    respect to the angle ``t_m`` of prevertex ``m`` (``zb`` held fixed). For
    the prevertex a path starts from, integration by parts gives

        d/dz_s int_{z_s}^{c} F = -F(c) + int F sum_{j != s} beta_j / (s - z_j)
                                 - (beta_s / z_s) int_{z_s}^{c} F.
    """
    n = z.shape[0]
    nq = xl.shape[0]
    out = np.zeros(n_out, dtype=np.complex128)
    G = np.zeros((n_out if want_grad else 1, n), dtype=np.complex128)
    row = np.zeros(n, dtype=np.complex128)
    panels = np.zeros(za.shape[0], dtype=np.int64)
    for p in range(za.shape[0]):
        a = za[p]
        b = zb[p]
        k = sng[p]
        o = owner[p]
        if abs(b - a) == 0.0:
            continue
        if want_grad:
            row[:] = 0.0
        total = 0j
        extra = 0j
        zl = a
        first = True
        npan = 0
        while True:
            d = np.inf
            for j in range(n):
                if first and j == k:
                    continue
                dj = abs(z[j] - zl)
                if dj < d:
                    d = dj
            if d == 0.0:
                # two prevertices merged: the integral is undefined
                total = complex(np.nan, np.nan)
                extra = total
                row[:] = total
                npan += 1
                break
            rem = abs(b - zl)
            step = 0.5 * d
            last = step >= rem or npan + 1 >= MAX_PANELS
            zr = b if last else zl + (b - zl) * (step / rem)
            half = 0.5 * (zr - zl)
            mid = 0.5 * (zr + zl)
            jacobi = first and k >= 0
            lh = math.log(abs(half)) if jacobi else 0.0
            for q in range(nq):
                if jacobi:
                    s = mid + half * xj[q, k]
                    t = 1.0 - s / z[k]
                    lg = _logsum(s, z, beta, k) + beta[k] * (lh + 1j * cmath.phase(t))
                    c = sign[p] * wj[q, k] * half * np.exp(lg)
                else:
                    s = mid + half * xl[q]
                    c = sign[p] * wl[q] * half * np.exp(_logsum(s, z, beta, -1))
                total += c
                if want_grad:
                    for m in range(n):
                        if m != k:  # the start vertex is handled below
                            row[m] += c * s / (z[m] - s)
                    if k >= 0:
                        acc = 0j
                        for j in range(n):
                            if j != k:
                                acc += beta[j] / (s - z[j])
                        extra += c * acc
            first = False
            npan += 1
            if last:
                break
            zl = zr
        out[o] += total
        if want_grad:
            for m in range(n):
                G[o, m] += 1j * beta[m] * row[m]
            if k >= 0:
                fb = np.exp(_logsum(b, z, beta, -1))
                dz = -sign[p] * fb + extra - beta[k] / z[k] * total
                G[o, k] += 1j * z[k] * dz
        panels[p] = npan
    return out, G, panels


@numba.njit(cache=True)
def _logderiv_sum(zs, z, beta):
    out = np.empty(zs.shape[0], dtype=np.complex128)
    for i in range(zs.shape[0]):
        out[i] = _logsum(zs[i], z, beta, -1)
    return out


@dataclass(frozen=True)
class _Rule:
    xj: np.ndarray
    wj: np.ndarray
    xl: np.ndarray
    wl: np.ndarray


def _quadrature_rule(beta: np.ndarray, nqpts: int) -> _Rule:
    n = len(beta)
    xj = np.empty((nqpts, n))
    wj = np.empty((nqpts, n))
    for k, b in enumerate(beta):
        xj[:, k], wj[:, k] = roots_jacobi(nqpts, 0.0, b)
    xl, wl = roots_legendre(nqpts)
    return _Rule(xj, wj, xl, wl)


# ---------------------------------------------------------------------------
# polygon geometry


def turning_alphas(vertices: np.ndarray) -> np.ndarray:
    """Interior angles divided by pi for a counterclockwise polygon."""
    v = np.asarray(vertices, dtype=complex)
    e_in = v - np.roll(v, 1)
    e_out = np.roll(v, -1) - v
    turn = np.angle(e_out / e_in)
    return 1.0 - turn / np.pi


def _gaps_to_angles(y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Log-gap unknowns -> (angles t_0 = 0 < t_1 < ... , gap fractions)."""
    u = np.concatenate(([0.0], y))
    u = u - u.max()
    p = np.exp(u)
    p /= p.sum()
    t = 2 * np.pi * np.concatenate(([0.0], np.cumsum(p[:-1])))
    return t, p


def _angles_to_gaps(t: np.ndarray) -> np.ndarray:
    g = np.diff(np.concatenate((t, [t[0] + 2 * np.pi])))
    return np.log(g[1:] / g[0])


def _clamp_to_disk(z: np.ndarray, margin: float) -> np.ndarray:
    r = np.abs(z)
    out = z.copy()
    big = r >= 1
    out[big] = z[big] / r[big] * (1 - margin)
    return out


# ---------------------------------------------------------------------------


@dataclass
class SchwarzChristoffelMap:
    prevertices: np.ndarray  # angles t_k
    alphas: np.ndarray
    scale: complex
    center: complex
    polygon: BoundaryPolygon
    nqpts: int = 8
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.prevertices = np.asarray(self.prevertices, dtype=float)
        self.alphas = np.asarray(self.alphas, dtype=float)
        self.scale = complex(self.scale)
        self.center = complex(self.center)
        self._rules = {}
        self._starts = None

    # -- basic quantities -------------------------------------------------
    @property
    def z(self) -> np.ndarray:
        return np.exp(1j * self.prevertices)

    @property
    def beta(self) -> np.ndarray:
        return self.alphas - 1.0

    @property
    def vertices(self) -> np.ndarray:
        return self.polygon.vertices

    @property
    def diameter(self) -> float:
        if "diameter" not in self.info:
            self.info["diameter"] = self.polygon.diameter
        return self.info["diameter"]

    def rule(self, nqpts: int | None = None) -> _Rule:
        nq = nqpts or self.nqpts
        if nq not in self._rules:
            self._rules[nq] = _quadrature_rule(self.beta, nq)
        return self._rules[nq]

    def _integrate(self, za, zb, sng, nqpts=None):
        za = np.atleast_1d(np.asarray(za, dtype=complex))
        zb = np.atleast_1d(np.asarray(zb, dtype=complex))
        sng = np.atleast_1d(np.asarray(sng, dtype=np.int64))
        r = self.rule(nqpts)
        m = len(za)
        out, _, _ = _integrate_paths(
            za, zb, sng, np.ones(m), np.arange(m), m, self.z, self.beta,
            r.xj, r.wj, r.xl, r.wl, False,
        )
        return out

    # -- evaluation -------------------------------------------------------
    def deriv(self, z):
        z = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(z).ravel()
        val = self.scale * np.exp(_logderiv_sum(flat, self.z, self.beta))
        return val.reshape(z.shape) if z.ndim else val[0]

    def forward(self, z, start: str = "auto", nqpts: int | None = None):
        """Evaluate the map on points of the closed disk.

        ``start="auto"`` integrates from whichever of the origin and the
        prevertices is closest; ``start="center"`` always starts at the origin.
        """
        z = np.asarray(z, dtype=complex)
        flat = np.atleast_1d(z).ravel()
        zk = self.z
        res = np.empty(flat.shape, dtype=complex)
        dist = np.abs(flat[:, None] - zk[None, :])
        near = np.argmin(dist, axis=1)
        dnear = dist[np.arange(len(flat)), near]
        at_vertex = dnear <= 1e-14
        if start == "auto":
            from_vertex = (dnear < np.abs(flat)) & ~at_vertex
        elif start == "center":
            from_vertex = np.zeros(len(flat), dtype=bool)
        else:
            raise ValueError(f"unknown start {start!r}")
        # integrals that end on a prevertex are computed backwards from it
        rev = at_vertex & (start == "center")
        plain = ~from_vertex & ~at_vertex
        if np.any(plain):
            idx = np.flatnonzero(plain)
            res[idx] = self.center + self.scale * self._integrate(
                np.zeros(len(idx)), flat[idx], -np.ones(len(idx)), nqpts)
        if np.any(from_vertex):
            idx = np.flatnonzero(from_vertex)
            k = near[idx]
            res[idx] = self.vertices[k] + self.scale * self._integrate(zk[k], flat[idx], k, nqpts)
        if np.any(rev):
            idx = np.flatnonzero(rev)
            k = near[idx]
            res[idx] = self.center - self.scale * self._integrate(zk[k], np.zeros(len(idx)), k, nqpts)
        if np.any(at_vertex & ~rev):
            idx = np.flatnonzero(at_vertex & ~rev)
            res[idx] = self.vertices[near[idx]]
        return res.reshape(z.shape) if z.ndim else res[0]

    def forward_with_error(self, z):
        """Forward values plus a refinement error estimate (doubled node count)."""
        w = self.forward(z)
        w2 = self.forward(z, nqpts=2 * self.nqpts)
        return w, np.abs(w2 - w)

    def vertex_errors(self) -> np.ndarray:
        """``|f(z_k) - w_k|`` with every value integrated from the origin."""
        return np.abs(self.forward(self.z, start="center") - self.vertices)

    # -- inverse ------------------------------------------------------------
    def _known_pairs(self):
        if self._starts is None:
            radii = np.array([0.5, 0.75, 0.9, 0.95, 0.98])
            ang = np.linspace(0, 2 * np.pi, 48, endpoint=False)
            zs = (radii[:, None] * np.exp(1j * ang)[None, :]).ravel()
            ws = self.forward(zs)
            ok = point_in_polygon(self.vertices, ws)
            self._starts = (np.r_[0j, zs[ok]], np.r_[self.center, ws[ok]])
        return self._starts

    def _visible(self, w0: np.ndarray, w: complex) -> np.ndarray:
        """Which segments ``[w0_j, w]`` avoid every polygon edge."""
        v1 = self.vertices
        v2 = np.roll(v1, -1)

        def cross(a, b):
            return a.real * b.imag - a.imag * b.real

        d = w - w0[:, None]
        e = (v2 - v1)[None, :]
        den = cross(d, e)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = cross(v1[None, :] - w0[:, None], e) / den
            u = cross(v1[None, :] - w0[:, None], d) / den
        hit = (s >= 0) & (s <= 1) & (u >= 0) & (u <= 1)
        return ~np.any(hit, axis=1)

    def inverse(self, w, tol: float | None = None, max_newton: int = 30, on_fail: str = "raise"):
        """Preimages of interior points: ODE continuation then Newton.

        With ``on_fail="nan"`` points whose Newton iteration stalls come back
        as NaN instead of raising.
        """
        w = np.asarray(w, dtype=complex)
        flat = np.atleast_1d(w).ravel()
        inside = point_in_polygon(self.vertices, flat)
        if not np.all(inside):
            raise OutsideDomain(f"{np.count_nonzero(~inside)} point(s) outside the polygon")
        tol = (TOL_INV if tol is None else tol) * self.diameter
        zs, ws = self._known_pairs()
        z0 = np.empty_like(flat)
        w0 = np.empty_like(flat)
        for i, wi in enumerate(flat):
            order = np.argsort(np.abs(ws - wi))
            vis = self._visible(ws[order[:40]], wi)
            j = order[np.argmax(vis)] if vis.any() else 0
            z0[i], w0[i] = zs[j], ws[j]
        m = len(flat)
        dw = flat - w0

        def rhs(_s, y):
            zz = y[:m] + 1j * y[m:]
            zz = _clamp_to_disk(zz, 1e-12)
            dz = dw / self.deriv(zz)
            return np.r_[dz.real, dz.imag]

        sol = solve_ivp(rhs, (0.0, 1.0), np.r_[z0.real, z0.imag], rtol=1e-6, atol=1e-8)
        z = sol.y[:m, -1] + 1j * sol.y[m:, -1]
        z = _clamp_to_disk(z, 1e-6)
        resid = np.abs(self.forward(z) - flat)
        target = 1e-13 * self.diameter
        active = resid > target
        for _ in range(max_newton):
            if not active.any():
                break
            idx = np.flatnonzero(active)
            fz = self.forward(z[idx]) - flat[idx]
            step = fz / self.deriv(z[idx])
            znew = z[idx] - step
            for _ in range(30):
                bad = np.abs(znew) >= 1
                if not bad.any():
                    break
                step[bad] /= 2
                znew[bad] = z[idx][bad] - step[bad]
            z[idx] = znew
            resid[idx] = np.abs(self.forward(znew) - flat[idx])
            active[idx] = (resid[idx] > target) & (np.abs(step) > 1e-15)
        active = resid > tol
        if active.any() and on_fail == "nan":
            z[active] = np.nan
        elif active.any():
            raise NoConvergence(
                "inverse map Newton iteration stalled",
                {"best": z.reshape(w.shape), "residual": resid.reshape(w.shape)},
            )
        return z.reshape(w.shape) if w.ndim else z[0]

    # -- gauge ------------------------------------------------------------
    def rotated(self, beta: float) -> SchwarzChristoffelMap:
        """The map ``z -> f(exp(i beta) z)``.

        Angles are reduced into ``[0, 2 pi)`` and the polygon labels are
        shifted cyclically so the prevertex angles stay increasing.
        """
        t = np.mod(self.prevertices - beta, 2 * np.pi)
        shift = int(np.argmin(t))
        poly = self.polygon
        if shift:
            idx = np.roll(np.arange(len(t)), -shift)
            poly = _subpolygon(poly, idx)
            t = t[idx]
        return SchwarzChristoffelMap(
            t, np.roll(self.alphas, -shift), self.scale * cmath.exp(1j * beta),
            self.center, poly, self.nqpts, dict(self.info),
        )

    def normalized(self) -> SchwarzChristoffelMap:
        """Rotate the disk so that ``f'(0) > 0``."""
        return self.rotated(-cmath.phase(self.scale))

    # -- serialization ----------------------------------------------------
    def to_dict(self, polygon_file: str | None = None) -> dict:
        return {
            "prevertices": [float(t) for t in self.prevertices],
            "alphas": [float(a) for a in self.alphas],
            "scale": [self.scale.real, self.scale.imag],
            "center": [self.center.real, self.center.imag],
            "polygon_file": polygon_file,
        }

    def save(self, path, polygon_file: str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(polygon_file), indent=1) + "\n")

    @classmethod
    def load(cls, path, polygon: BoundaryPolygon | None = None) -> SchwarzChristoffelMap:
        path = Path(path)
        data = json.loads(path.read_text())
        if polygon is None:
            polygon = read_csv(path.parent / data["polygon_file"])
        return cls(
            np.array(data["prevertices"]), np.array(data["alphas"]),
            complex(*data["scale"]), complex(*data["center"]), polygon,
        )


# ---------------------------------------------------------------------------
# parameter problem


class _ParameterProblem:
    """Residuals and Jacobian in the log-gap unknowns."""

    def __init__(self, poly: BoundaryPolygon, center: complex, nqpts: int):
        self.w = poly.vertices
        self.n = n = len(self.w)
        self.alphas = turning_alphas(self.w)
        self.beta = self.alphas - 1.0
        self.center = center
        self.rule = _quadrature_rule(self.beta, nqpts)
        L = np.abs(np.roll(self.w, -1) - self.w)
        self.side_target = np.log(L[1 : n - 2] / L[0])
        self.center_target = (self.w[0] - center) / (self.w[1] - self.w[0])
        # paths: sides k = 0..n-1 split at the chord midpoint, then 0 -> z_0
        k = np.arange(n)
        self.sng = np.r_[k, (k + 1) % n, 0]
        self.sign = np.r_[np.ones(n), -np.ones(n), -1.0]
        self.owner = np.r_[k, k, n]

    def _paths(self, z):
        n = self.n
        mid = 0.5 * (z + np.roll(z, -1))
        za = np.r_[z, np.roll(z, -1), z[0]]
        zb = np.r_[mid, mid, 0j]
        return za, zb

    def integrals(self, z, want_grad=False, which=None):
        za, zb = self._paths(z)
        sng, sign, owner = self.sng, self.sign, self.owner
        if which is not None:
            sel = np.isin(owner, which)
            za, zb, sng, sign, owner = za[sel], zb[sel], sng[sel], sign[sel], owner[sel]
        r = self.rule
        out, G, panels = _integrate_paths(
            za, zb, sng, sign, owner, self.n + 1, z, self.beta, r.xj, r.wj, r.xl, r.wl, want_grad
        )
        return out, G

    def residual_from_integrals(self, I):
        n = self.n
        sides = I[:n]
        J = I[n]
        # a collapsed gap gives a huge but finite residual, which LM rejects
        mag = np.maximum(np.abs(sides), 1e-300)
        with np.errstate(divide="ignore", invalid="ignore"):
            r_side = np.log(mag[1 : n - 2]) - np.log(mag[0]) - self.side_target
            r_c = J / sides[0] - self.center_target
        r = np.r_[r_side, r_c.real, r_c.imag]
        return np.where(np.isfinite(r), r, 1e8)

    def residual(self, y):
        t, _ = _gaps_to_angles(y)
        I, _ = self.integrals(np.exp(1j * t))
        return self.residual_from_integrals(I)

    def jacobian(self, y):
        n = self.n
        t, p = _gaps_to_angles(y)
        z = np.exp(1j * t)
        I, dI = self.integrals(z, want_grad=True)
        dI[:, 0] = 0.0  # t_0 is pinned
        sides = I[:n]
        J = I[n]
        d_side = (dI[1 : n - 2] / sides[1 : n - 2, None]).real - (dI[0] / sides[0]).real[None, :]
        d_c = (dI[n] * sides[0] - J * dI[0]) / sides[0] ** 2
        Jt = np.vstack([d_side, d_c.real[None, :], d_c.imag[None, :]])[:, 1:]
        # chain rule through t_k = 2 pi sum_{i<k} p_i, p = softmax(0, y)
        P = np.concatenate(([0.0], np.cumsum(p[:-1])))  # P_k = sum_{i<k} p_i
        kk = np.arange(1, n)[:, None]
        jj = np.arange(1, n)[None, :]
        dt_dy = 2 * np.pi * p[None, 1:] * ((jj < kk).astype(float) - P[1:, None])
        return Jt @ dt_dy


def _initial_gaps(poly: BoundaryPolygon, center: complex) -> np.ndarray:
    """Prevertex guess from the angles subtended at the conformal center."""
    v = poly.vertices - center
    ang = np.unwrap(np.angle(v))
    span = np.diff(np.r_[ang, ang[0] + 2 * np.pi])
    L = np.abs(np.roll(poly.vertices, -1) - poly.vertices)
    g = np.where(span > 0, span, 0) + 1e-3 * L / L.sum()
    g = np.maximum(g, 1e-6 * g.max())
    return np.log(g[1:] / g[0])


def _solve_direct(prob: _ParameterProblem, y0: np.ndarray, max_iters: int):
    res = least_squares(
        prob.residual, y0, jac=prob.jacobian, method="lm",
        xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_iters,
    )
    t, p = _gaps_to_angles(res.x)
    I, _ = prob.integrals(np.exp(1j * t))
    r = prob.residual_from_integrals(I)
    worst = float(np.max(np.abs(r))) if r.size else 0.0
    if not np.isfinite(worst):
        worst = np.inf
    info = {"nfev": int(res.nfev), "njev": int(res.njev or 0), "residual": worst, "residuals": r}
    return t, 2 * np.pi * p, I, info


def _interior_alpha(p, q, r) -> float:
    """Interior angle over pi at ``q`` for a counterclockwise ``p, q, r``."""
    return 1.0 - cmath.phase((r - q) / (q - p)) / math.pi


def simplification_ranks(
    vertices: np.ndarray, center: complex, keep: int = 12, spike_alpha: float = SPIKE_ALPHA
) -> np.ndarray:
    """Visvalingam-style removal order that keeps every intermediate polygon simple.

    Returns ``rank[k]``: the step at which vertex ``k`` is removed, or ``n``
    for the ``keep`` survivors. The vertices of rank ``>= n - m`` form a simple
    ``m``-gon containing ``center``. Removals that would sharpen a neighbour
    below ``spike_alpha`` are postponed while others are available, since
    thin spikes crowd the prevertices of the intermediate maps.
    """
    v = np.asarray(vertices, dtype=complex)
    n = len(v)
    rank = np.full(n, n)
    prv = np.roll(np.arange(n), 1)
    nxt = np.roll(np.arange(n), -1)
    alive = np.ones(n, dtype=bool)

    def tri_area(k):
        a, b = v[prv[k]] - v[k], v[nxt[k]] - v[k]
        return abs(a.real * b.imag - a.imag * b.real) / 2

    def in_triangle(p, a, b, c):
        def s(p1, p2, p3):
            return (p1 - p3).real * (p2 - p3).imag - (p2 - p3).real * (p1 - p3).imag

        d1, d2, d3 = s(p, a, b), s(p, b, c), s(p, c, a)
        neg = (d1 < 0) or (d2 < 0) or (d3 < 0)
        pos = (d1 > 0) or (d2 > 0) or (d3 > 0)
        return not (neg and pos)

    def removable(k):
        a, b = v[prv[k]], v[nxt[k]]
        if in_triangle(center, a, v[k], b):
            return False
        idx = np.flatnonzero(alive)
        e1 = v[idx]
        e2 = v[nxt[idx]]
        ok = (idx != prv[k]) & (idx != k) & (idx != prv[prv[k]]) & (idx != nxt[k])
        e1, e2 = e1[ok], e2[ok]
        o1, o2 = _orient(a, b, e1), _orient(a, b, e2)
        o3, o4 = _orient(e1, e2, a), _orient(e1, e2, b)
        return not np.any((o1 * o2 <= 0) & (o3 * o4 <= 0))

    def sharpens(k):
        p, q = prv[k], nxt[k]
        for j, a, b in ((p, v[prv[p]], v[q]), (q, v[p], v[nxt[q]])):
            new = _interior_alpha(a, v[j], b)
            if new < spike_alpha and new < _interior_alpha(v[prv[j]], v[j], v[nxt[j]]):
                return True
        return False

    areas = np.array([tri_area(k) for k in range(n)])
    step = 0
    while alive.sum() > keep:
        order = np.argsort(np.where(alive, areas, np.inf))[: int(alive.sum())]
        k = next((k for k in order if not sharpens(k) and removable(k)), None)
        if k is None:
            k = next((k for k in order if removable(k)), None)
        if k is None:
            break  # nothing removable; the rest all survive
        alive[k] = False
        rank[k] = step
        step += 1
        p, q = prv[k], nxt[k]
        nxt[p], prv[q] = q, p
        areas[p], areas[q] = tri_area(p), tri_area(q)
    return rank


def _orient(p, q, r):
    return np.sign((q - p).real * (r - p).imag - (q - p).imag * (r - p).real)


def _subpolygon(poly: BoundaryPolygon, idx: np.ndarray) -> BoundaryPolygon:
    return BoundaryPolygon(
        vertices=poly.vertices[idx],
        words=[poly.words[i] for i in idx],
        sort_keys=poly.sort_keys[idx],
        seed=poly.seed,
        max_word_length=poly.max_word_length,
        dropped=dict(poly.dropped),
    )


def _insert_prevertices(fmap: SchwarzChristoffelMap, idx_old, idx_new, vertices) -> np.ndarray:
    """Guess angles for a refined vertex set from the coarse boundary correspondence.

    A vertex inserted between coarse neighbours ``i`` and ``j`` is placed where
    the coarse map reaches the same arclength fraction of the edge ``[w_i, w_j]``.
    """
    n_all = len(vertices)
    pos_old = {int(k): i for i, k in enumerate(idx_old)}
    m = len(idx_old)
    t_old = fmap.prevertices
    t_new = np.empty(len(idx_new))
    pending_edge, pending_frac, pending_slot = [], [], []
    members = set(int(x) for x in idx_new)
    for slot, k in enumerate(idx_new):
        if int(k) in pos_old:
            t_new[slot] = t_old[pos_old[int(k)]]
    # group inserted vertices by the coarse edge they fall on
    for e in range(m):
        a, b = int(idx_old[e]), int(idx_old[(e + 1) % m])
        path = [a]
        k = (a + 1) % n_all
        while k != b:
            path.append(k)
            k = (k + 1) % n_all
        path.append(b)
        pts = vertices[path]
        arc = np.r_[0.0, np.cumsum(np.abs(np.diff(pts)))]
        frac = arc / arc[-1]
        for p_i, k in enumerate(path[1:-1], start=1):
            if k in members:
                pending_edge.append(e)
                pending_frac.append(frac[p_i])
                pending_slot.append(int(np.searchsorted(idx_new, k)))
    if not pending_edge:
        return t_new
    e = np.array(pending_edge)
    s = np.clip(np.array(pending_frac), 1e-12, 1 - 1e-12)
    ta = t_old[e]
    tb = np.where(e + 1 < m, t_old[(e + 1) % m], t_old[0] + 2 * np.pi)
    wa = fmap.vertices[e]
    L = np.abs(fmap.vertices[(e + 1) % m] - wa)
    lo, hi = np.zeros(len(e)), np.ones(len(e))
    for _ in range(48):
        u = 0.5 * (lo + hi)
        w = fmap.forward(np.exp(1j * (ta + u * (tb - ta))))
        g = np.abs(w - wa) / L - s
        lo = np.where(g < 0, u, lo)
        hi = np.where(g >= 0, u, hi)
    u = 0.5 * (lo + hi)
    t_new[np.array(pending_slot)] = ta + u * (tb - ta)
    return t_new


def _culprit(diag: dict, idx_new: np.ndarray, fresh: list[int]) -> int:
    """Newly inserted slot closest to the worst side-length residual."""
    r = np.abs(diag["residuals"][:-2])
    m = len(idx_new)
    if r.size == 0:
        return fresh[0]
    side = int(np.argmax(r)) + 1  # residual i belongs to side i + 1
    dist = [min(abs(s - side), abs(s - side - 1), m - abs(s - side)) for s in fresh]
    return fresh[int(np.argmin(dist))]


def _normalize_angles(t: np.ndarray) -> np.ndarray:
    t = np.mod(t - t[0], 2 * np.pi)
    t[0] = 0.0
    return t


def _first_success(solve, guesses):
    """Result of ``solve`` for the first guess that neither stalls nor crowds."""
    for i, y0 in enumerate(guesses):
        try:
            return solve(y0)
        except (NoConvergence, CrowdingOverflow):
            if i == len(guesses) - 1:
                raise
            log.debug("start guess %d failed; trying the next", i)


def solve_parameter_problem(
    poly: BoundaryPolygon | np.ndarray,
    center: complex | None = None,
    nqpts: int = 8,
    tol: float = 1e-8,
    max_iters: int = 200,
    gap_min: float = GAP_MIN,
    initial: str = "continuation",
    drop_crowded: bool = False,
    crowding_floor: float = 1e-8,
    growth: float = 1.5,
    tol_vertex: float = TOL_VERTEX,
) -> SchwarzChristoffelMap:
    """Solve for prevertices and scale so the disk maps onto ``poly``.

    The gauge pins ``t_0 = 0`` and sends the origin to ``center`` (the area
    centroid by default). With ``initial="continuation"`` the problem is
    first solved on a simplified polygon and refined by inserting vertices.
    ``drop_crowded`` removes vertices whose prevertex gap would fall below
    ``crowding_floor`` instead of raising :class:`CrowdingOverflow`; the
    returned map then carries the reduced polygon and
    ``polygon.dropped["crowding"]``.
    """
    if not isinstance(poly, BoundaryPolygon):
        poly = polygon_from_vertices(poly)
    n = len(poly)
    if n < 3:
        raise ValueError("a polygon needs at least 3 vertices")
    if center is None:
        center = poly.centroid()
    center = complex(center)
    if not point_in_polygon(poly.vertices, center):
        raise OutsideDomain("conformal center must lie inside the polygon")
    closure = abs(np.sum(1 - turning_alphas(poly.vertices)) - 2)
    if closure > 1e-10:
        raise ValueError(f"turning angles do not close (error {closure:.2e}); polygon not simple/ccw?")
    floor = max(gap_min, crowding_floor) if drop_crowded else gap_min

    def finish(sub, t, gaps, I, info):
        info.pop("residuals", None)
        info["min_gap"] = float(gaps.min())
        if gaps.min() < gap_min:
            raise CrowdingOverflow(f"prevertex gap {gaps.min():.3e} below {gap_min:.1e}")
        if info["residual"] > tol:
            raise NoConvergence(
                f"parameter problem residual {info['residual']:.3e} > {tol:.1e}",
                {"prevertices": t, **info},
            )
        alphas = turning_alphas(sub.vertices)
        scale = (sub.vertices[1] - sub.vertices[0]) / I[0]
        fmap = SchwarzChristoffelMap(t, alphas, scale, center, sub, nqpts, info)
        err = float(np.max(fmap.vertex_errors()))
        fmap.info["max_vertex_error"] = err
        if err > tol_vertex * sub.diameter:
            raise NoConvergence(
                f"vertex interpolation error {err:.3e} exceeds tolerance",
                {"max_vertex_error": err, **info},
            )
        return fmap

    if initial in ("equal", "subtended"):
        prob = _ParameterProblem(poly, center, nqpts)
        y = np.zeros(n - 1) if initial == "equal" else _initial_gaps(poly, center)
        t, gaps, I, info = _solve_direct(prob, y, max_iters)
        return finish(poly, t, gaps, I, info)
    if n <= 12:
        return _first_success(
            lambda y0: finish(poly, *_solve_direct(_ParameterProblem(poly, center, nqpts), y0, max_iters)),
            [_initial_gaps(poly, center), np.zeros(n - 1)],
        )
    if initial != "continuation":
        raise ValueError(f"unknown initial strategy {initial!r}")

    rank = simplification_ranks(poly.vertices, center)
    order = np.argsort(-rank, kind="stable")  # most important first
    excluded = np.zeros(n, dtype=bool)
    levels = 0
    nfev = 0

    def top(m):
        chosen = [k for k in order if not excluded[k]][:m]
        return np.sort(np.array(chosen, dtype=int))

    def solve_level(idx, t0, level_tol):
        nonlocal nfev
        while True:
            sub = _subpolygon(poly, idx)
            prob = _ParameterProblem(sub, center, nqpts)
            t0 = _normalize_angles(t0)
            t, gaps, I, info = _solve_direct(prob, _angles_to_gaps(t0), max_iters)
            nfev += info["nfev"]
            log.debug("level m=%d residual=%.2e min_gap=%.2e nfev=%d", len(idx), info["residual"], gaps.min(), info["nfev"])
            if drop_crowded and gaps.min() < floor and len(idx) > 12:
                k = int(np.argmin(gaps))
                pair = [k, (k + 1) % len(idx)]
                victim = min(pair, key=lambda i: rank[idx[i]])
                log.info("dropping crowded vertex %d (gap %.2e)", idx[victim], gaps.min())
                excluded[idx[victim]] = True
                idx = np.delete(idx, victim)
                t0 = np.delete(t, victim)
                continue
            if gaps.min() < gap_min:
                raise CrowdingOverflow(f"prevertex gap {gaps.min():.3e} below {gap_min:.1e}")
            if info["residual"] > level_tol:
                raise NoConvergence(
                    f"parameter problem residual {info['residual']:.3e} > {level_tol:.1e}",
                    {"prevertices": t, "vertices": len(idx), **info},
                )
            return idx, t, gaps, I, info

    idx = top(12)
    sub = _subpolygon(poly, idx)
    idx, t, gaps, I, info = _first_success(
        lambda y0: solve_level(idx, _gaps_to_angles(y0)[0], tol),
        [_initial_gaps(sub, center), np.zeros(len(idx) - 1)],
    )
    fmap = finish(_subpolygon(poly, idx), t, gaps, I, dict(info))
    n_live = n
    batch = None
    while len(idx) < n_live:
        if batch is None:
            batch = max(1, int(np.ceil(len(idx) * (growth - 1))))
        idx_new = top(min(n_live, len(idx) + batch))
        t_guess = _insert_prevertices(fmap, idx, idx_new, poly.vertices)
        old = set(int(k) for k in idx)
        fresh = [s for s in range(len(idx_new)) if int(idx_new[s]) not in old]
        if drop_crowded:
            g = np.diff(np.r_[t_guess, t_guess[0] + 2 * np.pi])
            bad = [s for s in fresh if min(g[s], g[s - 1]) < floor]
            if bad:
                excluded[idx_new[bad]] = True
                n_live = n - int(excluded.sum())
                continue
        try:
            idx, t, gaps, I, info = solve_level(idx_new, t_guess, tol)
        except (NoConvergence, CrowdingOverflow) as exc:
            if drop_crowded and isinstance(exc, NoConvergence):
                victim = _culprit(exc.diagnostics, idx_new, fresh)
                log.info("dropping vertex %d that defeats the solver", idx_new[victim])
                excluded[idx_new[victim]] = True
                n_live = n - int(excluded.sum())
                continue
            if len(fresh) > 1:
                batch = max(1, len(fresh) // 2)
                log.debug("refinement step failed; retrying with %d insertions", batch)
                continue
            if not drop_crowded:
                raise
            log.info("dropping vertex %d that defeats the solver", idx_new[fresh[0]])
            excluded[idx_new[fresh[0]]] = True
            n_live = n - int(excluded.sum())
            continue
        fmap = finish(_subpolygon(poly, idx), t, gaps, I, dict(info))
        n_live = n - int(excluded.sum())
        levels += 1
        batch = None
    fmap.info.update(levels=levels, nfev_total=nfev)
    dropped = int(excluded.sum())
    if dropped:
        fmap.polygon.dropped["crowding"] = dropped
        log.info("crowding filter dropped %d vertices", dropped)
    return fmap


# module-level spellings of the map operations


def forward(fmap: SchwarzChristoffelMap, z):
    return fmap.forward(z)


def deriv(fmap: SchwarzChristoffelMap, z):
    return fmap.deriv(z)


def inverse(fmap: SchwarzChristoffelMap, w):
    return fmap.inverse(w)


def hyperbolic_distance(z, w):
    """Distance for the curvature -1 metric ``4|dz|^2 / (1-|z|^2)^2``."""
    z, w = np.asarray(z), np.asarray(w)
    return 2 * np.arctanh(np.abs(z - w) / np.abs(1 - np.conj(w) * z))


def koebe_ratio(fmap: SchwarzChristoffelMap, z, w):
    """``|f'(z)|(1-|z|^2) / (|f'(w)|(1-|w|^2))``; bounded by ``exp(2 dist(z, w))``."""
    z, w = np.asarray(z), np.asarray(w)
    return (np.abs(fmap.deriv(z)) * (1 - np.abs(z) ** 2)) / (np.abs(fmap.deriv(w)) * (1 - np.abs(w) ** 2))


def negative_jacobian_count(fmap: SchwarzChristoffelMap, n_r: int = 64, n_theta: int = 64, r_max: float = 0.95) -> int:
    """Polar grid cells whose images are not positively oriented."""
    r = np.linspace(0, r_max, n_r + 1)[1:]
    th = np.linspace(0, 2 * np.pi, n_theta + 1)
    Z = r[:, None] * np.exp(1j * th[None, :])
    W = fmap.forward(Z.ravel()).reshape(Z.shape)
    a, b = W[:-1, :-1], W[1:, :-1]
    c, d = W[1:, 1:], W[:-1, 1:]
    quad = np.stack([a, b, c, d], axis=-1)
    area = 0.5 * (quad.conj() * np.roll(quad, -1, axis=-1)).imag.sum(axis=-1)
    return int(np.count_nonzero(area <= 0))
