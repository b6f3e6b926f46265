"""Fit the conformally conjugated generators as disk automorphisms.

For a group element ``X`` preserving the polygon's domain, ``f^-1 o X o f``
is (approximately) a disk automorphism ``lam (z - a) / (1 - conj(a) z)``.
We sample the disk, push samples through the conjugate and fit ``(lam, a)``
by nonlinear least squares with ``lam = exp(i phi)`` and
``a = (u + i v) / sqrt(1 + u^2 + v^2)``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from brennan.conformal import SchwarzChristoffelMap
from brennan.errors import NoConvergence, TooFewValidSamples
from brennan.moebius import DiskAutomorphism, MoebiusMap, apply

log = logging.getLogger(__name__)

GRAD_TOL = 1e-10
MIN_SAMPLES = 8


@dataclass(frozen=True)
class FitResult:
    estimate: DiskAutomorphism
    residual_rms: float
    sample_count: int
    seed: int | None
    converged: bool
    dropped: int = 0
    grad_norm: float = 0.0

    @property
    def components(self) -> np.ndarray:
        """``(Re lam, Im lam, Re a, Im a)``."""
        lam, a = self.estimate.lam, self.estimate.a
        return np.array([lam.real, lam.imag, a.real, a.imag])

    def to_dict(self) -> dict:
        d = self.estimate.to_dict()
        d.update(
            residual_rms=self.residual_rms,
            n=self.sample_count,
            dropped=self.dropped,
            converged=self.converged,
        )
        return d

    @classmethod
    def from_dict(cls, data: dict, seed: int | None = None) -> FitResult:
        return cls(
            DiskAutomorphism.from_dict(data),
            float(data["residual_rms"]),
            int(data["n"]),
            seed,
            bool(data["converged"]),
            int(data.get("dropped", 0)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> FitResult:
        return cls.from_dict(json.loads(Path(path).read_text()))


def sample_disk(n: int, seed: int, max_radius: float = 1.0) -> np.ndarray:
    """``n`` points uniform by area in ``|z| < max_radius`` (rejection sampling)."""
    if not 0 < max_radius <= 1:
        raise ValueError("max_radius must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    out = np.empty(0, dtype=complex)
    while out.size < n:
        xy = rng.uniform(-max_radius, max_radius, size=(2 * n, 2))
        z = xy[:, 0] + 1j * xy[:, 1]
        out = np.r_[out, z[np.abs(z) < max_radius]]
    return out[:n]


def _unpack(x):
    phi, u, v = x
    s = math.sqrt(1 + u * u + v * v)
    return complex(math.cos(phi), math.sin(phi)), complex(u, v) / s


def _pack(lam: complex, a: complex):
    r = abs(a)
    k = 1 / math.sqrt(1 - r * r)  # inverse of a = p / sqrt(1 + |p|^2)
    p = a * k
    return np.array([math.atan2(lam.imag, lam.real), p.real, p.imag])


def _residuals(x, z, w):
    lam, a = _unpack(x)
    r = w - lam * (z - a) / (1 - np.conj(a) * z)
    return np.r_[r.real, r.imag]


def _jacobian(x, z, w):
    phi, u, v = x
    lam, a = _unpack(x)
    den = 1 - np.conj(a) * z
    M = (z - a) / den
    dM_da = -1 / den
    dM_dabar = (z - a) * z / den**2
    dM_dx = dM_da + dM_dabar
    dM_dy = 1j * (dM_da - dM_dabar)
    s = math.sqrt(1 + u * u + v * v)
    s3 = s**3
    dx_du, dx_dv = 1 / s - u * u / s3, -u * v / s3
    dy_du, dy_dv = -u * v / s3, 1 / s - v * v / s3
    cols = [
        -1j * lam * M,
        -lam * (dM_dx * dx_du + dM_dy * dy_du),
        -lam * (dM_dx * dx_dv + dM_dy * dy_dv),
    ]
    return np.column_stack([np.r_[c.real, c.imag] for c in cols])


def _polish(x, z, w, steps: int = 50):
    """Undamped Gauss-Newton steps; LM tends to stop on its step tolerance first."""
    r = _residuals(x, z, w)
    cost = np.sum(r**2)
    for _ in range(steps):
        J = _jacobian(x, z, w)
        if np.linalg.norm(J.T @ r) <= 0.01 * GRAD_TOL:
            break
        trial = x - np.linalg.lstsq(J, r, rcond=None)[0]
        rt = _residuals(trial, z, w)
        c = np.sum(rt**2)
        if not c <= cost * (1 + 1e-10):
            break
        x, r, cost = trial, rt, c
    x = x.copy()
    x[0] = math.remainder(x[0], 2 * math.pi)
    return x


def _starts(z, w, multistarts):
    a_mean = np.mean(z - w)
    a_zero = z[np.argmin(np.abs(w))]
    seeds = []
    for a0 in (a_mean, a_zero):
        if abs(a0) > 0.9:
            a0 = 0.9 * a0 / abs(a0)
        seeds.append(a0)
    out = []
    for k in range(multistarts):
        phi = 2 * math.pi * k / multistarts - math.pi
        out.append(_pack(complex(math.cos(phi), math.sin(phi)), seeds[k % 2]))
    return out


def fit_from_samples(
    z, w, multistarts: int = 8, seed: int | None = None, dropped: int = 0, raise_on_failure: bool = False
) -> FitResult:
    """Least-squares disk automorphism through point pairs ``z_i -> w_i``."""
    z = np.asarray(z, dtype=complex).ravel()
    w = np.asarray(w, dtype=complex).ravel()
    if z.shape != w.shape:
        raise ValueError("z and w must have the same length")
    if z.size < 2:
        raise ValueError("need at least two sample pairs")
    # canonical order makes the fit independent of sample order
    order = np.lexsort((w.imag, w.real, z.imag, z.real))
    z, w = z[order], w[order]
    best = None
    for x0 in _starts(z, w, multistarts):
        res = least_squares(
            _residuals, x0, jac=_jacobian, args=(z, w), method="lm",
            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000,
        )
        x = _polish(res.x, z, w)
        cost = 0.5 * float(np.sum(_residuals(x, z, w) ** 2))
        if best is None or cost < best[0]:
            best = (cost, x)
    x = best[1]
    lam, a = _unpack(x)
    r = _residuals(x, z, w)
    grad = float(np.linalg.norm(_jacobian(x, z, w).T @ r))
    rms = float(math.sqrt(np.mean(r[: z.size] ** 2 + r[z.size :] ** 2)))
    converged = grad <= GRAD_TOL
    result = FitResult(DiskAutomorphism(lam, a), rms, int(z.size), seed, converged, dropped, grad)
    if not converged:
        log.warning("automorphism fit gradient norm %.2e above %.0e", grad, GRAD_TOL)
        if raise_on_failure:
            raise NoConvergence("automorphism fit did not converge", {"best": result, "grad_norm": grad})
    return result


def conjugated_samples(fmap: SchwarzChristoffelMap, X: MoebiusMap, n: int, seed: int, max_radius: float = 1.0):
    """Pairs ``(z_i, f^-1(X(f(z_i))))`` plus the number of dropped samples."""
    z = sample_disk(n, seed, max_radius)
    img = apply(X, fmap.forward(z))
    ok = np.isfinite(img) & fmap.polygon.contains(np.where(np.isfinite(img), img, 0))
    w = np.full(n, np.nan, dtype=complex)
    if ok.any():
        w[ok] = fmap.inverse(img[ok], on_fail="nan")
    ok &= np.isfinite(w)
    return z[ok], w[ok], int(n - ok.sum())


def fit_disk_automorphism(
    fmap: SchwarzChristoffelMap,
    X: MoebiusMap,
    n: int,
    seed: int,
    max_radius: float = 1.0,
    multistarts: int = 8,
) -> FitResult:
    """Estimate ``f^-1 o X o f`` from ``n`` random disk samples."""
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples")
    z, w, dropped = conjugated_samples(fmap, X, n, seed, max_radius)
    if dropped > n / 2:
        raise TooFewValidSamples(f"{dropped} of {n} samples left the polygon")
    if dropped:
        log.info("automorphism fit dropped %d of %d samples", dropped, n)
    return fit_from_samples(z, w, multistarts, seed, dropped)


# ---------------------------------------------------------------------------
# cluster validation

COMPONENTS = ("re_lambda", "im_lambda", "re_a", "im_a")


@dataclass
class ClusterReport:
    results: list[FitResult]
    main: FitResult
    mean: np.ndarray = field(init=False)
    std: np.ndarray = field(init=False)
    z_scores: np.ndarray = field(init=False)
    z_max: float = 3.0

    def __post_init__(self):
        comps = np.array([r.components for r in self.results])
        self.mean = comps.mean(axis=0)
        self.std = comps.std(axis=0, ddof=1)
        dev = self.main.components - self.mean
        floor = 1e-15 * np.maximum(1.0, np.abs(self.mean))
        self.z_scores = np.abs(dev) / np.maximum(self.std, floor)

    @property
    def consistent(self) -> bool:
        return bool(np.all(self.z_scores <= self.z_max))

    def summary(self) -> dict:
        return {
            "runs": len(self.results),
            "mean": dict(zip(COMPONENTS, self.mean.tolist())),
            "std": dict(zip(COMPONENTS, self.std.tolist())),
            "main": dict(zip(COMPONENTS, self.main.components.tolist())),
            "z_scores": dict(zip(COMPONENTS, self.z_scores.tolist())),
            "consistent": self.consistent,
        }

    def write(self, csv_path, json_path) -> None:
        with open(csv_path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["run", "seed", *COMPONENTS, "residual_rms", "n", "dropped", "converged"])
            for i, r in enumerate(self.results):
                wr.writerow([
                    i, r.seed, *(repr(float(c)) for c in r.components),
                    repr(r.residual_rms), r.sample_count, r.dropped, int(r.converged),
                ])
        Path(json_path).write_text(json.dumps(self.summary(), indent=1) + "\n")


def validate_cluster(results: list[FitResult], main: FitResult, z_max: float = 3.0) -> ClusterReport:
    if len(results) < 5:
        raise ValueError("cluster validation needs at least 5 runs")
    return ClusterReport(list(results), main, z_max=z_max)
