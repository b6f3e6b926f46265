"""Moebius transformations of the Riemann sphere and disk automorphisms.

Matrices are kept in SL(2, C): every constructor divides by a square root of
the determinant. The sign of that root is never fixed globally, so callers
should only rely on sign-invariant quantities (squared trace, ``1/d**2``,
images of points).
"""
from __future__ import annotations

import cmath
import enum
from dataclasses import dataclass

import numpy as np

from brennan.errors import NotDiskPreserving, PoleAtOrigin

ALG_TOL = 1e-12
GEOM_TOL = 1e-9


class _Infinity:
    """The point at infinity of the Riemann sphere."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def is_infinite(z) -> bool:
    return z is INF


class MoebiusType(str, enum.Enum):
    IDENTITY = "identity"
    PARABOLIC = "parabolic"
    ELLIPTIC = "elliptic"
    LOXODROMIC = "hyperbolic/loxodromic"


@dataclass(frozen=True)
class MoebiusMap:
    """``z -> (a z + b) / (c z + d)`` stored with ``a d - b c = 1``."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        a, b, c, d = (complex(x) for x in (self.a, self.b, self.c, self.d))
        det = a * d - b * c
        if det == 0:
            raise ValueError("singular matrix does not define a Moebius map")
        # already normalized (e.g. read back from JSON): keep the bits
        s = 1.0 if abs(det - 1) <= 4e-16 else cmath.sqrt(det)
        for name, v in zip("abcd", (a, b, c, d)):
            object.__setattr__(self, name, v / s)

    @classmethod
    def from_matrix(cls, m) -> MoebiusMap:
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    @property
    def trace(self) -> complex:
        return self.a + self.d

    def __matmul__(self, other: MoebiusMap) -> MoebiusMap:
        return compose(self, other)

    def __call__(self, z):
        return apply(self, z)

    def inverse(self) -> MoebiusMap:
        return inverse(self)

    def to_dict(self) -> dict:
        return {k: [getattr(self, k).real, getattr(self, k).imag] for k in "abcd"}

    @classmethod
    def from_dict(cls, data: dict) -> MoebiusMap:
        return cls(*(complex(*data[k]) for k in "abcd"))


IDENTITY = MoebiusMap(1, 0, 0, 1)

# eta(z) = i (1 + z) / (1 - z) sends the unit disk onto the upper half-plane.
ETA = MoebiusMap(1j, 1j, -1, 1)


def compose(m1: MoebiusMap, m2: MoebiusMap) -> MoebiusMap:
    """Matrix product ``m1 @ m2`` (apply ``m2`` first)."""
    return MoebiusMap(
        m1.a * m2.a + m1.b * m2.c,
        m1.a * m2.b + m1.b * m2.d,
        m1.c * m2.a + m1.d * m2.c,
        m1.c * m2.b + m1.d * m2.d,
    )


def inverse(m: MoebiusMap) -> MoebiusMap:
    return MoebiusMap(m.d, -m.b, -m.c, m.a)


def commutator(m1: MoebiusMap, m2: MoebiusMap) -> MoebiusMap:
    """``m1 m2 m1^-1 m2^-1``."""
    return m1 @ m2 @ inverse(m1) @ inverse(m2)


def conjugate(m: MoebiusMap, by: MoebiusMap) -> MoebiusMap:
    """``by^-1 m by``."""
    return inverse(by) @ m @ by


def apply(m: MoebiusMap, z):
    """Act on a point of the Riemann sphere.

    ``z`` may be a complex number, :data:`INF`, or a numpy array of finite
    complex numbers (in which case poles come back as complex infinities).
    """
    if isinstance(z, np.ndarray):
        return (m.a * z + m.b) / (m.c * z + m.d)
    if z is INF:
        return INF if m.c == 0 else m.a / m.c
    z = complex(z)
    den = m.c * z + m.d
    if den == 0:
        return INF
    return (m.a * z + m.b) / den


def deriv_at(m: MoebiusMap, z):
    """Derivative ``1 / (c z + d)**2`` at a finite point."""
    return 1.0 / (m.c * z + m.d) ** 2


def deriv_at_zero(m: MoebiusMap) -> complex:
    if abs(m.d) < 1e-300:
        raise PoleAtOrigin("map has a pole at the origin")
    return 1.0 / (m.d * m.d)


def classify(m: MoebiusMap, tol: float = GEOM_TOL) -> MoebiusType:
    if abs(m.b) <= ALG_TOL and abs(m.c) <= ALG_TOL and abs(m.a - m.d) <= ALG_TOL:
        return MoebiusType.IDENTITY
    tr2 = m.trace**2
    if abs(tr2 - 4) <= tol:
        return MoebiusType.PARABOLIC
    if abs(tr2.imag) <= tol and 0 <= tr2.real < 4:
        return MoebiusType.ELLIPTIC
    return MoebiusType.LOXODROMIC


def preserves_unit_circle(m: MoebiusMap, tol: float = GEOM_TOL) -> bool:
    pts = np.exp(1j * np.array([0.3, 2.4, 4.5]))
    with np.errstate(divide="ignore", invalid="ignore"):
        img = apply(m, pts)
    return bool(np.all(np.isfinite(img)) and np.all(np.abs(np.abs(img) - 1) <= tol))


@dataclass(frozen=True)
class DiskAutomorphism:
    """``z -> lam (z - a) / (1 - conj(a) z)`` with ``|lam| = 1`` and ``|a| < 1``."""

    lam: complex
    a: complex

    def __post_init__(self):
        lam, a = complex(self.lam), complex(self.a)
        if abs(abs(lam) - 1) > ALG_TOL:
            raise ValueError(f"|lambda| must be 1, got {abs(lam)!r}")
        if abs(a) > 1 - ALG_TOL:
            raise ValueError(f"|a| must be < 1, got {abs(a)!r}")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "a", a)

    def __call__(self, z):
        return self.lam * (z - self.a) / (1 - np.conj(self.a) * z)

    def to_dict(self) -> dict:
        return {"lambda": [self.lam.real, self.lam.imag], "a": [self.a.real, self.a.imag]}

    @classmethod
    def from_dict(cls, data: dict) -> DiskAutomorphism:
        return cls(complex(*data["lambda"]), complex(*data["a"]))


def from_disk_aut(aut: DiskAutomorphism) -> MoebiusMap:
    lam, a = aut.lam, aut.a
    return MoebiusMap(lam, -lam * a, -a.conjugate(), 1)


def to_disk_aut(m: MoebiusMap, tol: float = GEOM_TOL) -> DiskAutomorphism:
    if not preserves_unit_circle(m, tol):
        raise NotDiskPreserving("map does not preserve the unit circle")
    if m.a == 0:
        raise NotDiskPreserving("map sends the disk to its exterior")
    a = -m.b / m.a  # preimage of 0
    if abs(a) >= 1:
        raise NotDiskPreserving("map sends the disk to its exterior")
    lam = 1.0 / (m.d * m.d * (1 - abs(a) ** 2))
    return DiskAutomorphism(lam / abs(lam), a)


class CayleyDirection(str, enum.Enum):
    HALFPLANE_TO_DISK = "halfplane_to_disk"
    DISK_TO_HALFPLANE = "disk_to_halfplane"


def cayley(m: MoebiusMap, direction="halfplane_to_disk") -> MoebiusMap:
    """Move ``m`` between the upper half-plane and disk models via ``ETA``.

    ``halfplane_to_disk`` returns ``ETA^-1 m ETA``; ``disk_to_halfplane``
    returns ``ETA m ETA^-1``.
    """
    direction = CayleyDirection(direction)
    if direction is CayleyDirection.HALFPLANE_TO_DISK:
        return inverse(ETA) @ m @ ETA
    return ETA @ m @ inverse(ETA)


def rotation(beta: float) -> MoebiusMap:
    """``z -> exp(i beta) z``."""
    h = cmath.exp(0.5j * beta)
    return MoebiusMap(h, 0, 0, 1 / h)
