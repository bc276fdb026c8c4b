"""Points, tangent frames, geodesic steps, rotations and quadrature on S^2."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DomainError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class SpherePoint:
    """Point on the unit sphere; theta is colatitude, phi longitude."""

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.theta <= math.pi):
            raise DomainError(f"theta={self.theta} outside [0, pi]")
        if not (0.0 <= self.phi < TWO_PI):
            raise DomainError(f"phi={self.phi} outside [0, 2pi)")

    @property
    def vector(self):
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    @classmethod
    def from_vector(cls, v):
        theta, phi = vector_to_angles(np.asarray(v, dtype=float))
        return cls(float(theta), float(phi))

    @classmethod
    def from_angles(cls, theta, phi):
        """Build from arbitrary angles, wrapping phi into [0, 2pi)."""
        return cls.from_vector(angles_to_vector(theta, phi))


NORTH = SpherePoint(0.0, 0.0)
SOUTH = SpherePoint(math.pi, 0.0)


def angles_to_vector(theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def vector_to_angles(v):
    """(theta, phi) arrays for unit vectors on the last axis; phi=0 at poles."""
    v = np.asarray(v, dtype=float)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    rho = np.hypot(x, y)
    theta = np.arctan2(rho, z)
    phi = np.where(rho > 0.0, np.mod(np.arctan2(y, x), TWO_PI), 0.0)
    phi = np.where(phi >= TWO_PI, 0.0, phi)
    return theta, phi


def inner_product(x, y):
    """cos of the great-circle distance, clamped to [-1, 1]."""
    v = (math.cos(x.theta) * math.cos(y.theta)
         + math.sin(x.theta) * math.sin(y.theta) * math.cos(x.phi - y.phi))
    return min(1.0, max(-1.0, v))


def distance(x, y):
    return math.acos(inner_product(x, y))


def tangent_frame(v):
    """Orthonormal (e_theta, e_phi) at unit vectors v (last axis).

    At the poles e_theta points along the phi=0 meridian.
    """
    v = np.asarray(v, dtype=float)
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    rho = np.hypot(x, y)
    pole = rho <= 1e-300
    r = np.where(pole, 1.0, rho)
    e1 = np.stack([z * x / r, z * y / r, -rho], axis=-1)
    e2 = np.stack([-y / r, x / r, np.zeros_like(x)], axis=-1)
    if np.any(pole):
        sgn = np.where(z >= 0, 1.0, -1.0)
        e1 = np.where(pole[..., None], np.stack([sgn, 0 * x, 0 * x], axis=-1), e1)
        e2 = np.where(pole[..., None], np.stack([0 * x, 0 * x + 1.0, 0 * x], axis=-1), e2)
    return e1, e2


def exp_map(v, t1, t2):
    """Move unit vectors v by tangent components (t1, t2) along great circles."""
    v = np.asarray(v, dtype=float)
    e1, e2 = tangent_frame(v)
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    r = np.hypot(t1, t2)
    safe = np.where(r > 0, r, 1.0)
    d = (t1[..., None] * e1 + t2[..., None] * e2) / safe[..., None]
    out = np.cos(r)[..., None] * v + np.sin(r)[..., None] * d
    out = out / np.linalg.norm(out, axis=-1, keepdims=True)
    return np.where((r > 0)[..., None], out, v)


def geodesic_step(x, v):
    """Exponential map at x of the tangent vector v = (v1, v2) in the frame
    (e_theta, e_phi)."""
    v1, v2 = float(v[0]), float(v[1])
    if v1 == 0.0 and v2 == 0.0:
        return x
    return SpherePoint.from_vector(exp_map(x.vector, v1, v2))


# rotations (unit quaternions w, x, y, z) --------------------------------

def quat_multiply(a, b):
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array([
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ])


def quat_to_matrix(q):
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_rotation(rng):
    """Haar-uniform rotation as a unit quaternion (subgroup algorithm:
    uniform circle element composed with a uniform coset representative)."""
    u1, u2, u3 = rng.random(3)
    a, b = math.sqrt(1.0 - u1), math.sqrt(u1)
    return np.array([a * math.sin(TWO_PI * u2), a * math.cos(TWO_PI * u2),
                     b * math.sin(TWO_PI * u3), b * math.cos(TWO_PI * u3)])


def rotate(q, x):
    """Apply the rotation q to a SpherePoint or to unit vectors."""
    R = quat_to_matrix(q)
    if isinstance(x, SpherePoint):
        return SpherePoint.from_vector(R @ x.vector)
    return np.asarray(x, dtype=float) @ R.T


# quadrature -------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureGrid:
    """Gauss-Legendre (in cos theta) x uniform (in phi) product rule."""

    n_theta: int
    n_phi: int
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def degree(self):
        """Y_lm Y*_l'm' products with l + l' <= degree integrate exactly."""
        return min(2 * self.n_theta - 1, self.n_phi - 1)

    @property
    def size(self):
        return self.weights.shape[0]

    @property
    def nodes(self):
        return [(SpherePoint(float(t), float(p)), float(w))
                for t, p, w in zip(self.theta, self.phi, self.weights)]

    @property
    def vectors(self):
        return angles_to_vector(self.theta, self.phi)

    def integrate(self, values):
        """Quadrature of values given at the nodes (leading axis)."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))


def build_quadrature(n_theta, n_phi):
    if n_theta < 1 or n_phi < 1:
        raise ArgumentError("quadrature sizes must be positive")
    x, w = np.polynomial.legendre.leggauss(int(n_theta))
    th = np.arccos(x[::-1])
    w = w[::-1]
    ph = TWO_PI * np.arange(n_phi) / n_phi
    T, P = np.meshgrid(th, ph, indexing="ij")
    W = np.repeat(w * (TWO_PI / n_phi), n_phi)
    return QuadratureGrid(int(n_theta), int(n_phi), T.ravel(), P.ravel(), W)
