"""Spherical bump ``H`` that breaks column-swap symmetry of a dominance function.

Two tents over spherical angles ``(theta, phi)`` are mollified and lifted to
functions ``h_1, h_2`` on a cone ``B`` around the ``e_3`` axis.  The bump is
``H(A) = |A|^2 h_1(A_1/|A|) h_2(A_2/|A|)``.  Adding ``a * H`` to a dominance
function changes neither its values at conformal matrices (no two vectors of
``B`` are perpendicular) nor its 2-homogeneity, yet ``H(D~) > H(D)`` for the
probe matrix ``D`` and its column swap ``D~``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConstructionError

THETA_BOX = (math.pi / 32, 7 * math.pi / 32)
PHI_BOX = (-3 * math.pi / 16, 3 * math.pi / 16)
THETA_TENT = (math.pi / 16, 3 * math.pi / 16)
PEAK_1 = (math.pi / 6, math.pi / 6)
PEAK_2 = (math.pi / 6, 0.0)
DEFAULT_PHI_HALF_WIDTH = 11 * math.pi / 64

PROBE_D = np.array([
    [0.5, math.sqrt(3) / 4],
    [0.0, 0.25],
    [math.sqrt(3) / 2, math.sqrt(3) / 2],
])


def _hat(x, lo, peak, hi):
    x = np.asarray(x, dtype=np.float64)
    up = (x - lo) / (peak - lo)
    down = (hi - x) / (hi - peak)
    return np.clip(np.minimum(up, down), 0.0, 1.0)


def spherical_angles(p):
    """``(r, theta, phi)`` with ``p = r (sin t cos f, sin t sin f, cos t)``."""
    p = np.asarray(p, dtype=np.float64)
    r = np.linalg.norm(p, axis=-1)
    safe = np.where(r > 0, r, 1.0)
    theta = np.arccos(np.clip(p[..., 2] / safe, -1.0, 1.0))
    phi = np.arctan2(p[..., 1], p[..., 0])
    return r, theta, phi


def sphere_point(r, theta, phi):
    return r * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


@dataclass
class BumpH:
    """Callable bump ``H`` on stacks of ``3 x 2`` matrices."""

    k: float
    mollify_radius: float
    phi_half_width: float
    offsets: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    probe_values: dict = field(default_factory=dict)

    def tent(self, which: int, theta, phi):
        peak = PEAK_1 if which == 1 else PEAK_2
        w = self.phi_half_width
        return _hat(theta, THETA_TENT[0], peak[0], THETA_TENT[1]) * _hat(phi, -w, peak[1], w)

    def mollified(self, which: int, theta, phi):
        """Angular mollification of tent ``which`` by direct quadrature."""
        theta = np.asarray(theta, dtype=np.float64)[..., None]
        phi = np.asarray(phi, dtype=np.float64)[..., None]
        vals = self.tent(which, theta - self.offsets[:, 0], phi - self.offsets[:, 1])
        return vals @ self.weights

    def lifted(self, which: int, p):
        """``h_i(p) = |p|^k (eta * g_i)(F^{-1}(p))`` where ``g_i = r * tent_i``.

        ``g_i`` is linear in ``r``, so mollifying in ``r`` with a symmetric
        kernel returns ``r`` times the angular mollification.
        """
        r, theta, phi = spherical_angles(p)
        return r ** self.k * r * self.mollified(which, theta, phi)

    def __call__(self, A):
        A = np.asarray(A, dtype=np.float64)
        n2 = np.sum(A[..., :, 0] ** 2, axis=-1) + np.sum(A[..., :, 1] ** 2, axis=-1)
        n = np.sqrt(n2)
        safe = np.where(n > 0, n, 1.0)[..., None]
        h1 = self.lifted(1, A[..., :, 0] / safe)
        h2 = self.lifted(2, A[..., :, 1] / safe)
        out = np.where(n > 0, n2 * h1 * h2, 0.0)
        return float(out) if out.ndim == 0 else out

    def swap_margin(self) -> float:
        """``H(D~) - H(D)`` for the shipped probe matrix."""
        return float(self(PROBE_D[:, ::-1]) - self(PROBE_D))


def _kernel_nodes(radius: float, per_axis: int):
    ticks = (np.arange(per_axis) + 0.5) / per_axis * 2.0 - 1.0
    u, v = np.meshgrid(ticks, ticks, indexing="ij")
    rho2 = u * u + v * v
    inside = rho2 < 1.0
    w = (1.0 - rho2[inside]) ** 3
    offsets = radius * np.stack([u[inside], v[inside]], axis=-1)
    return offsets, w / w.sum()


def build_bump_H(k: float = 4.0, mollify_radius: float = 0.02,
                 phi_half_width: float = DEFAULT_PHI_HALF_WIDTH, quadrature_points: int = 41) -> BumpH:
    """Construct ``H``; raises :class:`ConstructionError` when the support leaves the box or the probe inequalities fail."""
    if not k > 2:
        raise ConstructionError(f"k must exceed 2 for C^2 regularity at the origin, got {k}")
    if not mollify_radius > 0:
        raise ConstructionError("mollify_radius must be positive")
    eps = mollify_radius
    support_theta = (THETA_TENT[0] - eps, THETA_TENT[1] + eps)
    support_phi = (-phi_half_width - eps, phi_half_width + eps)
    problems = []
    if not (THETA_BOX[0] < support_theta[0] and support_theta[1] < THETA_BOX[1]):
        problems.append(f"theta support {support_theta} not inside {THETA_BOX}")
    if not (PHI_BOX[0] < support_phi[0] and support_phi[1] < PHI_BOX[1]):
        problems.append(f"phi support {support_phi} not inside {PHI_BOX}")
    if not phi_half_width > PEAK_1[1]:
        problems.append("phi half width must exceed the first peak angle")
    if problems:
        raise ConstructionError("; ".join(problems))

    offsets, weights = _kernel_nodes(eps, quadrature_points)
    bump = BumpH(k=k, mollify_radius=eps, phi_half_width=phi_half_width, offsets=offsets, weights=weights)
    m1_at_1 = float(bump.mollified(1, *PEAK_1))
    m2_at_1 = float(bump.mollified(2, *PEAK_1))
    m2_at_2 = float(bump.mollified(2, *PEAK_2))
    m1_at_2 = float(bump.mollified(1, *PEAK_2))
    bump.probe_values = {
        "g1@peak1": m1_at_1, "g2@peak1": m2_at_1, "g2@peak2": m2_at_2, "g1@peak2": m1_at_2,
    }
    if not (m1_at_1 > m2_at_1 and m2_at_2 > m1_at_2):
        raise ConstructionError(f"probe inequalities fail: {bump.probe_values}")
    return bump
