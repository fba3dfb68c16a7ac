# Collision cone construction and membership tests between robot pairs.
# Scalar functions work on Vec2 values; the *_mask functions are their
# broadcasting numpy counterparts used by the auction and simulator loops.
import math
from dataclasses import dataclass

import numpy as np

from cata.exceptions import ParameterError


@dataclass(frozen=True)
class Vec2:
    """2-D position (m) or velocity (m/s)."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ParameterError(f"Vec2 components must be finite, got ({self.x}, {self.y})")

    @classmethod
    def of(cls, value) -> "Vec2":
        if isinstance(value, Vec2):
            return value
        x, y = value
        return cls(float(x), float(y))

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def unit(self) -> "Vec2":
        """Unit vector in the same direction; the zero vector stays zero."""
        length = self.norm()
        if length == 0:
            return Vec2(0.0, 0.0)
        return Vec2(self.x / length, self.y / length)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class CollisionCone:
    """Cone of relative velocities from ``apex`` that pass within the safety distance."""

    apex: Vec2
    axis: Vec2
    half_angle: float
    center_distance: float
    safety_distance: float


@dataclass(frozen=True)
class Degenerate:
    """Marker for robots already inside each other's safety disk."""

    center_distance: float
    safety_distance: float


def build_cone(r_i_pos, r_j_pos, safety_distance: float) -> CollisionCone | Degenerate:
    """Builds the collision cone of robot i with respect to robot j.

    Args:
        r_i_pos (Vec2): Position of robot i (the apex).
        r_j_pos (Vec2): Position of robot j.
        safety_distance (float): Predefined safety distance D (m), > 0.

    Returns:
        CollisionCone | Degenerate: ``Degenerate`` when the robots are
        within D of each other.

    Raises:
        ParameterError: If D is not positive or a position is not finite.
    """
    if not (safety_distance > 0 and math.isfinite(safety_distance)):
        raise ParameterError(f"safety_distance must be positive, got {safety_distance}")
    r_i = Vec2.of(r_i_pos)
    r_j = Vec2.of(r_j_pos)
    offset = r_j - r_i
    distance = offset.norm()
    if distance <= safety_distance:
        return Degenerate(distance, safety_distance)
    return CollisionCone(
        apex=r_i,
        axis=offset.unit(),
        half_angle=math.asin(safety_distance / distance),
        center_distance=distance,
        safety_distance=safety_distance,
    )


def relative_velocity_in_cone(cone: CollisionCone | Degenerate, v_i, v_j) -> bool:
    """Tests whether v_ij = v_i - v_j lies strictly inside the cone.

    A degenerate cone always counts as a predicted collision; a zero relative
    velocity never does (for a proper cone).
    """
    if isinstance(cone, Degenerate):
        return True
    v_ij = Vec2.of(v_i) - Vec2.of(v_j)
    if v_ij.norm() == 0:
        return False
    angle = math.atan2(abs(cone.axis.cross(v_ij)), cone.axis.dot(v_ij))
    return angle < cone.half_angle


def min_future_separation(r_i_pos, v_i, r_j_pos, v_j) -> float:
    """Closest approach distance of two constant-velocity robots over t >= 0."""
    p = Vec2.of(r_i_pos) - Vec2.of(r_j_pos)
    v = Vec2.of(v_i) - Vec2.of(v_j)
    speed_sq = v.dot(v)
    if speed_sq == 0:
        return p.norm()
    t_star = max(0.0, -p.dot(v) / speed_sq)
    return (p + v * t_star).norm()


def in_cone_mask(rel_pos, rel_vel, safety_distance: float) -> np.ndarray:
    """Vectorized cone membership.

    Args:
        rel_pos (array_like): R_j - R_i, shape (..., 2).
        rel_vel (array_like): v_i - v_j, shape (..., 2), broadcastable with rel_pos.
        safety_distance (float): D (m).

    Returns:
        np.ndarray: Boolean array of the broadcast shape, True where the
        relative velocity is inside C_ij or the cone is degenerate.
    """
    rel_pos = np.asarray(rel_pos, dtype=float)
    rel_vel = np.asarray(rel_vel, dtype=float)
    rel_pos, rel_vel = np.broadcast_arrays(rel_pos, rel_vel)
    distance = np.hypot(rel_pos[..., 0], rel_pos[..., 1])
    speed = np.hypot(rel_vel[..., 0], rel_vel[..., 1])
    cross = rel_pos[..., 0] * rel_vel[..., 1] - rel_pos[..., 1] * rel_vel[..., 0]
    dot = rel_pos[..., 0] * rel_vel[..., 0] + rel_pos[..., 1] * rel_vel[..., 1]
    angle = np.arctan2(np.abs(cross), dot)
    degenerate = distance <= safety_distance
    with np.errstate(divide="ignore", invalid="ignore"):
        half_angle = np.arcsin(np.clip(safety_distance / distance, 0.0, 1.0))
    inside = (speed > 0) & (angle < half_angle)
    return degenerate | inside


def unit_rows(vectors) -> np.ndarray:
    """Row-wise unit vectors; zero rows stay zero."""
    vectors = np.asarray(vectors, dtype=float)
    norms = np.hypot(vectors[..., 0], vectors[..., 1])[..., None]
    safe = np.where(norms > 0, norms, 1.0)
    return np.where(norms > 0, vectors / safe, 0.0)


def min_future_separation_array(rel_pos, rel_vel) -> np.ndarray:
    """Vectorized closest approach, with rel_pos = R_i - R_j and rel_vel = v_i - v_j."""
    rel_pos = np.asarray(rel_pos, dtype=float)
    rel_vel = np.asarray(rel_vel, dtype=float)
    speed_sq = np.sum(rel_vel * rel_vel, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_star = np.where(speed_sq > 0, -np.sum(rel_pos * rel_vel, axis=-1) / speed_sq, 0.0)
    t_star = np.maximum(t_star, 0.0)
    closest = rel_pos + rel_vel * t_star[..., None]
    return np.hypot(closest[..., 0], closest[..., 1])


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Whether closed segments p1-p2 and q1-q2 share a point."""
    p1, p2, q1, q2 = (Vec2.of(v) for v in (p1, p2, q1, q2))

    def orient(a: Vec2, b: Vec2, c: Vec2) -> int:
        value = (b - a).cross(c - a)
        if abs(value) <= 1e-12:
            return 0
        return 1 if value > 0 else -1

    def on_segment(a: Vec2, b: Vec2, c: Vec2) -> bool:
        return (
            min(a.x, b.x) - 1e-12 <= c.x <= max(a.x, b.x) + 1e-12
            and min(a.y, b.y) - 1e-12 <= c.y <= max(a.y, b.y) + 1e-12
        )

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_segment(p1, p2, q1):
        return True
    if o2 == 0 and on_segment(p1, p2, q2):
        return True
    if o3 == 0 and on_segment(q1, q2, p1):
        return True
    if o4 == 0 and on_segment(q1, q2, p2):
        return True
    return False


def rotate(vectors, angles) -> np.ndarray:
    """Rotates 2-D vectors counterclockwise by ``angles`` (radians), broadcasting."""
    vectors = np.asarray(vectors, dtype=float)
    angles = np.asarray(angles, dtype=float)
    c, s = np.cos(angles), np.sin(angles)
    x, y = vectors[..., 0], vectors[..., 1]
    return np.stack([c * x - s * y, s * x + c * y], axis=-1)
