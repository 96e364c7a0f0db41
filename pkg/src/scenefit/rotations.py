"""Axis-angle rotation helpers.

Rotations are parameterized as axis-angle 3-vectors w (angle = ||w||,
axis = w/||w||).  The exponential map and its analytic derivative are the
differentiable core of forward kinematics; both use Taylor expansions of
the trigonometric coefficients below ``_SMALL_ANGLE`` so values and
gradients stay exact through w = 0.
"""

from __future__ import annotations

import numpy as np

_SMALL_ANGLE = 1e-4

_EYE3 = np.eye(3)
# Basis skew matrices [e_i]x used by the derivative.
_E_SKEW = np.array(
    [
        [[0.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]],
        [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]],
    ]
)


def skew(w: np.ndarray) -> np.ndarray:
    """Cross-product matrix [w]x such that [w]x @ v = w x v."""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


def _sincos_coeffs(theta: float) -> tuple[float, float]:
    """Rodrigues coefficients a = sin(t)/t and b = (1-cos(t))/t^2."""
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0
    return np.sin(theta) / theta, (1.0 - np.cos(theta)) / (theta * theta)


def rodrigues(w: np.ndarray) -> np.ndarray:
    """Rotation matrix of the axis-angle vector w (exponential map)."""
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    a, b = _sincos_coeffs(theta)
    K = skew(w)
    return _EYE3 + a * K + b * (K @ K)


def rodrigues_jacobian(w: np.ndarray) -> np.ndarray:
    """Derivatives dR/dw_i of the exponential map, shape (3, 3, 3).

    Coefficient-wise differentiation of R = I + a[w]x + b[w]x^2 with
        a  = sin(t)/t,          b  = (1-cos(t))/t^2,
        c1 = (t cos t - sin t)/t^3,   c2 = (t sin t - 2(1-cos t))/t^4,
    giving dR/dw_i = c1 w_i [w]x + a [e_i]x
                   + c2 w_i [w]x^2 + b ([e_i]x [w]x + [w]x [e_i]x).
    """
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    a, b = _sincos_coeffs(theta)
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        c1 = -1.0 / 3.0 + t2 / 30.0
        c2 = -1.0 / 12.0 + t2 / 180.0
    else:
        t2 = theta * theta
        c1 = (theta * np.cos(theta) - np.sin(theta)) / (t2 * theta)
        c2 = (theta * np.sin(theta) - 2.0 + 2.0 * np.cos(theta)) / (t2 * t2)
    K = skew(w)
    K2 = K @ K
    out = np.empty((3, 3, 3))
    for i in range(3):
        Ei = _E_SKEW[i]
        out[i] = c1 * w[i] * K + a * Ei + c2 * w[i] * K2 + b * (Ei @ K + K @ Ei)
    return out


def matrix_to_axis_angle(R: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rodrigues` (angle in [0, pi])."""
    R = np.asarray(R, dtype=float)
    cos_t = np.clip((np.trace(R) - 1.0) / 2.0, -1.0, 1.0)
    theta = float(np.arccos(cos_t))
    if theta < 1e-10:
        return np.zeros(3)
    if np.pi - theta < 1e-6:
        # Near pi the off-diagonal construction degenerates; recover the
        # axis from the dominant column of R + I.
        M = (R + _EYE3) / 2.0
        axis = np.sqrt(np.maximum(np.diagonal(M), 0.0))
        k = int(np.argmax(axis))
        axis = M[:, k] / max(axis[k], 1e-12)
        axis = axis / np.linalg.norm(axis)
        # Fix sign using an off-diagonal element.
        if axis[k] < 0:
            axis = -axis
        return axis * theta
    v = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    return v * (theta / (2.0 * np.sin(theta)))


def compose_axis_angle(w_outer: np.ndarray, w_inner: np.ndarray) -> np.ndarray:
    """Axis-angle of rodrigues(w_outer) @ rodrigues(w_inner)."""
    return matrix_to_axis_angle(rodrigues(w_outer) @ rodrigues(w_inner))


def orthonormal_basis(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two unit vectors completing ``axis`` to a right-handed frame."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    ref = np.array([1.0, 0.0, 0.0])
    if abs(axis @ ref) > 0.9:
        ref = np.array([0.0, 1.0, 0.0])
    u = np.cross(ref, axis)
    u = u / np.linalg.norm(u)
    v = np.cross(axis, u)
    return u, v
