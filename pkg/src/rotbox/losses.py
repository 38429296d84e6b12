"""Gaussian modeling of rotated boxes and the regression losses built on it.

A box maps to a 2-D Gaussian with ``mu = (cx, cy)`` and
``sigma = R(theta) diag(w^2/4, h^2/4) R(theta)^T``. Because the mapping
depends only on the box's geometry, the two parameterizations of the same
rectangle (``(w, h, theta)`` and ``(h, w, theta +- 90)``) produce identical
Gaussians, which is what makes the Gaussian losses immune to the
angle-range boundary that plagues raw parameter regression.

All matrix square roots use the closed-form 2x2 trace/determinant formula;
an eigendecomposition implementation serves as the independent test oracle.
Analytic gradients come from forward-mode duals (:mod:`rotbox.autodiff`)
flowing through the same scalar code paths as the float evaluation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Scalar
from .errors import InvalidBoxError, MatrixDomainError
from .geometry import Quad, RBox, rotated_iou

__all__ = [
    "COV_EPS_FLOOR",
    "IOU_LOG_FLOOR",
    "Gaussian2",
    "LossConfig",
    "box_to_gaussian",
    "gwd_distance",
    "kld_divergence",
    "gwd_loss",
    "gwd_loss_grad",
    "kld_loss",
    "kld_loss_grad",
    "smooth_l1",
    "smooth_l1_grad",
    "iou_smooth_l1_loss",
    "iou_smooth_l1_grad",
    "rsdet_modulated_loss",
    "rsdet_modulated_grad",
    "numeric_gradient",
]

COV_EPS_FLOOR = 1e-7   # eigenvalue floor applied before inversion / sqrt
IOU_LOG_FLOOR = 1e-7   # keeps -log(IoU) finite for disjoint pairs

Transform = Literal["sqrt", "log1p"]
KldDirection = Literal["pred_to_gt", "gt_to_pred", "min_symmetric"]


@dataclass(frozen=True)
class LossConfig:
    """Hyperparameters shared by the regression losses.

    ``tau`` and ``transform`` shape the ``1 - 1/(tau + f(D))`` normalization;
    ``smooth_l1_beta`` is the quadratic/linear crossover; ``kld_direction``
    picks which divergence the KLD loss uses.
    """

    tau: float = 1.0
    transform: Transform = "sqrt"
    smooth_l1_beta: float = 1.0
    kld_direction: KldDirection = "pred_to_gt"

    def __post_init__(self):
        if not (self.tau >= 1.0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be >= 1, got {self.tau}")
        if self.transform not in ("sqrt", "log1p"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if not (self.smooth_l1_beta > 0.0 and math.isfinite(self.smooth_l1_beta)):
            raise ValueError(f"smooth_l1_beta must be > 0, got {self.smooth_l1_beta}")
        if self.kld_direction not in ("pred_to_gt", "gt_to_pred", "min_symmetric"):
            raise ValueError(f"unknown kld_direction {self.kld_direction!r}")


@dataclass(frozen=True)
class Gaussian2:
    """2-D Gaussian: mean (2,) and symmetric positive-definite covariance (2, 2)."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=np.float64).reshape(2)
        sigma = np.asarray(self.sigma, dtype=np.float64).reshape(2, 2)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma))):
            raise MatrixDomainError("non-finite Gaussian parameters")
        if abs(sigma[0, 1] - sigma[1, 0]) > 1e-12:
            raise MatrixDomainError(f"covariance not symmetric: {sigma.tolist()}")
        # eigenvalues of a symmetric 2x2: mean +- radius
        mean = 0.5 * (sigma[0, 0] + sigma[1, 1])
        radius = math.hypot(0.5 * (sigma[0, 0] - sigma[1, 1]), sigma[0, 1])
        if mean - radius < COV_EPS_FLOOR * (1.0 - 1e-6):
            raise MatrixDomainError(
                f"covariance eigenvalue {mean - radius} below floor {COV_EPS_FLOOR}"
            )


def _gaussian_params(cx, cy, w, h, theta) -> tuple[Scalar, Scalar, Scalar, Scalar, Scalar]:
    """(mu_x, mu_y, s_xx, s_xy, s_yy) for box parameters; dual-friendly."""
    a = ad.maximum(w * w * 0.25, COV_EPS_FLOOR)
    b = ad.maximum(h * h * 0.25, COV_EPS_FLOOR)
    t = theta * (math.pi / 180.0)
    c, s = ad.cos(t), ad.sin(t)
    sxx = a * c * c + b * s * s
    syy = a * s * s + b * c * c
    sxy = (a - b) * c * s
    return cx, cy, sxx, sxy, syy


def box_to_gaussian(box: RBox) -> Gaussian2:
    """Gaussian model of a rotated box; det(sigma) = (w*h/4)^2 above the floor."""
    _, _, sxx, sxy, syy = _gaussian_params(box.cx, box.cy, box.w, box.h, box.theta)
    return Gaussian2(np.array([box.cx, box.cy]), np.array([[sxx, sxy], [sxy, syy]]))


def _sqrtm2(sxx, sxy, syy) -> tuple[Scalar, Scalar, Scalar]:
    """Principal square root of a symmetric PSD 2x2 matrix, closed form."""
    det = ad.maximum(sxx * syy - sxy * sxy, 0.0)
    sd = ad.sqrt(det)
    denom = ad.sqrt(sxx + syy + 2.0 * sd)
    return (sxx + sd) / denom, sxy / denom, (syy + sd) / denom


def _gwd_sq(m1x, m1y, s1xx, s1xy, s1yy, m2x, m2y, s2xx, s2xy, s2yy) -> Scalar:
    """Squared 2-Wasserstein distance between two Gaussians (scalar core).

    The covariance term Tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2) is evaluated
    in its orthogonal-Procrustes form ||S1^1/2 - S2^1/2 U||_F^2 with U the
    polar rotation of S2^1/2 S1^1/2. The two are algebraically equal, but
    the squared-norm form cannot cancel catastrophically, which keeps the
    distance of a box and its re-parameterized twin at true zero instead of
    sqrt-amplified rounding noise.
    """
    dx, dy = m1x - m2x, m1y - m2y
    xxx, xxy, xyy = _sqrtm2(s1xx, s1xy, s1yy)
    yxx, yxy, yyy = _sqrtm2(s2xx, s2xy, s2yy)
    # M = sqrt(S2) @ sqrt(S1); its polar factor is a rotation since det M >= 0
    m00 = yxx * xxx + yxy * xxy
    m01 = yxx * xxy + yxy * xyy
    m10 = yxy * xxx + yyy * xxy
    m11 = yxy * xxy + yyy * xyy
    tr = m00 + m11
    dif = m01 - m10
    s = ad.sqrt(tr * tr + dif * dif)
    uc, us = tr / s, dif / s  # U = [[uc, us], [-us, uc]]
    r00 = yxx * uc - yxy * us
    r01 = yxx * us + yxy * uc
    r10 = yxy * uc - yyy * us
    r11 = yxy * us + yyy * uc
    e00, e01 = xxx - r00, xxy - r01
    e10, e11 = xxy - r10, xyy - r11
    d2 = dx * dx + dy * dy + e00 * e00 + e01 * e01 + e10 * e10 + e11 * e11
    return ad.maximum(d2, 0.0)


def _kld(m1x, m1y, s1xx, s1xy, s1yy, m2x, m2y, s2xx, s2xy, s2yy) -> Scalar:
    """KL divergence D(N1 || N2) between two Gaussians (scalar core).

    Written against the covariance difference D = S1 - S2:
    Tr(S2^-1 S1) - 2 = Tr(S2^-1 D) and ln(det S2 / det S1) =
    -log1p(Tr(S2^-1 D) + det(S2^-1 D)), so near-equal covariances evaluate
    without cancellation.
    """
    det2 = s2xx * s2yy - s2xy * s2xy
    i00 = s2yy / det2
    i11 = s2xx / det2
    i01 = -s2xy / det2
    dxx, dxy, dyy = s1xx - s2xx, s1xy - s2xy, s1yy - s2yy
    t = i00 * dxx + 2.0 * i01 * dxy + i11 * dyy
    d = (dxx * dyy - dxy * dxy) / det2
    dx, dy = m2x - m1x, m2y - m1y
    maha = i00 * dx * dx + 2.0 * i01 * dx * dy + i11 * dy * dy
    return 0.5 * (t - ad.log1p(t + d) + maha)


def gwd_distance(g1: Gaussian2, g2: Gaussian2) -> float:
    """Squared Gaussian Wasserstein distance; symmetric, >= 0, 0 iff equal."""
    return float(
        _gwd_sq(
            g1.mu[0], g1.mu[1], g1.sigma[0, 0], g1.sigma[0, 1], g1.sigma[1, 1],
            g2.mu[0], g2.mu[1], g2.sigma[0, 0], g2.sigma[0, 1], g2.sigma[1, 1],
        )
    )


def kld_divergence(g1: Gaussian2, g2: Gaussian2) -> float:
    """KL divergence D(g1 || g2) in nats; >= 0, 0 iff equal, asymmetric."""
    return float(
        _kld(
            g1.mu[0], g1.mu[1], g1.sigma[0, 0], g1.sigma[0, 1], g1.sigma[1, 1],
            g2.mu[0], g2.mu[1], g2.sigma[0, 0], g2.sigma[0, 1], g2.sigma[1, 1],
        )
    )


def _normalize(raw: Scalar, cfg: LossConfig) -> Scalar:
    if cfg.transform == "sqrt":
        f = ad.sqrt(ad.maximum(raw, 0.0))
    else:
        f = ad.log1p(ad.maximum(raw, 0.0))
    return 1.0 - 1.0 / (cfg.tau + f)


def _box_params(box: RBox) -> tuple[float, float, float, float, float]:
    return (box.cx, box.cy, box.w, box.h, box.theta)


def _gwd_loss_core(pcx, pcy, pw, ph, pt, gt_params, cfg: LossConfig) -> Scalar:
    p = _gaussian_params(pcx, pcy, pw, ph, pt)
    g = _gaussian_params(*gt_params)
    return _normalize(_gwd_sq(*p, *g), cfg)


def _kld_loss_core(pcx, pcy, pw, ph, pt, gt_params, cfg: LossConfig) -> Scalar:
    p = _gaussian_params(pcx, pcy, pw, ph, pt)
    g = _gaussian_params(*gt_params)
    if cfg.kld_direction == "pred_to_gt":
        d = _kld(*p, *g)
    elif cfg.kld_direction == "gt_to_pred":
        d = _kld(*g, *p)
    else:
        d = ad.minimum(_kld(*p, *g), _kld(*g, *p))
    return _normalize(d, cfg)


def gwd_loss(pred: RBox, gt: RBox, cfg: LossConfig = LossConfig()) -> float:
    """Wasserstein regression loss in [0, 1); 0 iff the boxes share a Gaussian (tau=1)."""
    return float(_gwd_loss_core(*_box_params(pred), _box_params(gt), cfg))


def gwd_loss_grad(pred: RBox, gt: RBox, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Gradient of :func:`gwd_loss` w.r.t. pred's (cx, cy, w, h, theta)."""
    gt_params = _box_params(gt)
    return ad.gradient(lambda *p: _gwd_loss_core(*p, gt_params, cfg), _box_params(pred))


def kld_loss(pred: RBox, gt: RBox, cfg: LossConfig = LossConfig()) -> float:
    """KL regression loss in [0, 1); direction per ``cfg.kld_direction``."""
    return float(_kld_loss_core(*_box_params(pred), _box_params(gt), cfg))


def kld_loss_grad(pred: RBox, gt: RBox, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Gradient of :func:`kld_loss` w.r.t. pred's (cx, cy, w, h, theta)."""
    gt_params = _box_params(gt)
    return ad.gradient(lambda *p: _kld_loss_core(*p, gt_params, cfg), _box_params(pred))


def smooth_l1(x: Scalar, beta: float = 1.0) -> Scalar:
    """Huber-style penalty: quadratic below ``beta``, linear above, C1 at the joint."""
    if beta <= 0.0:
        raise ValueError(f"beta must be > 0, got {beta}")
    a = abs(x)
    if a < beta:
        return 0.5 * x * x / beta
    return a - 0.5 * beta


def smooth_l1_grad(x: float, beta: float = 1.0) -> float:
    """Derivative of :func:`smooth_l1`."""
    if beta <= 0.0:
        raise ValueError(f"beta must be > 0, got {beta}")
    if abs(x) < beta:
        return x / beta
    return math.copysign(1.0, x)


def iou_smooth_l1_loss(pred: RBox, gt: RBox, cfg: LossConfig = LossConfig()) -> float:
    """IoU-valued loss -log(IoU + 1e-7); both boxes must share a convention."""
    if pred.convention is not gt.convention:
        raise InvalidBoxError("iou_smooth_l1_loss needs both boxes in the same convention")
    return -math.log(rotated_iou(pred, gt) + IOU_LOG_FLOOR)


def iou_smooth_l1_grad(pred: RBox, gt: RBox, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Gradient contract of the IoU-smooth-L1 loss.

    Direction comes from the summed smooth-L1 over the five box parameters;
    magnitude is rescaled so the loss value equals ``-log(IoU + 1e-7)``:
    ``grad = grad(u) * |value| / detach(u)`` with
    ``u = sum_i smooth_l1(pred_i - gt_i)``.
    """
    value = iou_smooth_l1_loss(pred, gt, cfg)
    gt_params = _box_params(gt)

    def surrogate(*p):
        u: Scalar = 0.0
        for pi, gi in zip(p, gt_params):
            u = u + smooth_l1(pi - gi, cfg.smooth_l1_beta)
        return u

    u0 = surrogate(*_box_params(pred))
    grad_u = ad.gradient(surrogate, _box_params(pred))
    if u0 <= 0.0:
        return np.zeros(5)
    return grad_u * (abs(value) / u0)


def _rsdet_core(coords: Sequence[Scalar], gt_xy: Sequence[float], beta: float, k: int) -> Scalar:
    total: Scalar = 0.0
    for i in range(4):
        j = (i + k) % 4
        total = total + smooth_l1(coords[2 * j] - gt_xy[2 * i], beta)
        total = total + smooth_l1(coords[2 * j + 1] - gt_xy[2 * i + 1], beta)
    return total


def rsdet_modulated_loss(pred: Quad, gt: Quad, cfg: LossConfig = LossConfig()) -> float:
    """Corner loss minimized over cyclic relabelings of the prediction's vertices."""
    p = [c for xy in pred.vertices for c in xy]
    g = [c for xy in gt.vertices for c in xy]
    return min(float(_rsdet_core(p, g, cfg.smooth_l1_beta, k)) for k in range(4))


def rsdet_modulated_grad(pred: Quad, gt: Quad, cfg: LossConfig = LossConfig()) -> np.ndarray:
    """Gradient of :func:`rsdet_modulated_loss` w.r.t. pred's 8 stored coordinates.

    Evaluated at the minimizing shift; at exact ties between shifts the loss
    is not differentiable and the lowest-index shift is used.
    """
    p = [c for xy in pred.vertices for c in xy]
    g = [c for xy in gt.vertices for c in xy]
    best_k = min(range(4), key=lambda k: float(_rsdet_core(p, g, cfg.smooth_l1_beta, k)))
    return ad.gradient(lambda *c: _rsdet_core(c, g, cfg.smooth_l1_beta, best_k), p)


def numeric_gradient(
    loss: Callable[[np.ndarray], float], at: Sequence[float], step: float = 1e-5
) -> np.ndarray:
    """Central finite-difference gradient: (L(x + s e_i) - L(x - s e_i)) / (2 s)."""
    if step <= 0.0:
        raise ValueError(f"step must be > 0, got {step}")
    x = np.asarray(at, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        out[i] = (loss(hi) - loss(lo)) / (2.0 * step)
    return out
