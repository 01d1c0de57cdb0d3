"""Numerical probes of denoiser structure and the induced objective.

The explicit regularizer studied here is
    rho(x) = (1/2) x^T (x - f(x)),
and the composite objective
    C(x) = ||A x - y||^2 / (2 sigma^2) + lambda * rho(x).

Three candidate gradient expressions for rho are provided:

* grad_red_romano: x - f(x), valid only when f has a symmetric Jacobian
  and is locally homogeneous;
* grad_red_lh:     x - J x / 2 - J^T x / 2, valid under local homogeneity;
* grad_red_true:   x - f(x)/2 - J^T x / 2, the product-rule gradient,
  valid whenever f is differentiable at x.

The error metrics quantify how far a given denoiser is from satisfying
each expression, using a central-difference Jacobian estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .denoisers import Denoiser
from .errors import ConfigError, DegenerateInputError, DomainError, ShapeError
from .image import Image
from .operators import LinearOperator

__all__ = [
    "JacobianEstimate",
    "RedProblem",
    "SliceSample",
    "analytic_hessian_linear",
    "cost_red",
    "cost_slice",
    "fp_residual",
    "grad_error",
    "grad_red_lh",
    "grad_red_romano",
    "grad_red_true",
    "hessian_rho_red",
    "js_error",
    "lh_error_1",
    "lh_error_2",
    "numerical_gradient_rho",
    "numerical_jacobian",
    "rho_red",
]

DEFAULT_EPSILON = 1e-3


@dataclass(frozen=True)
class JacobianEstimate:
    """Central-difference Jacobian of a denoiser at one image."""

    matrix: np.ndarray
    epsilon: float


def _check_epsilon(eps: float):
    if eps <= 0:
        raise ConfigError(f"step size must be > 0, got {eps}")


def numerical_jacobian(f: Denoiser, x: Image, eps: float = DEFAULT_EPSILON) -> JacobianEstimate:
    """Estimate the Jacobian of f at x by central differences.

    Column n is [f(x + eps e_n) - f(x - eps e_n)] / (2 eps), costing
    exactly 2 N denoiser applications for an N-pixel image.  Columns are
    independent, so the result does not depend on evaluation order.
    """
    _check_epsilon(eps)
    n = x.size
    h, w = x.pixels.shape
    matrix = np.empty((n, n))
    base = x.pixels.copy()
    flat = base.reshape(-1)
    for j in range(n):
        orig = flat[j]
        flat[j] = orig + eps
        plus = f.apply(Image(base)).flat
        flat[j] = orig - eps
        minus = f.apply(Image(base)).flat
        flat[j] = orig
        matrix[:, j] = (plus - minus) / (2.0 * eps)
    return JacobianEstimate(matrix, eps)


def js_error(estimate: JacobianEstimate) -> float:
    """Relative Jacobian-asymmetry energy ||J - J^T||_F^2 / ||J||_F^2."""
    j = estimate.matrix
    denom = float(np.sum(j * j))
    if denom == 0.0:
        raise DegenerateInputError("Jacobian estimate is identically zero")
    return float(np.sum((j - j.T) ** 2)) / denom


def rho_red(f: Denoiser, x: Image) -> float:
    """Explicit regularizer value (1/2) x^T (x - f(x))."""
    fx = f.apply(x)
    return 0.5 * float(x.flat @ (x.flat - fx.flat))


def grad_red_romano(f: Denoiser, x: Image) -> np.ndarray:
    """The denoising-residual rule x - f(x)."""
    return x.flat - f.apply(x).flat


def grad_red_true(f: Denoiser, x: Image, jacobian: JacobianEstimate) -> np.ndarray:
    """Product-rule gradient x - f(x)/2 - J^T x / 2."""
    return x.flat - 0.5 * f.apply(x).flat - 0.5 * (jacobian.matrix.T @ x.flat)


def grad_red_lh(f: Denoiser, x: Image, jacobian: JacobianEstimate) -> np.ndarray:
    """Locally-homogeneous form x - J x / 2 - J^T x / 2."""
    j = jacobian.matrix
    return x.flat - 0.5 * (j @ x.flat) - 0.5 * (j.T @ x.flat)


def numerical_gradient_rho(f: Denoiser, x: Image, eps: float = DEFAULT_EPSILON) -> np.ndarray:
    """Central-difference gradient of rho_red at x (2 N evaluations)."""
    _check_epsilon(eps)
    n = x.size
    grad = np.empty(n)
    base = x.pixels.copy()
    flat = base.reshape(-1)
    for j in range(n):
        orig = flat[j]
        flat[j] = orig + eps
        plus = rho_red(f, Image(base))
        flat[j] = orig - eps
        minus = rho_red(f, Image(base))
        flat[j] = orig
        grad[j] = (plus - minus) / (2.0 * eps)
    return grad


def grad_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Relative squared error ||analytic - numeric||^2 / ||numeric||^2."""
    denom = float(numeric @ numeric)
    if denom == 0.0:
        raise DegenerateInputError("numeric gradient is identically zero")
    diff = analytic - numeric
    return float(diff @ diff) / denom


def lh_error_1(f: Denoiser, x: Image, eps: float = DEFAULT_EPSILON) -> float:
    """Scale-equivariance defect ||f((1+e)x) - (1+e)f(x)||^2 / ||(1+e)f(x)||^2."""
    _check_epsilon(eps)
    scaled = f.apply(Image((1.0 + eps) * x.pixels)).flat
    ref = (1.0 + eps) * f.apply(x).flat
    denom = float(ref @ ref)
    if denom == 0.0:
        raise DegenerateInputError("denoiser output is identically zero")
    diff = scaled - ref
    return float(diff @ diff) / denom


def lh_error_2(f: Denoiser, x: Image, eps: float = DEFAULT_EPSILON,
               jacobian: JacobianEstimate | None = None) -> float:
    """Jacobian-homogeneity defect ||J x - f(x)||^2 / ||f(x)||^2.

    Pass a precomputed estimate to avoid repeating the 2 N denoiser
    applications of the central-difference Jacobian.
    """
    if jacobian is None:
        jacobian = numerical_jacobian(f, x, eps)
    fx = f.apply(x).flat
    denom = float(fx @ fx)
    if denom == 0.0:
        raise DegenerateInputError("denoiser output is identically zero")
    diff = jacobian.matrix @ x.flat - fx
    return float(diff @ diff) / denom


def hessian_rho_red(f: Denoiser, x: Image, eps: float = DEFAULT_EPSILON) -> np.ndarray:
    """Central-difference Hessian of rho_red at x.

    Off-diagonal entries use the standard four-point stencil; the result
    is symmetrized by construction (entry (i, j) is computed once for
    i <= j and mirrored).  Cost is O(N^2) regularizer evaluations, so this
    is intended for small probe images.
    """
    _check_epsilon(eps)
    n = x.size
    hess = np.empty((n, n))
    base = x.pixels.copy()
    flat = base.reshape(-1)

    def rho_shifted(i: int, di: float, j: int, dj: float) -> float:
        orig_i, orig_j = flat[i], flat[j]
        flat[i] = orig_i + di
        flat[j] = flat[j] + dj
        val = rho_red(f, Image(base))
        flat[i], flat[j] = orig_i, orig_j
        return val

    center = rho_red(f, Image(base))
    for i in range(n):
        plus = rho_shifted(i, eps, i, 0.0)
        minus = rho_shifted(i, -eps, i, 0.0)
        hess[i, i] = (plus - 2.0 * center + minus) / eps**2
        for j in range(i + 1, n):
            pp = rho_shifted(i, eps, j, eps)
            pm = rho_shifted(i, eps, j, -eps)
            mp = rho_shifted(i, -eps, j, eps)
            mm = rho_shifted(i, -eps, j, -eps)
            hess[i, j] = (pp - pm - mp + mm) / (4.0 * eps**2)
            hess[j, i] = hess[i, j]
    return hess


def analytic_hessian_linear(w: np.ndarray) -> np.ndarray:
    """Hessian of rho_red for a linear denoiser f(x) = W x: I - W/2 - W^T/2."""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {w.shape}")
    return np.eye(w.shape[0]) - 0.5 * w - 0.5 * w.T


@dataclass
class RedProblem:
    """Composite recovery problem: quadratic fidelity plus lambda * rho_red."""

    operator: LinearOperator
    y: Image
    noise_variance: float
    weight: float
    denoiser: Denoiser

    def __post_init__(self):
        if self.noise_variance <= 0:
            raise ConfigError(
                f"noise variance must be > 0, got {self.noise_variance}"
            )
        if self.weight <= 0:
            raise ConfigError(f"regularization weight must be > 0, got {self.weight}")


def fp_residual(p: RedProblem, x: Image, fx: Image | None = None) -> np.ndarray:
    """First-order residual A^T (A x - y) / sigma^2 + lambda (x - f(x)).

    Zero exactly at fixed points of the iterative solvers.  `fx` may carry
    a precomputed f(x) to avoid a second denoiser application.
    """
    if fx is None:
        fx = p.denoiser.apply(x)
    data = p.operator.adjoint(
        Image(p.operator.apply(x).pixels - p.y.pixels)
    ).flat / p.noise_variance
    return data + p.weight * (x.flat - fx.flat)


def cost_red(p: RedProblem, x: Image, fx: Image | None = None) -> float:
    """Objective value ||A x - y||^2/(2 sigma^2) + lambda (1/2) x^T (x - f(x))."""
    if fx is None:
        fx = p.denoiser.apply(x)
    residual = p.operator.apply(x).pixels - p.y.pixels
    fidelity = float(np.sum(residual**2)) / (2.0 * p.noise_variance)
    return fidelity + p.weight * 0.5 * float(x.flat @ (x.flat - fx.flat))


@dataclass(frozen=True)
class SliceSample:
    """One grid node of a 2-D objective slice."""

    alpha: float
    beta: float
    cost: float
    grad_e1: float
    grad_e2: float


def cost_slice(p: RedProblem, center: Image, e1: np.ndarray, e2: np.ndarray,
               alphas: np.ndarray, betas: np.ndarray) -> list[SliceSample]:
    """Sample C(center + alpha e1 + beta e2) on a grid.

    e1 and e2 must be unit vectors; each sample also records the residual
    projected onto the two directions, so slope information comes with the
    surface.
    """
    e1 = np.asarray(e1, dtype=np.float64).reshape(-1)
    e2 = np.asarray(e2, dtype=np.float64).reshape(-1)
    if e1.size != center.size or e2.size != center.size:
        raise ShapeError("direction vectors must match the image size")
    for name, e in (("e1", e1), ("e2", e2)):
        norm = float(np.linalg.norm(e))
        if abs(norm - 1.0) > 1e-8:
            raise DomainError(f"{name} must be unit-normalized, got norm {norm!r}")
    h, w = center.pixels.shape
    samples = []
    for alpha in np.asarray(alphas, dtype=np.float64):
        for beta in np.asarray(betas, dtype=np.float64):
            point = Image.from_flat(center.flat + alpha * e1 + beta * e2, h, w)
            fx = p.denoiser.apply(point)
            g = fp_residual(p, point, fx)
            samples.append(
                SliceSample(
                    alpha=float(alpha),
                    beta=float(beta),
                    cost=cost_red(p, point, fx),
                    grad_e1=float(g @ e1),
                    grad_e2=float(g @ e2),
                )
            )
    return samples
