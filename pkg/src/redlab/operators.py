"""Linear forward operators with exact adjoints.

Three concrete operators cover the measurement models used here: identity
(denoising), circular convolution (deblurring with periodic boundaries,
applied via the FFT), and an explicit dense matrix.  Adjoints are exact up
to floating-point rounding, not approximations.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, ShapeError
from .image import Image

__all__ = [
    "CircularConvolution",
    "DenseOperator",
    "IdentityOperator",
    "LinearOperator",
    "operator_matrix",
]


class LinearOperator:
    """Base class: apply / adjoint on images plus shape metadata.

    `in_shape` and `out_shape` are (height, width) tuples, or None for
    operators that accept any shape (identity, circular convolution).
    """

    in_shape: tuple[int, int] | None = None
    out_shape: tuple[int, int] | None = None

    def apply(self, x: Image) -> Image:
        raise NotImplementedError

    def adjoint(self, y: Image) -> Image:
        raise NotImplementedError

    def __call__(self, x: Image) -> Image:
        return self.apply(x)


class IdentityOperator(LinearOperator):
    def apply(self, x: Image) -> Image:
        return x

    def adjoint(self, y: Image) -> Image:
        return y


class CircularConvolution(LinearOperator):
    """2-D convolution with periodic boundary handling.

    The kernel must have odd extents; its center tap aligns with the
    output pixel.  Applications run in the frequency domain, caching one
    transfer function per image shape.
    """

    def __init__(self, kernel: np.ndarray):
        kernel = np.asarray(kernel, dtype=np.float64)
        if kernel.ndim != 2:
            raise ConfigError(f"kernel must be 2-D, got ndim={kernel.ndim}")
        if kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
            raise ConfigError(f"kernel extents must be odd, got {kernel.shape}")
        self.kernel = kernel
        self._transfer: dict[tuple[int, int], np.ndarray] = {}

    def transfer_function(self, shape: tuple[int, int]) -> np.ndarray:
        """DFT of the kernel embedded with its center at the origin."""
        h, w = shape
        kh, kw = self.kernel.shape
        if kh > h or kw > w:
            raise ShapeError(f"kernel {self.kernel.shape} larger than image {shape}")
        cached = self._transfer.get(shape)
        if cached is None:
            padded = np.zeros(shape)
            padded[:kh, :kw] = self.kernel
            padded = np.roll(padded, (-(kh // 2), -(kw // 2)), axis=(0, 1))
            cached = np.fft.fft2(padded)
            self._transfer[shape] = cached
        return cached

    def _convolve(self, x: Image, conjugate: bool) -> Image:
        tf = self.transfer_function(x.pixels.shape)
        if conjugate:
            tf = np.conj(tf)
        out = np.fft.ifft2(np.fft.fft2(x.pixels) * tf).real
        return Image(out)

    def apply(self, x: Image) -> Image:
        return self._convolve(x, conjugate=False)

    def adjoint(self, y: Image) -> Image:
        return self._convolve(y, conjugate=True)


class DenseOperator(LinearOperator):
    """Explicit matrix acting on row-major flattened images."""

    def __init__(self, matrix: np.ndarray, in_shape: tuple[int, int],
                 out_shape: tuple[int, int]):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise ShapeError(f"matrix must be 2-D, got ndim={matrix.ndim}")
        if matrix.shape != (out_shape[0] * out_shape[1], in_shape[0] * in_shape[1]):
            raise ShapeError(
                f"matrix shape {matrix.shape} incompatible with "
                f"in_shape={in_shape}, out_shape={out_shape}"
            )
        self.matrix = matrix
        self.in_shape = in_shape
        self.out_shape = out_shape

    def apply(self, x: Image) -> Image:
        if x.pixels.shape != self.in_shape:
            raise ShapeError(f"expected input shape {self.in_shape}, got {x.pixels.shape}")
        return Image.from_flat(self.matrix @ x.flat, *self.out_shape)

    def adjoint(self, y: Image) -> Image:
        if y.pixels.shape != self.out_shape:
            raise ShapeError(f"expected input shape {self.out_shape}, got {y.pixels.shape}")
        return Image.from_flat(self.matrix.T @ y.flat, *self.in_shape)


def operator_matrix(op: LinearOperator, shape: tuple[int, int]) -> np.ndarray:
    """Materialize an operator as a dense matrix by applying it to a basis."""
    h, w = shape
    n = h * w
    basis = np.zeros(n)
    cols = np.empty((n, n))
    for j in range(n):
        basis[j] = 1.0
        cols[:, j] = op.apply(Image.from_flat(basis, h, w)).flat
        basis[j] = 0.0
    return cols
