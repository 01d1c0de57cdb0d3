"""Shared fixtures: small recovery problems reused across solver tests."""

import numpy as np
import pytest

from redlab import (
    Denoiser,
    Image,
    LinearSymmetricDenoiser,
    RedProblem,
    TdtDenoiser,
    awgn,
    make_uniform_blur,
    solver_scene,
)


class IdentityDenoiser(Denoiser):
    """f(x) = x, for closed-form checks where the prior term must vanish."""

    def apply(self, x: Image) -> Image:
        return x


@pytest.fixture
def identity_denoiser():
    return IdentityDenoiser()


@pytest.fixture(scope="session")
def blur16_linear_problem():
    """16x16 periodic deblurring regularized by the symmetric local average."""
    truth = solver_scene(size=16, index=0)
    op = make_uniform_blur(3)
    y = awgn(op.apply(truth), 2.0, seed=5)
    den = LinearSymmetricDenoiser.local_average((16, 16))
    return RedProblem(operator=op, y=y, noise_variance=2.0, weight=0.02,
                      denoiser=den)


@pytest.fixture(scope="session")
def blur16_tdt_problem():
    """Same instance regularized by a wavelet soft-threshold denoiser."""
    truth = solver_scene(size=16, index=0)
    op = make_uniform_blur(3)
    y = awgn(op.apply(truth), 2.0, seed=5)
    return RedProblem(operator=op, y=y, noise_variance=2.0, weight=0.02,
                      denoiser=TdtDenoiser(0.5))
