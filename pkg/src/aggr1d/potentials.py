"""Pointy interaction potentials and velocity nonlinearities.

The whole solver family is driven by an even, Lipschitz, lambda-concave
potential W with a kink at the origin.  For nonlinear transport speeds the
kink must be resolved explicitly: W'' = -c*delta_0 + w in the sense of
distributions, with w continuous and integrable.  This module collects the
potential together with every derived constant the schemes need (lambda,
the Lipschitz bound, the (c, w) data, the antiderivative A of the speed
law) so that downstream code never differentiates anything numerically.

The kink coefficient c is carried explicitly rather than hard-wired to 1;
scaled potentials like -sigma*|x| then keep an exact decomposition
(c = 2*sigma, w = 0).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "KinkDecomposition",
    "PointyPotential",
    "VelocityLaw",
    "make_builtin_potential",
    "make_velocity_law",
    "velocity_sup_bound",
]


@dataclass(frozen=True)
class KinkDecomposition:
    """Data of W'' = -c*delta_0 + w.

    c is the Dirac mass sitting at the kink (c > 0 for attraction), w the
    continuous remainder with L1 norm w0, and ``w_left_integral`` the exact
    antiderivative x -> int_{-inf}^x w(y) dy.  For even w the latter equals
    w0/2 at the origin.

    ``exp_kernel = (amplitude, rate)`` declares w(x) = amplitude*e^{-rate|x|};
    separable, so particle sums over wtilde reduce to prefix sums.
    """

    c: float
    w_eval: Callable[[np.ndarray], np.ndarray]
    w0: float
    w_left_integral: Callable[[np.ndarray], np.ndarray]
    exp_kernel: tuple[float, float] | None = None

    def wtilde(self, x):
        """Continuous part of W': W'(x) = -c*H(x) + wtilde(x) for x != 0.

        wtilde(x) = int_0^x w + c/2, evaluated through the exact left
        integral so there is no quadrature error.
        """
        return self.w_left_integral(x) - 0.5 * self.w0 + 0.5 * self.c


@dataclass(frozen=True)
class PointyPotential:
    """Even Lipschitz potential with one-sided Lipschitz derivative.

    ``wprime_eval`` is only ever called away from the origin; the velocity
    formulas exclude the diagonal term exactly, so W'(0) never matters.

    lam is the concavity constant: W(x) - lam/2 x^2 concave, equivalently
    W'(x) - W'(y) <= lam*(x - y) for x > y away from 0.
    """

    name: str
    w_eval: Callable[[np.ndarray], np.ndarray]
    wprime_eval: Callable[[np.ndarray], np.ndarray]
    lam: float
    lip: float
    decomposition: KinkDecomposition | None = None


@dataclass(frozen=True)
class VelocityLaw:
    """Nondecreasing C^1 speed law a with antiderivative A, A(0) = 0.

    alpha bounds a' from above; the upwind CFL and the one-sided Lipschitz
    diagnostics both consume it.
    """

    name: str
    a_eval: Callable[[np.ndarray], np.ndarray]
    a_antideriv: Callable[[np.ndarray], np.ndarray]
    alpha: float
    is_identity: bool = False


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def make_builtin_potential(name: str, sigma: float | None = None) -> PointyPotential:
    """Builtin potential family.

    abs_half        W(x) = -|x|/2          (lam = 0, c = 1, w = 0)
    abs_scaled      W(x) = -sigma*|x|      (lam = 0, c = 2*sigma, w = 0)
    exp_pointy      W(x) = (e^{-|x|}-1)/2  (lam = 1/2, c = 1, w = e^{-|x|}/2)
    """
    if name == "abs_half":
        return PointyPotential(
            name="abs_half",
            w_eval=lambda x: -0.5 * np.abs(x),
            wprime_eval=lambda x: -0.5 * np.sign(x),
            lam=0.0,
            lip=0.5,
            decomposition=KinkDecomposition(c=1.0, w_eval=_zero, w0=0.0, w_left_integral=_zero),
        )
    if name == "abs_scaled":
        if sigma is None or sigma <= 0:
            raise ValueError("abs_scaled requires sigma > 0")
        s = float(sigma)
        return PointyPotential(
            name=f"abs_scaled({s!r})",
            w_eval=lambda x: -s * np.abs(x),
            wprime_eval=lambda x: -s * np.sign(x),
            lam=0.0,
            lip=s,
            decomposition=KinkDecomposition(c=2.0 * s, w_eval=_zero, w0=0.0, w_left_integral=_zero),
        )
    if name == "exp_pointy":

        def w_eval(x):
            return 0.5 * (np.exp(-np.abs(x)) - 1.0)

        def wprime(x):
            x = np.asarray(x, dtype=float)
            return -0.5 * np.sign(x) * np.exp(-np.abs(x))

        def w_cont(x):
            return 0.5 * np.exp(-np.abs(x))

        def w_left(x):
            x = np.asarray(x, dtype=float)
            return np.where(x <= 0.0, 0.5 * np.exp(np.minimum(x, 0.0)), 1.0 - 0.5 * np.exp(-np.maximum(x, 0.0)))

        return PointyPotential(
            name="exp_pointy",
            w_eval=w_eval,
            wprime_eval=wprime,
            lam=0.5,
            lip=0.5,
            decomposition=KinkDecomposition(
                c=1.0, w_eval=w_cont, w0=1.0, w_left_integral=w_left, exp_kernel=(0.5, 1.0)
            ),
        )
    raise ValueError(f"unknown potential {name!r}")


def make_velocity_law(name: str, k: float | None = None, scale: float | None = None) -> VelocityLaw:
    """Builtin speed laws: ``identity`` (a(x) = x) and ``atan`` (a(x) = scale*atan(k*x))."""
    if name == "identity":
        return VelocityLaw(
            name="identity",
            a_eval=lambda x: np.asarray(x, dtype=float),
            a_antideriv=lambda x: 0.5 * np.square(np.asarray(x, dtype=float)),
            alpha=1.0,
            is_identity=True,
        )
    if name == "atan":
        if k is None or k <= 0 or scale is None or scale <= 0:
            raise ValueError("atan law requires k > 0 and scale > 0")
        kk = float(k)
        sc = float(scale)

        def a_eval(x):
            return sc * np.arctan(kk * np.asarray(x, dtype=float))

        def a_antideriv(x):
            # d/dx [x*atan(kx) - log(1+k^2 x^2)/(2k)] = atan(kx)
            x = np.asarray(x, dtype=float)
            return sc * (x * np.arctan(kk * x) - np.log1p(np.square(kk * x)) / (2.0 * kk))

        return VelocityLaw(name=f"atan({kk!r},{sc!r})", a_eval=a_eval, a_antideriv=a_antideriv, alpha=sc * kk)
    raise ValueError(f"unknown velocity law {name!r}")


def velocity_sup_bound(pot: PointyPotential, law: VelocityLaw | None, mode: str) -> float:
    """Uniform bound on the transport speed, the a_inf of the CFL condition.

    Linear mode: the convolution W'*rho of a probability measure is bounded
    by the Lipschitz constant of W.

    Nonlinear mode: the discrete primitive gradient that feeds a(.) never
    leaves [-R, R] with R = |u_inf| + w0 + c (anchor value plus the total
    variation the cumulative solve can accumulate: w-part at most w0, kink
    part at most c for unit mass), so the speed is bounded by the larger
    endpoint value of the nondecreasing a.
    """
    if mode == "linear":
        return pot.lip
    if mode == "nonlinear":
        dec = pot.decomposition
        if dec is None:
            raise ValueError("nonlinear mode requires a kink decomposition")
        if law is None:
            raise ValueError("nonlinear mode requires a velocity law")
        u_inf = 0.5 * dec.c - float(dec.w_left_integral(0.0))
        reach = abs(u_inf) + dec.w0 + dec.c
        return float(max(abs(law.a_eval(-reach)), abs(law.a_eval(reach))))
    raise ValueError(f"unknown mode {mode!r}")
