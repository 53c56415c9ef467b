"""Fundamental solutions of ``-c f'' + V f = lambda f`` on a single edge.

``c(x)`` and ``s(x)`` solve the edge equation with ``c(0) = 1, c'(0) = 0``
and ``s(0) = 0, s'(0) = 1``.  On a constant piece of length ``l`` with
``mu = (lambda - V) / c`` the transfer matrix acting on ``(f, f')`` is

    [[C, S], [-mu S, C]],   C = cos(sqrt(mu) l),  S = sin(sqrt(mu) l) / sqrt(mu),

continued to cosh/sinh for ``mu < 0`` and to Taylor series for
``|mu| l^2 < 1e-6``, which keeps everything entire in ``lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Edge

SERIES_CROSSOVER = 1e-6
_SERIES_TERMS = 7


def _scalar_cs(mu: float, ell: float) -> tuple[float, float]:
    z = mu * ell * ell
    if z >= SERIES_CROSSOVER:
        k = math.sqrt(mu)
        return math.cos(k * ell), math.sin(k * ell) / k
    if z <= -SERIES_CROSSOVER:
        kap = math.sqrt(-mu)
        return math.cosh(kap * ell), math.sinh(kap * ell) / kap
    c_sum = s_sum = 0.0
    term_c = term_s = 1.0
    for j in range(_SERIES_TERMS):
        c_sum += term_c
        s_sum += term_s
        term_c *= -z / ((2 * j + 1) * (2 * j + 2))
        term_s *= -z / ((2 * j + 2) * (2 * j + 3))
    return c_sum, ell * s_sum


def piece_cs(mu, ell):
    """``(C, S)`` for parameter(s) ``mu`` over length(s) ``ell`` (broadcasting)."""
    if np.ndim(mu) == 0 and np.ndim(ell) == 0:
        C, S = _scalar_cs(float(mu), float(ell))
        return np.float64(C), np.float64(S)
    mu = np.asarray(mu, dtype=float)
    ell = np.asarray(ell, dtype=float)
    mu, ell = np.broadcast_arrays(mu, ell)
    z = mu * ell * ell
    C = np.empty(z.shape)
    S = np.empty(z.shape)

    small = np.abs(z) < SERIES_CROSSOVER
    pos = (z >= SERIES_CROSSOVER)
    neg = (z <= -SERIES_CROSSOVER)

    if np.any(pos):
        k = np.sqrt(mu[pos])
        kl = k * ell[pos]
        C[pos] = np.cos(kl)
        S[pos] = np.sin(kl) / k
    if np.any(neg):
        kap = np.sqrt(-mu[neg])
        kl = kap * ell[neg]
        C[neg] = np.cosh(kl)
        S[neg] = np.sinh(kl) / kap
    if np.any(small):
        zs = z[small]
        c_sum = np.zeros(zs.shape)
        s_sum = np.zeros(zs.shape)
        term_c = np.ones(zs.shape)
        term_s = np.ones(zs.shape)
        for j in range(_SERIES_TERMS):
            c_sum += term_c
            s_sum += term_s
            term_c = term_c * (-zs) / ((2 * j + 1) * (2 * j + 2))
            term_s = term_s * (-zs) / ((2 * j + 2) * (2 * j + 3))
        C[small] = c_sum
        S[small] = ell[small] * s_sum
    return C, S


def piece_transfer(mu, ell) -> np.ndarray:
    """Transfer matrices with shape ``broadcast(mu, ell).shape + (2, 2)``."""
    mu = np.asarray(mu, dtype=float)
    C, S = piece_cs(mu, ell)
    mu_b = np.broadcast_to(mu, C.shape)
    T = np.empty(C.shape + (2, 2))
    T[..., 0, 0] = C
    T[..., 0, 1] = S
    T[..., 1, 0] = -mu_b * S
    T[..., 1, 1] = C
    return T


def edge_transfer(edge: Edge, lams) -> np.ndarray:
    """End-to-end transfer matrix of ``edge`` for each ``lambda`` in ``lams``."""
    if np.ndim(lams) == 0:
        return _scalar_transfer(edge, float(lams))
    lams = np.asarray(lams, dtype=float)
    T = np.broadcast_to(np.eye(2), lams.shape + (2, 2)).copy()
    for x0, x1, V in edge.potential.pieces():
        P = piece_transfer((lams - V) / edge.coefficient, x1 - x0)
        T = P @ T
    return T


def _scalar_transfer(edge: Edge, lam: float) -> np.ndarray:
    a, b, c, d = 1.0, 0.0, 0.0, 1.0
    for x0, x1, V in edge.potential.pieces():
        mu = (lam - V) / edge.coefficient
        C, S = _scalar_cs(mu, x1 - x0)
        a, b, c, d = C * a + S * c, C * b + S * d, -mu * S * a + C * c, -mu * S * b + C * d
    return np.array([[a, b], [c, d]])


def edge_transfer_at(edge: Edge, lam: float, xs) -> np.ndarray:
    """Transfer matrices from ``0`` to each point of ``xs`` (shape ``xs.shape + (2, 2)``)."""
    xs = np.asarray(xs, dtype=float)
    out = np.empty(xs.shape + (2, 2))
    flat = xs.reshape(-1)
    res = out.reshape(-1, 2, 2)
    pieces = edge.potential.pieces()
    T0 = np.eye(2)
    for i, (x0, x1, V) in enumerate(pieces):
        last = i == len(pieces) - 1
        mask = (flat >= x0) & ((flat < x1) | last)
        if i == 0:
            mask |= flat < x0
        if np.any(mask):
            P = piece_transfer((lam - V) / edge.coefficient, flat[mask] - x0)
            res[mask] = P @ T0
        T0 = piece_transfer((lam - V) / edge.coefficient, x1 - x0) @ T0
    return out


@dataclass(frozen=True)
class FundamentalSystem:
    """End traces of ``c`` and ``s`` on one edge at one ``lambda``."""

    edge: Edge
    lam: float
    c: float
    s: float
    cp: float
    sp: float

    @property
    def wronskian(self) -> float:
        return self.c * self.sp - self.cp * self.s

    def at(self, xs):
        """``(c, s, c', s')`` at the points ``xs``."""
        T = edge_transfer_at(self.edge, self.lam, xs)
        return T[..., 0, 0], T[..., 0, 1], T[..., 1, 0], T[..., 1, 1]


def fundamental_system(edge: Edge, lam: float) -> FundamentalSystem:
    T = edge_transfer(edge, np.asarray(float(lam)))
    return FundamentalSystem(edge, float(lam), T[0, 0], T[0, 1], T[1, 0], T[1, 1])


def local_wavenumber(edge: Edge, lam: float) -> float:
    """Largest ``sqrt(max(mu, 0))`` over the pieces of ``edge``."""
    mus = [(lam - V) / edge.coefficient for _, _, V in edge.potential.pieces()]
    return math.sqrt(max(max(mus), 0.0))
