"""The coupled Ambrosio-Tortorelli objective for joint XCT/DOT reconstruction.

For modality ``i`` with partner ``j`` the discrete objective is

    |A_i(u_i) - g_i|^2
    + alpha_i h^2 sum v_i^2 |grad u_i|^2
    + beta_i h^2 sum (eps_i |grad v_i|^2 + (1 - v_i)^2 / (4 eps_i)) * (1 + gamma_i (v_j - v_i)^2)

summed over both modalities. Gradients are exact derivatives of this
discrete expression with respect to pixel values. Block objectives only
contain the terms that depend on the block; terms multiplied by a zero
coupling weight are skipped entirely so that an uncoupled joint run is
arithmetically identical to two single-modality runs.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .dot import DotOperator
from .grid import GridGeometry, backward_divergence, forward_gradient
from .xct import ScanGeometry, radon_adjoint, radon_forward


@dataclass(frozen=True)
class RegParams:
    """Regularization weights for the joint objective (index 1: XCT, 2: DOT)."""

    alpha1: float = 8.8e3
    beta1: float = 1.9e-3
    gamma1: float = 9.8
    alpha2: float = 1e5
    beta2: float = 6e-5
    gamma2: float = 5.0
    eps1: float = 1e-4
    eps2: float = 1e-4
    gamma_cap: float = 10.0

    def __post_init__(self):
        for name in ("alpha1", "beta1", "alpha2", "beta2", "eps1", "eps2"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("gamma1", "gamma2"):
            value = getattr(self, name)
            if value < 0 or value > self.gamma_cap:
                raise ValueError(f"{name} must lie in [0, {self.gamma_cap}]")

    def modality(self, i: int) -> "ModalityParams":
        return ModalityParams(alpha=getattr(self, f"alpha{i}"), beta=getattr(self, f"beta{i}"),
                              eps=getattr(self, f"eps{i}"))


@dataclass(frozen=True)
class ModalityParams:
    """Weights of a single-modality (uncoupled) objective."""

    alpha: float
    beta: float
    eps: float = 1e-4

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"{f.name} must be positive")


@dataclass
class JointState:
    u1: np.ndarray
    v1: np.ndarray
    u2: np.ndarray
    v2: np.ndarray

    def copy(self) -> "JointState":
        return JointState(self.u1.copy(), self.v1.copy(), self.u2.copy(), self.v2.copy())


@dataclass(frozen=True)
class TermBreakdown:
    fidelity1: float
    smooth1: float
    edge1: float
    fidelity2: float
    smooth2: float
    edge2: float

    @property
    def total(self) -> float:
        return math.fsum((self.fidelity1, self.smooth1, self.edge1,
                          self.fidelity2, self.smooth2, self.edge2))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


# ----------------------------------------------------------------------
# forward models with their squared-misfit fidelity


class XctModality:
    """Sinogram misfit ``|R u - g|^2``."""

    name = "xct"

    def __init__(self, grid: GridGeometry, scan: ScanGeometry, g1: np.ndarray):
        self.grid = grid
        self.scan = scan
        g1 = np.asarray(g1, dtype=float)
        if g1.shape != scan.shape:
            raise ValueError(f"sinogram has shape {g1.shape}, scan expects {scan.shape}")
        self.data = g1
        self.lower = None

    def fidelity(self, u: np.ndarray) -> float:
        r = radon_forward(u, self.scan, self.grid) - self.data
        return float(np.sum(r * r))

    def fidelity_gradient(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        r = radon_forward(u, self.scan, self.grid) - self.data
        return float(np.sum(r * r)), 2.0 * radon_adjoint(r, self.scan, self.grid)


class DotModality:
    """Boundary-data misfit ``|G(mu_a) - g|^2``; iterates stay above the mu_a floor."""

    name = "dot"

    def __init__(self, op: DotOperator, g2: np.ndarray):
        self.grid = op.grid
        self.op = op
        g2 = np.asarray(g2, dtype=float)
        if g2.shape != op.data_shape:
            raise ValueError(f"boundary data has shape {g2.shape}, expected {op.data_shape}")
        self.data = g2
        self.lower = op.model.mu_floor

    def fidelity(self, u: np.ndarray) -> float:
        return self.op.fidelity(u, self.data)

    def fidelity_gradient(self, u: np.ndarray) -> tuple[float, np.ndarray]:
        return self.op.fidelity_gradient(u, self.data)


# ----------------------------------------------------------------------
# regularization pieces


def smooth_term(u, v, alpha, h):
    gu = forward_gradient(u, h)
    return alpha * h * h * float(np.sum(v * v * (gu[0] ** 2 + gu[1] ** 2)))


def smooth_grad_u(u, v, alpha, h):
    gu = forward_gradient(u, h)
    return -2.0 * alpha * h * h * backward_divergence(v * v * gu, h)


def smooth_grad_v(u, v, alpha, h):
    gu = forward_gradient(u, h)
    return 2.0 * alpha * h * h * v * (gu[0] ** 2 + gu[1] ** 2)


def at_density(v, eps, h):
    """Ambrosio-Tortorelli edge density ``eps |grad v|^2 + (1 - v)^2 / (4 eps)``."""
    gv = forward_gradient(v, h)
    return eps * (gv[0] ** 2 + gv[1] ** 2) + (1.0 - v) ** 2 / (4.0 * eps)


def edge_term(v, v_other, beta, gamma, eps, h):
    e = at_density(v, eps, h)
    if gamma != 0:
        e = e * (1.0 + gamma * (v_other - v) ** 2)
    return beta * h * h * float(np.sum(e))


def edge_grad_self(v, v_other, beta, gamma, eps, h):
    gv = forward_gradient(v, h)
    if gamma == 0:
        return beta * h * h * (-2.0 * eps * backward_divergence(gv, h) - (1.0 - v) / (2.0 * eps))
    w = 1.0 + gamma * (v_other - v) ** 2
    e = eps * (gv[0] ** 2 + gv[1] ** 2) + (1.0 - v) ** 2 / (4.0 * eps)
    return beta * h * h * (
        -2.0 * eps * backward_divergence(w * gv, h)
        - w * (1.0 - v) / (2.0 * eps)
        - 2.0 * gamma * (v_other - v) * e
    )


def edge_grad_partner(v, v_partner, beta, gamma, eps, h):
    """Derivative of the partner's edge term (indicator ``v_partner``) w.r.t. ``v``."""
    return beta * h * h * 2.0 * gamma * (v - v_partner) * at_density(v_partner, eps, h)


# ----------------------------------------------------------------------
# the joint objective


class JointObjective:
    """Evaluate the coupled objective, its six terms and the four block gradients."""

    def __init__(self, xct: XctModality, dot: DotModality, params: RegParams):
        if xct.grid != dot.grid:
            raise ValueError("XCT and DOT data live on different grids")
        self.grid = xct.grid
        self.h = xct.grid.h
        self.xct = xct
        self.dot = dot
        self.params = params

    def _check(self, state: JointState):
        for name in ("u1", "v1", "u2", "v2"):
            setattr(state, name, self.grid.check(getattr(state, name), name))

    def terms(self, state: JointState) -> TermBreakdown:
        self._check(state)
        p, h = self.params, self.h
        return TermBreakdown(
            fidelity1=self.xct.fidelity(state.u1),
            smooth1=smooth_term(state.u1, state.v1, p.alpha1, h),
            edge1=edge_term(state.v1, state.v2, p.beta1, p.gamma1, p.eps1, h),
            fidelity2=self.dot.fidelity(state.u2),
            smooth2=smooth_term(state.u2, state.v2, p.alpha2, h),
            edge2=edge_term(state.v2, state.v1, p.beta2, p.gamma2, p.eps2, h),
        )

    def __call__(self, state: JointState) -> float:
        return self.terms(state).total

    def grad_u1(self, state: JointState) -> np.ndarray:
        p = self.params
        return self.xct.fidelity_gradient(state.u1)[1] + smooth_grad_u(state.u1, state.v1, p.alpha1, self.h)

    def grad_u2(self, state: JointState) -> np.ndarray:
        p = self.params
        return self.dot.fidelity_gradient(state.u2)[1] + smooth_grad_u(state.u2, state.v2, p.alpha2, self.h)

    def grad_v1(self, state: JointState) -> np.ndarray:
        return self._grad_v(state.u1, state.v1, state.v2, 1)

    def grad_v2(self, state: JointState) -> np.ndarray:
        return self._grad_v(state.u2, state.v2, state.v1, 2)

    def _grad_v(self, u, v, v_other, i):
        p, h = self.params, self.h
        j = 3 - i
        alpha, beta, gamma, eps = (getattr(p, f"{k}{i}") for k in ("alpha", "beta", "gamma", "eps"))
        g = smooth_grad_v(u, v, alpha, h) + edge_grad_self(v, v_other, beta, gamma, eps, h)
        gamma_j = getattr(p, f"gamma{j}")
        if gamma_j != 0:
            g = g + edge_grad_partner(v, v_other, getattr(p, f"beta{j}"), gamma_j, getattr(p, f"eps{j}"), h)
        return g


def eval_joint(state: JointState, objective: JointObjective) -> TermBreakdown:
    return objective.terms(state)


def single_terms(modality, u, v, params: ModalityParams) -> tuple[float, float, float]:
    """``(fidelity, smooth, edge)`` of the uncoupled single-modality objective."""
    h = modality.grid.h
    return (modality.fidelity(u), smooth_term(u, v, params.alpha, h),
            edge_term(v, None, params.beta, 0.0, params.eps, h))
