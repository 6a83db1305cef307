"""Projected gradient descent with Armijo backtracking and the alternating
block schemes for joint (four blocks) and single-modality (two blocks)
reconstruction.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .functional import (
    JointObjective,
    JointState,
    ModalityParams,
    edge_grad_partner,
    edge_grad_self,
    edge_term,
    smooth_grad_u,
    smooth_grad_v,
    smooth_term,
)
from .metrics import ssim_global

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LineSearchParams:
    """Armijo backtracking settings.

    ``t0`` fixes the first trial step of every block; left as ``None`` the
    first step of a block moves the largest pixel by the block's ``scale_*``
    and later steps start from twice the previous accepted step.
    """

    c: float = 1e-4
    rho: float = 0.5
    t0: float | None = None
    max_backtracks: int = 40
    scale_u1: float = 1.0
    scale_u2: float = 0.01
    scale_v: float = 1.0

    def __post_init__(self):
        if not 0 < self.c < 1 or not 0 < self.rho < 1:
            raise ValueError("c and rho must lie in (0, 1)")
        if self.t0 is not None and self.t0 <= 0:
            raise ValueError("t0 must be positive")
        if self.max_backtracks < 0:
            raise ValueError("max_backtracks must be non-negative")


@dataclass(frozen=True)
class ScheduleParams:
    outer: int = 80
    inner: int = 10
    dot_warm_steps: int = 50
    dot_edge_steps: int = 20
    dot_background: float = 0.01

    def __post_init__(self):
        for name in ("outer", "inner", "dot_warm_steps", "dot_edge_steps"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class StepResult:
    x: np.ndarray
    t: float
    value: float
    status: str  # "accepted", "converged" or "stalled"


def _project(x, lower, upper):
    if lower is None and upper is None:
        return x
    return np.clip(x, lower, upper)


def backtracking_step(objective, gradient, x, ls: LineSearchParams, t0=None, fx=None,
                      lower=None, upper=None) -> StepResult:
    """One projected gradient step with Armijo backtracking.

    Trial points are ``clip(x - t * gradient, lower, upper)`` for
    ``t = t0 * rho**k``. A trial is accepted when it strictly lowers the
    objective and ``f(x_t) <= f(x) - c * <gradient, x - x_t>``, which reduces
    to the textbook ``c * t * |gradient|**2`` when no bound is active.
    """
    x = np.asarray(x, dtype=float)
    gradient = np.asarray(gradient, dtype=float)
    if fx is None:
        fx = objective(x)
    if not math.isfinite(fx) or not np.all(np.isfinite(gradient)):
        raise NumericalError("non-finite objective or gradient")
    if not np.any(gradient):
        return StepResult(x, 0.0, fx, "converged")
    t = ls.t0 if t0 is None else t0
    if t is None:
        t = 1.0 / np.max(np.abs(gradient))
    for _ in range(ls.max_backtracks + 1):
        xt = _project(x - t * gradient, lower, upper)
        decrease = float(np.vdot(gradient, x - xt))
        if decrease > 0:
            ft = objective(xt)
            if math.isfinite(ft) and ft < fx and ft <= fx - ls.c * decrease:
                return StepResult(xt, t, ft, "accepted")
        t *= ls.rho
    return StepResult(x, 0.0, fx, "stalled")


class Block:
    """One variable of an alternating scheme.

    ``parts(x)`` returns the objective terms that depend on the variable as a
    dict, ``grad(x)`` the gradient of their sum. The most recently evaluated
    parts are remembered so the accepted trial of a line search does not
    have to be evaluated twice.
    """

    def __init__(self, name, parts, grad, scale, lower=None, upper=None):
        self.name = name
        self._parts = parts
        self.grad = grad
        self.scale = scale
        self.lower = lower
        self.upper = upper
        self.t_last = None
        self.last_parts = None

    def value(self, x) -> float:
        self.last_parts = self._parts(x)
        return math.fsum(self.last_parts.values())

    def initial_step(self, g, ls: LineSearchParams):
        if self.t_last is not None:
            return 2.0 * self.t_last
        if ls.t0 is not None:
            return ls.t0
        return self.scale / np.max(np.abs(g))

    def run(self, x, steps, ls: LineSearchParams, on_step=None):
        """Take ``steps`` line-search steps from ``x``; returns the final iterate
        and the dict of its term values."""
        fx = self.value(x)
        parts = self.last_parts
        for k in range(steps):
            g = self.grad(x)
            if not np.any(g):
                res = StepResult(x, 0.0, fx, "converged")
            else:
                res = backtracking_step(self.value, g, x, ls, t0=self.initial_step(g, ls), fx=fx,
                                        lower=self.lower, upper=self.upper)
            if res.status == "accepted":
                x, fx, parts = res.x, res.value, self.last_parts
                self.t_last = res.t
            if on_step is not None:
                on_step(k, res, parts)
            if res.status != "accepted":
                # stalled or stationary: skip the rest of this block's budget
                break
        return x, parts


@dataclass
class RunLog:
    records: list = field(default_factory=list)

    def append(self, **rec):
        self.records.append(rec)

    def totals(self, include_init=False) -> np.ndarray:
        return np.array([r["terms"]["total"] for r in self.records if include_init or r["outer"] >= 0])

    def to_jsonl(self, path):
        with open(path, "w") as fh:
            for r in self.records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        with open(path) as fh:
            return cls([json.loads(line) for line in fh if line.strip()])


def _record(runlog, outer, block, k, res, terms, ssim):
    rec = dict(outer=outer, block=block, step=k, t=res.t, status=res.status, terms=terms)
    if ssim is not None:
        rec["ssim"] = ssim
    runlog.append(**rec)


# ----------------------------------------------------------------------
# initialisation


def init_xct(grid):
    """Zero image and edge-free indicator."""
    return np.zeros(grid.shape), np.ones(grid.shape)


def init_dot(modality, params: ModalityParams, schedule: ScheduleParams, ls: LineSearchParams,
             runlog: RunLog | None = None):
    """Blurry start for DOT: descend on the data misfit alone from a constant
    background, then segment that image by descending on the edge terms."""
    grid = modality.grid
    h = grid.h
    u = np.full(grid.shape, schedule.dot_background)
    fid_block = Block("init_u", lambda x: {"fidelity": modality.fidelity(x)},
                      lambda x: modality.fidelity_gradient(x)[1], ls.scale_u2, lower=modality.lower)

    def log_step(name):
        def cb(k, res, parts):
            if runlog is not None:
                _record(runlog, -1, name, k, res, dict(parts, total=res.value), None)
        return cb

    u, _ = fid_block.run(u, schedule.dot_warm_steps, ls, log_step("init_u"))
    v = np.ones(grid.shape)
    edge_block = Block(
        "init_v",
        lambda x: {"smooth": smooth_term(u, x, params.alpha, h),
                   "edge": edge_term(x, None, params.beta, 0.0, params.eps, h)},
        lambda x: smooth_grad_v(u, x, params.alpha, h) + edge_grad_self(x, None, params.beta, 0.0, params.eps, h),
        ls.scale_v, lower=0.0, upper=1.0,
    )
    v, _ = edge_block.run(v, schedule.dot_edge_steps, ls, log_step("init_v"))
    return u, v


# ----------------------------------------------------------------------
# single-modality Mumford-Shah reconstruction


def _lower(modality):
    return getattr(modality, "lower", None)


def _u_scale(modality, ls):
    return ls.scale_u2 if modality.name == "dot" else ls.scale_u1


def smir(modality, params: ModalityParams, schedule: ScheduleParams = ScheduleParams(),
         ls: LineSearchParams = LineSearchParams(), init=None, truth=None, ssim_domain="disk"):
    """Alternating u/v descent on the uncoupled objective.

    Returns ``(u, v, RunLog)``. ``init`` is an optional ``(u0, v0)`` pair;
    by default XCT starts from zero/one and DOT from :func:`init_dot`.
    """
    grid = modality.grid
    h = grid.h
    runlog = RunLog()
    if init is None:
        if modality.name == "dot":
            init = init_dot(modality, params, schedule, ls, runlog)
        else:
            init = init_xct(grid)
    u, v = (np.array(a, dtype=float) for a in init)
    terms = {"fidelity": modality.fidelity(u), "smooth": smooth_term(u, v, params.alpha, h),
             "edge": edge_term(v, None, params.beta, 0.0, params.eps, h)}

    cur = {"u": u, "v": v}
    u_block = Block(
        "u",
        lambda x: {"fidelity": modality.fidelity(x), "smooth": smooth_term(x, cur["v"], params.alpha, h)},
        lambda x: modality.fidelity_gradient(x)[1] + smooth_grad_u(x, cur["v"], params.alpha, h),
        _u_scale(modality, ls), lower=_lower(modality),
    )
    v_block = Block(
        "v",
        lambda x: {"smooth": smooth_term(cur["u"], x, params.alpha, h),
                   "edge": edge_term(x, None, params.beta, 0.0, params.eps, h)},
        lambda x: smooth_grad_v(cur["u"], x, params.alpha, h)
        + edge_grad_self(x, None, params.beta, 0.0, params.eps, h),
        ls.scale_v, lower=0.0, upper=1.0,
    )

    for outer in range(schedule.outer):
        for name, block in (("u", u_block), ("v", v_block)):
            def cb(k, res, parts, name=name, outer=outer):
                terms.update(parts)
                snapshot = dict(terms, total=math.fsum(terms.values()))
                s = None
                if truth is not None:
                    uu = res.x if name == "u" else cur["u"]
                    s = ssim_global(uu, truth, grid, domain=ssim_domain)
                _record(runlog, outer, name, k, res, snapshot, s)
            cur[name], parts = block.run(cur[name], schedule.inner, ls, cb)
            terms.update(parts)
    return cur["u"], cur["v"], runlog


# ----------------------------------------------------------------------
# joint reconstruction


_TERM_NAMES = ("fidelity1", "smooth1", "edge1", "fidelity2", "smooth2", "edge2")


def jbmir(objective: JointObjective, schedule: ScheduleParams = ScheduleParams(),
          ls: LineSearchParams = LineSearchParams(), init: JointState | None = None,
          truth=None, ssim_domain="disk", dot_init_params: ModalityParams | None = None):
    """Alternating minimisation over u1, v1, u2, v2 (in that order).

    Each block runs ``schedule.inner`` backtracking steps warm-started at its
    previous value with the other three blocks frozen. ``truth`` is an
    optional ``(u1_true, u2_true)`` pair used to log SSIM per step.
    Returns ``(JointState, RunLog)``.
    """
    grid = objective.grid
    h = grid.h
    p = objective.params
    xct, dot = objective.xct, objective.dot
    runlog = RunLog()
    if init is None:
        u1, v1 = init_xct(grid)
        u2, v2 = init_dot(dot, dot_init_params or p.modality(2), schedule, ls, runlog)
        init = JointState(u1, v1, u2, v2)
    st = init.copy()
    terms = objective.terms(st).as_dict()
    del terms["total"]

    def v_parts(i):
        j = 3 - i
        alpha, beta, gamma, eps = (getattr(p, f"{k}{i}") for k in ("alpha", "beta", "gamma", "eps"))
        beta_j, gamma_j, eps_j = (getattr(p, f"{k}{j}") for k in ("beta", "gamma", "eps"))

        def parts(x):
            u, v_other = getattr(st, f"u{i}"), getattr(st, f"v{j}")
            out = {f"smooth{i}": smooth_term(u, x, alpha, h),
                   f"edge{i}": edge_term(x, v_other, beta, gamma, eps, h)}
            if gamma_j != 0:
                out[f"edge{j}"] = edge_term(v_other, x, beta_j, gamma_j, eps_j, h)
            return out

        def grad(x):
            u, v_other = getattr(st, f"u{i}"), getattr(st, f"v{j}")
            g = smooth_grad_v(u, x, alpha, h) + edge_grad_self(x, v_other, beta, gamma, eps, h)
            if gamma_j != 0:
                g = g + edge_grad_partner(x, v_other, beta_j, gamma_j, eps_j, h)
            return g

        return parts, grad

    blocks = [
        Block("u1",
              lambda x: {"fidelity1": xct.fidelity(x), "smooth1": smooth_term(x, st.v1, p.alpha1, h)},
              lambda x: xct.fidelity_gradient(x)[1] + smooth_grad_u(x, st.v1, p.alpha1, h),
              ls.scale_u1, lower=_lower(xct)),
        Block("v1", *v_parts(1), ls.scale_v, lower=0.0, upper=1.0),
        Block("u2",
              lambda x: {"fidelity2": dot.fidelity(x), "smooth2": smooth_term(x, st.v2, p.alpha2, h)},
              lambda x: dot.fidelity_gradient(x)[1] + smooth_grad_u(x, st.v2, p.alpha2, h),
              ls.scale_u2, lower=_lower(dot)),
        Block("v2", *v_parts(2), ls.scale_v, lower=0.0, upper=1.0),
    ]

    for outer in range(schedule.outer):
        for block in blocks:
            def cb(k, res, parts, name=block.name, outer=outer):
                terms.update(parts)
                snapshot = {n: terms[n] for n in _TERM_NAMES}
                snapshot["total"] = math.fsum(snapshot[n] for n in _TERM_NAMES)
                s = None
                if truth is not None:
                    u1 = res.x if name == "u1" else st.u1
                    u2 = res.x if name == "u2" else st.u2
                    s = [ssim_global(u1, truth[0], grid, domain=ssim_domain),
                         ssim_global(u2, truth[1], grid, domain=ssim_domain)]
                _record(runlog, outer, name, k, res, snapshot, s)
            x, parts = block.run(getattr(st, block.name), schedule.inner, ls, cb)
            setattr(st, block.name, x)
            terms.update(parts)
        log.debug("outer %d total %.6g", outer, math.fsum(terms.values()))
    return st, runlog
