"""Convex-order-preserving processing of marginal sequences.

Empirical marginals of a martingale at successive dates are almost never
in convex order, so feeding them to an MOT solver fails. The backward
chain restores order by projecting each marginal down onto the cone
dominated by its (already processed) successor — explicitly in 1D,
through the quadratic program otherwise. The forward chain walks the
other way with upward projections (1D only). Either way every adjacent
pair of the output satisfies the convex-order check and the anchor
marginal is returned bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError
from .measures import leq_cx_1d, leq_cx_lp
from .project1d import project_down, project_up
from .qp_project import project_qp


@dataclass
class MarginalChain:
    """Processed marginals plus one report dict per projected link."""

    measures: list
    direction: str
    reports: list

    def __len__(self):
        return len(self.measures)


def _check_link(lower, upper):
    if lower.dim == 1:
        return leq_cx_1d(lower, upper)
    return leq_cx_lp(lower, upper)


def backward_chain(samples, rho=2.0, best_effort=False):
    """Project marginals onto convex order, last date anchored.

    Walks k = l-1 ... 1 replacing marginal k with its projection onto
    the measures dominated by the processed marginal k+1: the explicit
    quantile construction when d = 1 (any rho), the rho = 2 quadratic
    program otherwise. A non-certified QP link or a failed adjacent
    convex-order check aborts with the link index unless best_effort,
    in which case it is recorded in the link report and processing
    continues.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("a chain needs at least two marginals")
    dim = samples[0].dim
    if any(m.dim != dim for m in samples):
        raise ValueError("all marginals must share a dimension")
    if dim > 1 and rho != 2.0:
        raise ValueError("d >= 2 backward chains require rho = 2 (QP projector)")

    out = [None] * len(samples)
    out[-1] = samples[-1]
    reports = []
    for k in range(len(samples) - 2, -1, -1):
        if dim == 1:
            res = project_down(samples[k], out[k + 1])
            out[k] = res.projected
            report = {
                "link": k,
                "method": "explicit-1d",
                "distance": res.distance_for(rho),
                "certified": True,
            }
        else:
            res = project_qp(samples[k], out[k + 1])
            out[k] = res.projected
            report = {
                "link": k,
                "method": "qp",
                "distance": float(np.sqrt(max(res.report.objective, 0.0))),
                "certified": res.report.certified,
                "gap": res.report.gap,
            }
            if not res.report.certified and not best_effort:
                raise SolverError(f"projection at link {k} not certified")
        report["cx_ok"] = _check_link(out[k], out[k + 1])
        if not report["cx_ok"] and not best_effort:
            raise SolverError(f"convex-order check failed at link {k}")
        reports.append(report)
    return MarginalChain(measures=out, direction="backward", reports=reports[::-1])


def forward_chain(samples, best_effort=False):
    """Project marginals onto convex order, first date anchored (1D).

    Walks k = 2 ... l replacing marginal k with its upward projection
    onto the measures dominating the processed marginal k-1. Upward
    projections exist in closed form only for d = 1.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ValueError("a chain needs at least two marginals")
    if any(m.dim != 1 for m in samples):
        raise ValueError("forward chains are one-dimensional only")

    out = [samples[0]]
    reports = []
    for k in range(1, len(samples)):
        res = project_up(samples[k], out[k - 1])
        out.append(res.projected)
        report = {
            "link": k,
            "method": "explicit-1d",
            "distance": res.distance_for(2.0),
            "certified": True,
            "cx_ok": _check_link(out[k - 1], out[k]),
        }
        if not report["cx_ok"] and not best_effort:
            raise SolverError(f"convex-order check failed at link {k}")
        reports.append(report)
    return MarginalChain(measures=out, direction="forward", reports=reports)
