#!/usr/bin/env python3
"""Compute the reference objective for the solver cross-check test.

Solves the desk-scale problem with a general-purpose conic solver (cvxpy)
and stores the optimal objective in tests/data/solver_reference.json.
Run once when the desk problem definition changes; cvxpy is needed only
here, never at package runtime or test time.
"""
import json
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

import cvxpy as cp

from _desk import (
    DESK_H,
    DESK_LAMBDA1,
    DESK_LAMBDA2,
    DESK_M,
    DESK_SEED,
    desk_problem_hash,
    make_desk_problem,
)


def main():
    prob = make_desk_problem()
    h = DESK_H
    pi_raw = prob.pi * prob.scale[: 5 + h]
    f_raw = prob.f * prob.scale[5 + h:]

    at = cp.Variable(2)
    bt = cp.Variable(3)
    gam = cp.Variable(h)
    m_blk = cp.Variable((2, h))
    phi = cp.hstack([at, bt, gam])
    mvec = cp.reshape(m_blk, (2 * h,), order="C")
    p_mat = cp.bmat([
        [m_blk, cp.reshape(at, (2, 1), order="C")],
        [cp.reshape(gam, (1, h), order="C"), np.ones((1, 1))],
    ])
    resid = prob.y - pi_raw @ phi - f_raw @ mvec
    objective = (cp.sum_squares(resid)
                 + DESK_LAMBDA1 * cp.normNuc(p_mat)
                 + DESK_LAMBDA2 * cp.norm1(prob.dg3 @ gam))
    cvx_prob = cp.Problem(cp.Minimize(objective))
    cvx_prob.solve(solver=cp.CLARABEL,
                   tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                   tol_feas=1e-12, max_iter=200000)
    if cvx_prob.status != cp.OPTIMAL:
        raise SystemExit(f"reference solve not optimal: {cvx_prob.status}")

    out = {
        "seed": DESK_SEED,
        "m": DESK_M,
        "h": h,
        "lambda1": DESK_LAMBDA1,
        "lambda2": DESK_LAMBDA2,
        "problem_sha256": desk_problem_hash(prob),
        "reference_objective": float(cvx_prob.value),
        "reference_solver": f"cvxpy-{cp.__version__}/CLARABEL",
    }
    dest = Path(__file__).resolve().parent.parent / "tests" / "data"
    dest.mkdir(parents=True, exist_ok=True)
    path = dest / "solver_reference.json"
    path.write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {path}")
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
