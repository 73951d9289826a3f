"""Deterministic desk-scale problem shared by the solver cross-check test
and the reference-objective generator (tools/make_solver_fixture.py).

The problem is rebuilt from a fixed seed on every use; a hash over the
assembled arrays guards against accidental drift of the construction.
"""
import hashlib

import numpy as np

from battid.bspline import third_deriv_matrix, uniform_clamped
from battid.regression import IdProblem

DESK_SEED = 20240817
DESK_M = 200
DESK_H = 8
DESK_LAMBDA1 = 1e-3
DESK_LAMBDA2 = 3e-4


def make_desk_problem():
    rng = np.random.default_rng(DESK_SEED)
    h = DESK_H
    kv = uniform_clamped(0.0, 1.0, h - 2)
    assert kv.h == h

    soc_sorted = np.sort(rng.uniform(0.0, 1.0, 40))
    g3 = third_deriv_matrix(kv, soc_sorted)
    dg3 = g3[:-1] - g3[1:]

    pi_raw = rng.normal(size=(DESK_M, 5 + h))
    f_raw = rng.normal(size=(DESK_M, 2 * h))
    a_t = np.array([-2.0, 1.2])
    b_t = np.array([0.05, 0.004, 5e-5])
    gam = 3.0 + 0.3 * rng.normal(size=h)
    phi = np.concatenate([a_t, b_t, gam])
    mvec = np.concatenate([a_t[0] * gam, a_t[1] * gam])
    y = pi_raw @ phi + f_raw @ mvec + 1e-3 * rng.normal(size=DESK_M)

    scale = np.concatenate([
        np.linalg.norm(pi_raw, axis=0),
        np.linalg.norm(f_raw, axis=0),
    ])
    prob = IdProblem(
        y=y,
        pi=pi_raw / scale[: 5 + h],
        f=f_raw / scale[5 + h:],
        dg3=dg3,
        burn_mask=np.zeros(DESK_M, dtype=bool),
        scale=scale,
        kv=kv,
        nu=1e-3,
        ts=1.0,
    )
    return prob


def desk_problem_hash(prob) -> str:
    blob = b"".join(np.ascontiguousarray(a).tobytes()
                    for a in (prob.y, prob.pi, prob.f, prob.dg3, prob.scale))
    return hashlib.sha256(blob).hexdigest()
