# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping core for the two-component transport system.

Semantics must match tumblekit._stepper_py exactly; the fallback is the
reference and the twin test in tests/test_solver.py keeps both honest.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def run_transport(
    double[:, :, ::1] traj,
    double[::1] cpg,
    double[::1] cpl,
    double[::1] cmg,
    double[::1] cml,
    double lam,
    double dt,
    int vp_sign,
):
    """Fill traj[1:], stepping from traj[0].

    traj has shape (n_steps+1, 2, n). Component 0 advects with velocity
    vp_sign, component 1 with -vp_sign; zero ghost values outside the window.
    Per step, the Lax-Wendroff update and the collision increment
    dt*(gain*other - loss*self) are both evaluated at the pre-step state.
    """
    cdef Py_ssize_t n_steps = traj.shape[0] - 1
    cdef Py_ssize_t n = traj.shape[2]
    cdef double nu_p = vp_sign * lam
    cdef double nu_m = -nu_p
    cdef double half_lam2 = 0.5 * lam * lam
    cdef double half_nu_p = 0.5 * nu_p
    cdef double half_nu_m = 0.5 * nu_m
    cdef Py_ssize_t s, j
    cdef double ul, uc, ur, vl, vc, vr

    with nogil:
        for s in range(n_steps):
            for j in range(n):
                ul = traj[s, 0, j - 1] if j > 0 else 0.0
                uc = traj[s, 0, j]
                ur = traj[s, 0, j + 1] if j < n - 1 else 0.0
                vl = traj[s, 1, j - 1] if j > 0 else 0.0
                vc = traj[s, 1, j]
                vr = traj[s, 1, j + 1] if j < n - 1 else 0.0
                traj[s + 1, 0, j] = (
                    uc
                    - half_nu_p * (ur - ul)
                    + half_lam2 * (ur - 2.0 * uc + ul)
                    + dt * (cpg[j] * vc - cpl[j] * uc)
                )
                traj[s + 1, 1, j] = (
                    vc
                    - half_nu_m * (vr - vl)
                    + half_lam2 * (vr - 2.0 * vc + vl)
                    + dt * (cmg[j] * uc - cml[j] * vc)
                )
