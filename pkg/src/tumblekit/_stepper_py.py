"""Pure-numpy reference stepper; see _stepper.pyx for the compiled twin."""

import numpy as np


def _lax_wendroff(u, nu, half_lam2, out):
    # zero ghost values outside the window
    out[1:-1] = (
        u[1:-1]
        - 0.5 * nu * (u[2:] - u[:-2])
        + half_lam2 * (u[2:] - 2.0 * u[1:-1] + u[:-2])
    )
    out[0] = u[0] - 0.5 * nu * u[1] + half_lam2 * (u[1] - 2.0 * u[0])
    out[-1] = u[-1] + 0.5 * nu * u[-2] + half_lam2 * (u[-2] - 2.0 * u[-1])
    return out


def run_transport(traj, cpg, cpl, cmg, cml, lam, dt, vp_sign):
    """Fill traj[1:], stepping from traj[0].

    traj has shape (n_steps+1, 2, n). Component 0 advects with velocity
    vp_sign, component 1 with -vp_sign; zero ghost values outside the window.
    Per step, the Lax-Wendroff update and the collision increment
    dt*(gain*other - loss*self) are both evaluated at the pre-step state.
    """
    n_steps = traj.shape[0] - 1
    nu_p = vp_sign * lam
    half_lam2 = 0.5 * lam * lam
    for s in range(n_steps):
        up, um = traj[s, 0], traj[s, 1]
        _lax_wendroff(up, nu_p, half_lam2, traj[s + 1, 0])
        _lax_wendroff(um, -nu_p, half_lam2, traj[s + 1, 1])
        traj[s + 1, 0] += dt * (cpg * um - cpl * up)
        traj[s + 1, 1] += dt * (cmg * up - cml * um)
