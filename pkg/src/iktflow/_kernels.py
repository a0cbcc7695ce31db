"""Compiled inner loop of the semi-Lagrangian kinetic step.

For every grid node and every velocity quadrature node the characteristic
ending at ``(r_node, v_node, t + dt)`` is integrated backward to ``t`` with
RK4 (Jacobian included), the old Maxwellian is evaluated at the departure point
and the result is accumulated into raw velocity moments about the node's
quadrature centre.

Field stack layout (``nf = 20`` scalars per node)::

    0-2   V            3-11  grad V (row-major, dV_i/dx_j)
    12-14 f/rho + nu lap V   15-17 grad p1
    18    p1           19    B (scalar bracket of F1)
"""

import numpy as np
from numba import njit

NF = 20
# raw moments per node: rho, M1(3), S(6: xx yy zz xy xz yz), T(3)
NMOM = 13


@njit(cache=True)
def _weights(s, n):
    """Periodic cubic Lagrange stencil: first index and 4 weights for coordinate ``s`` (grid units)."""
    i0 = int(np.floor(s))
    a = s - i0
    w = np.empty(4)
    w[0] = -a * (a - 1.0) * (a - 2.0) / 6.0
    w[1] = (a + 1.0) * (a - 1.0) * (a - 2.0) / 2.0
    w[2] = -(a + 1.0) * a * (a - 2.0) / 2.0
    w[3] = (a + 1.0) * a * (a - 1.0) / 6.0
    return i0 - 1, w


@njit(cache=True)
def _interp(stack, nfields, r, origin, h, shape, out):
    """Cubic interpolation of the first ``nfields`` fields of ``stack`` at ``r``."""
    nx, ny, nz = shape[0], shape[1], shape[2]
    for f in range(nfields):
        out[f] = 0.0
    # flat axes use a single node with unit weight
    if nx > 1:
        ix, wx = _weights((r[0] - origin[0]) / h[0], nx)
        kx = 4
    else:
        ix, wx, kx = 0, np.ones(1), 1
    if ny > 1:
        iy, wy = _weights((r[1] - origin[1]) / h[1], ny)
        ky = 4
    else:
        iy, wy, ky = 0, np.ones(1), 1
    if nz > 1:
        iz, wz = _weights((r[2] - origin[2]) / h[2], nz)
        kz = 4
    else:
        iz, wz, kz = 0, np.ones(1), 1
    for a in range(kx):
        xa = (ix + a) % nx
        for b in range(ky):
            yb = (iy + b) % ny
            wab = wx[a] * wy[b]
            for c in range(kz):
                zc = (iz + c) % nz
                w = wab * wz[c]
                for f in range(nfields):
                    out[f] += w * stack[f, xa, yb, zc]


@njit(cache=True)
def _force(c, v, rho0, F):
    """Acceleration and phase divergence from interpolated context ``c`` at velocity ``v``."""
    u0 = v[0] - c[0]
    u1 = v[1] - c[1]
    u2 = v[2] - c[2]
    p1 = c[18]
    B = c[19]
    vth2 = 2.0 * p1 / rho0
    radial = (u0 * u0 + u1 * u1 + u2 * u2) / vth2 - 1.5
    uu = (u0, u1, u2)
    for i in range(3):
        F[i] = (c[12 + i] + c[3 + 3 * i] * u0 + c[4 + 3 * i] * u1 + c[5 + 3 * i] * u2
                + 0.5 * B * uu[i] + c[15 + i] * radial / rho0)
    trG = c[3] + c[7] + c[11]
    return trG + 1.5 * B + (c[15] * u0 + c[16] * u1 + c[17] * u2) / p1


@njit(cache=True)
def kinetic_sweep(stack_new, stack_mid, stack_old, origin, h, shape, xi, wq, dt, rho0, moments, jstats):
    """Backward characteristics from every (node, quadrature node) pair.

    ``stack_new/mid/old`` hold the context at ``t + dt``, ``t + dt/2`` and ``t``;
    the old Maxwellian is read from ``stack_old`` (V and p1).  Writes raw
    moments about each node's centre into ``moments[node, :]`` and the min/max
    backward Jacobian into ``jstats``.
    """
    nx, ny, nz = shape[0], shape[1], shape[2]
    M = xi.shape[0]
    c = np.empty(NF)
    F = np.empty(3)
    r = np.empty(3)
    v = np.empty(3)
    rs = np.empty(3)
    vs = np.empty(3)
    kr = np.empty((4, 3))
    kv = np.empty((4, 3))
    kj = np.empty(4)
    jmin = 1e300
    jmax = -1e300
    norm = np.pi ** -1.5
    node = 0
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                r0x = origin[0] + i * h[0]
                r0y = origin[1] + j * h[1]
                r0z = origin[2] + k * h[2]
                c_node = stack_new[:, i, j, k]
                Vc0 = stack_old[0, i, j, k]
                Vc1 = stack_old[1, i, j, k]
                Vc2 = stack_old[2, i, j, k]
                vthc = np.sqrt(2.0 * stack_old[18, i, j, k] / rho0)
                for m in range(NMOM):
                    moments[node, m] = 0.0
                for q in range(M):
                    v0 = Vc0 + vthc * xi[q, 0]
                    v1 = Vc1 + vthc * xi[q, 1]
                    v2 = Vc2 + vthc * xi[q, 2]
                    r[0] = r0x
                    r[1] = r0y
                    r[2] = r0z
                    v[0] = v0
                    v[1] = v1
                    v[2] = v2
                    J = 1.0
                    hb = -dt
                    # stage 1 at the node, time t + dt
                    for f in range(NF):
                        c[f] = c_node[f]
                    d = _force(c, v, rho0, F)
                    for a in range(3):
                        kr[0, a] = v[a]
                        kv[0, a] = F[a]
                    kj[0] = J * d
                    # stages 2, 3 at t + dt/2; stage 4 at t
                    for st in range(1, 4):
                        fac = 0.5 * hb if st < 3 else hb
                        for a in range(3):
                            rs[a] = r[a] + fac * kr[st - 1, a]
                            vs[a] = v[a] + fac * kv[st - 1, a]
                        Js = J + fac * kj[st - 1]
                        if st < 3:
                            _interp(stack_mid, NF, rs, origin, h, shape, c)
                        else:
                            _interp(stack_old, NF, rs, origin, h, shape, c)
                        d = _force(c, vs, rho0, F)
                        for a in range(3):
                            kr[st, a] = vs[a]
                            kv[st, a] = F[a]
                        kj[st] = Js * d
                    for a in range(3):
                        r[a] = r[a] + hb / 6.0 * (kr[0, a] + 2.0 * kr[1, a] + 2.0 * kr[2, a] + kr[3, a])
                        v[a] = v[a] + hb / 6.0 * (kv[0, a] + 2.0 * kv[1, a] + 2.0 * kv[2, a] + kv[3, a])
                    J = J + hb / 6.0 * (kj[0] + 2.0 * kj[1] + 2.0 * kj[2] + kj[3])
                    if J < jmin:
                        jmin = J
                    if J > jmax:
                        jmax = J
                    # old Maxwellian at the departure point
                    _interp(stack_old, NF, r, origin, h, shape, c)
                    vth2 = 2.0 * c[18] / rho0
                    du0 = v[0] - c[0]
                    du1 = v[1] - c[1]
                    du2 = v[2] - c[2]
                    f_dep = rho0 * norm * vth2 ** -1.5 * np.exp(-(du0 * du0 + du1 * du1 + du2 * du2) / vth2)
                    # divide by the centring Gaussian omega(v_node); J is the backward Jacobian
                    x2 = xi[q, 0] ** 2 + xi[q, 1] ** 2 + xi[q, 2] ** 2
                    omega = norm * vthc ** -3 * np.exp(-x2)
                    g = wq[q] * f_dep * J / omega
                    e0 = v0 - Vc0
                    e1 = v1 - Vc1
                    e2 = v2 - Vc2
                    e2n = e0 * e0 + e1 * e1 + e2 * e2
                    moments[node, 0] += g
                    moments[node, 1] += g * e0
                    moments[node, 2] += g * e1
                    moments[node, 3] += g * e2
                    moments[node, 4] += g * e0 * e0
                    moments[node, 5] += g * e1 * e1
                    moments[node, 6] += g * e2 * e2
                    moments[node, 7] += g * e0 * e1
                    moments[node, 8] += g * e0 * e2
                    moments[node, 9] += g * e1 * e2
                    moments[node, 10] += g * e0 * e2n
                    moments[node, 11] += g * e1 * e2n
                    moments[node, 12] += g * e2 * e2n
                node += 1
    jstats[0] = jmin
    jstats[1] = jmax
