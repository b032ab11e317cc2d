"""Compiled numerical kernels: field assembly and characteristic tracing.

Everything here is numba-jitted scalar code. The tracing kernels keep the
whole field grid in cache (a 128x128 field is ~256 KB), so a fused RK4
step costs a handful of gathers; trajectories are integrated one at a
time in plain loops.

Status codes for traces: 0 = exited, 1 = trapped, 2 = left the grid.
"""
import numpy as np
from numba import njit

TWO_PI = 2.0 * np.pi


@njit(cache=True, fastmath=True)
def _kernel_xy(xx, xy, yx, yy, R2, tiny2):
    """Gradient kernel grad_x G for -Laplace with zero Dirichlet data."""
    dx = xx - yx
    dy = xy - yy
    r2 = dx * dx + dy * dy
    kx = -dx / (TWO_PI * r2)
    ky = -dy / (TWO_PI * r2)
    ys2 = yx * yx + yy * yy
    if ys2 > tiny2:
        f = R2 / ys2
        ex = xx - f * yx
        ey = xy - f * yy
        q2 = ex * ex + ey * ey
        kx += ex / (TWO_PI * q2)
        ky += ey / (TWO_PI * q2)
    return kx, ky


@njit(cache=True, fastmath=True)
def assemble(targets, sources, src_values, n, radius):
    """Sum h^2 * kernel * source over the source cells, per target cell.

    The 3x3 neighborhood of each target is re-integrated on a 4x refined
    subgrid of the source cell (16 midpoints, piecewise-constant source);
    a subnode falling exactly on the target would be skipped.
    """
    h = 2.0 * radius / n
    R2 = radius * radius
    tiny2 = (1e-14 * radius) ** 2
    sing2 = (1e-13 * h) ** 2
    m = targets.shape[0]
    k = sources.shape[0]
    out = np.zeros((m, 2))
    w = h * h
    wsub = (h / 4.0) ** 2
    for t in range(m):
        ti = targets[t, 0]
        tj = targets[t, 1]
        xx = -radius + (ti + 0.5) * h
        xy = -radius + (tj + 0.5) * h
        accx = 0.0
        accy = 0.0
        for s in range(k):
            si = sources[s, 0]
            sj = sources[s, 1]
            sval = src_values[si, sj]
            yx = -radius + (si + 0.5) * h
            yy = -radius + (sj + 0.5) * h
            di = si - ti
            dj = sj - tj
            if di >= -1 and di <= 1 and dj >= -1 and dj <= 1:
                for a in range(4):
                    oy = yx - h / 2.0 + (a + 0.5) * h / 4.0
                    for b in range(4):
                        oz = yy - h / 2.0 + (b + 0.5) * h / 4.0
                        ddx = xx - oy
                        ddy = xy - oz
                        if ddx * ddx + ddy * ddy < sing2:
                            continue
                        kx, ky = _kernel_xy(xx, xy, oy, oz, R2, tiny2)
                        accx += wsub * kx * sval
                        accy += wsub * ky * sval
            else:
                kx, ky = _kernel_xy(xx, xy, yx, yy, R2, tiny2)
                accx += w * kx * sval
                accy += w * ky * sval
        out[t, 0] = accx
        out[t, 1] = accy
    return out


@njit(cache=True, fastmath=True, inline="always")
def _field_at(filled, n, h, radius, x, y):
    gx = (x + radius) / h - 0.5
    gy = (y + radius) / h - 0.5
    if gx < 0.0:
        gx = 0.0
    elif gx > n - 1.000001:
        gx = n - 1.000001
    if gy < 0.0:
        gy = 0.0
    elif gy > n - 1.000001:
        gy = n - 1.000001
    i0 = int(gx)
    j0 = int(gy)
    fx = gx - i0
    fy = gy - j0
    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy
    ex = (w00 * filled[i0, j0, 0] + w10 * filled[i0 + 1, j0, 0]
          + w01 * filled[i0, j0 + 1, 0] + w11 * filled[i0 + 1, j0 + 1, 0])
    ey = (w00 * filled[i0, j0, 1] + w10 * filled[i0 + 1, j0, 1]
          + w01 * filled[i0, j0 + 1, 1] + w11 * filled[i0 + 1, j0 + 1, 1])
    return ex, ey


@njit(cache=True, fastmath=True, inline="always")
def _rk4_step(filled, n, h, radius, x, y, vx, vy, dt, sgn):
    """One RK4 step of xdot = sgn v, vdot = sgn E(x)."""
    a1x, a1y = _field_at(filled, n, h, radius, x, y)
    k1x = sgn * vx
    k1y = sgn * vy
    k1vx = sgn * a1x
    k1vy = sgn * a1y

    hx = x + 0.5 * dt * k1x
    hy = y + 0.5 * dt * k1y
    a2x, a2y = _field_at(filled, n, h, radius, hx, hy)
    k2x = sgn * (vx + 0.5 * dt * k1vx)
    k2y = sgn * (vy + 0.5 * dt * k1vy)
    k2vx = sgn * a2x
    k2vy = sgn * a2y

    hx = x + 0.5 * dt * k2x
    hy = y + 0.5 * dt * k2y
    a3x, a3y = _field_at(filled, n, h, radius, hx, hy)
    k3x = sgn * (vx + 0.5 * dt * k2vx)
    k3y = sgn * (vy + 0.5 * dt * k2vy)
    k3vx = sgn * a3x
    k3vy = sgn * a3y

    hx = x + dt * k3x
    hy = y + dt * k3y
    a4x, a4y = _field_at(filled, n, h, radius, hx, hy)
    k4x = sgn * (vx + dt * k3vx)
    k4y = sgn * (vy + dt * k3vy)
    k4vx = sgn * a4x
    k4vy = sgn * a4y

    c = dt / 6.0
    return (x + c * (k1x + 2.0 * (k2x + k3x) + k4x),
            y + c * (k1y + 2.0 * (k2y + k3y) + k4y),
            vx + c * (k1vx + 2.0 * (k2vx + k3vx) + k4vx),
            vy + c * (k1vy + 2.0 * (k2vy + k3vy) + k4vy))


@njit(cache=True, fastmath=True)
def trace_batch(x0, v0, filled, n, radius, sgn, dt_scale,
                status, t_out, x_out, v_out, steps_out, dev_out):
    """Integrate each phase point to the boundary. sgn=+1 forward, -1 backward.

    dev_out records the largest deviation from the free-flight straight
    line, for the straight-line deviation diagnostic.
    """
    h = 2.0 * radius / n
    R2 = radius * radius
    m = x0.shape[0]
    for i in range(m):
        x = x0[i, 0]
        y = x0[i, 1]
        vx = v0[i, 0]
        vy = v0[i, 1]
        speed = np.sqrt(vx * vx + vy * vy)
        tcap = 8.0 * radius / speed          # 4 R_diam / |v|
        dt = h / (2.0 * speed)
        if dt > tcap / 64.0:
            dt = tcap / 64.0
        dt *= dt_scale
        tmax = 10.0 * tcap
        t = 0.0
        nsteps = 0
        st = 1
        maxdev = 0.0
        sx = x
        sy = y
        svx = vx
        svy = vy
        while t < tmax:
            nx_, ny_, nvx, nvy = _rk4_step(filled, n, h, radius, x, y, vx, vy, dt, sgn)
            nsteps += 1
            if nx_ * nx_ + ny_ * ny_ > R2:
                # bisect the last step on the step fraction
                lo = 0.0
                hi = dt
                fx = nx_
                fy = ny_
                fvx = nvx
                fvy = nvy
                for _ in range(60):
                    if hi - lo <= 1e-12 * dt:
                        break
                    mid = 0.5 * (lo + hi)
                    mx, my, mvx, mvy = _rk4_step(filled, n, h, radius, x, y, vx, vy, mid, sgn)
                    if mx * mx + my * my > R2:
                        hi = mid
                        fx = mx
                        fy = my
                        fvx = mvx
                        fvy = mvy
                    else:
                        lo = mid
                x = fx
                y = fy
                vx = fvx
                vy = fvy
                t += hi
                st = 0
                break
            x = nx_
            y = ny_
            vx = nvx
            vy = nvy
            t += dt
            dx = x - (sx + sgn * svx * t)
            dy = y - (sy + sgn * svy * t)
            dev = dx * dx + dy * dy
            if dev > maxdev:
                maxdev = dev
            if abs(x) > radius + h or abs(y) > radius + h:
                st = 2
                break
        status[i] = st
        t_out[i] = t
        x_out[i, 0] = x
        x_out[i, 1] = y
        v_out[i, 0] = vx
        v_out[i, 1] = vy
        steps_out[i] = nsteps
        dev_out[i] = np.sqrt(maxdev)


@njit(cache=True, fastmath=True)
def trace_record(x0x, x0y, v0x, v0y, filled, n, radius, sgn, dt_scale, samples):
    """Single trace that stores (t, x, y, vx, vy) after every step.

    samples must have room for the worst case (10 tcap / dt plus slack).
    Returns (status, t, x, y, vx, vy, nsteps, nsamples, maxdev).
    """
    h = 2.0 * radius / n
    R2 = radius * radius
    x = x0x
    y = x0y
    vx = v0x
    vy = v0y
    speed = np.sqrt(vx * vx + vy * vy)
    tcap = 8.0 * radius / speed
    dt = h / (2.0 * speed)
    if dt > tcap / 64.0:
        dt = tcap / 64.0
    dt *= dt_scale
    tmax = 10.0 * tcap
    t = 0.0
    nsteps = 0
    st = 1
    maxdev = 0.0
    k = 0
    samples[k, 0] = t
    samples[k, 1] = x
    samples[k, 2] = y
    samples[k, 3] = vx
    samples[k, 4] = vy
    k += 1
    while t < tmax:
        nx_, ny_, nvx, nvy = _rk4_step(filled, n, h, radius, x, y, vx, vy, dt, sgn)
        nsteps += 1
        if nx_ * nx_ + ny_ * ny_ > R2:
            lo = 0.0
            hi = dt
            fx = nx_
            fy = ny_
            fvx = nvx
            fvy = nvy
            for _ in range(60):
                if hi - lo <= 1e-12 * dt:
                    break
                mid = 0.5 * (lo + hi)
                mx, my, mvx, mvy = _rk4_step(filled, n, h, radius, x, y, vx, vy, mid, sgn)
                if mx * mx + my * my > R2:
                    hi = mid
                    fx = mx
                    fy = my
                    fvx = mvx
                    fvy = mvy
                else:
                    lo = mid
            x = fx
            y = fy
            vx = fvx
            vy = fvy
            t += hi
            st = 0
            break
        x = nx_
        y = ny_
        vx = nvx
        vy = nvy
        t += dt
        if k < samples.shape[0]:
            samples[k, 0] = t
            samples[k, 1] = x
            samples[k, 2] = y
            samples[k, 3] = vx
            samples[k, 4] = vy
            k += 1
        dx = x - (x0x + sgn * v0x * t)
        dy = y - (x0y + sgn * v0y * t)
        dev = dx * dx + dy * dy
        if dev > maxdev:
            maxdev = dev
        if abs(x) > radius + h or abs(y) > radius + h:
            st = 2
            break
    if st == 0 and k < samples.shape[0]:
        samples[k, 0] = t
        samples[k, 1] = x
        samples[k, 2] = y
        samples[k, 3] = vx
        samples[k, 4] = vy
        k += 1
    return st, t, x, y, vx, vy, nsteps, k, np.sqrt(maxdev)


@njit(cache=True, fastmath=True, inline="always")
def _grad_at(grads, n, h, radius, x, y):
    """Bilinear (dEx/dx, dEx/dy, dEy/dx, dEy/dy) at a point."""
    gx = (x + radius) / h - 0.5
    gy = (y + radius) / h - 0.5
    if gx < 0.0:
        gx = 0.0
    elif gx > n - 1.000001:
        gx = n - 1.000001
    if gy < 0.0:
        gy = 0.0
    elif gy > n - 1.000001:
        gy = n - 1.000001
    i0 = int(gx)
    j0 = int(gy)
    fx = gx - i0
    fy = gy - j0
    w00 = (1.0 - fx) * (1.0 - fy)
    w10 = fx * (1.0 - fy)
    w01 = (1.0 - fx) * fy
    w11 = fx * fy
    g0 = (w00 * grads[i0, j0, 0] + w10 * grads[i0 + 1, j0, 0]
          + w01 * grads[i0, j0 + 1, 0] + w11 * grads[i0 + 1, j0 + 1, 0])
    g1 = (w00 * grads[i0, j0, 1] + w10 * grads[i0 + 1, j0, 1]
          + w01 * grads[i0, j0 + 1, 1] + w11 * grads[i0 + 1, j0 + 1, 1])
    g2 = (w00 * grads[i0, j0, 2] + w10 * grads[i0 + 1, j0, 2]
          + w01 * grads[i0, j0 + 1, 2] + w11 * grads[i0 + 1, j0 + 1, 2])
    g3 = (w00 * grads[i0, j0, 3] + w10 * grads[i0 + 1, j0, 3]
          + w01 * grads[i0, j0 + 1, 3] + w11 * grads[i0 + 1, j0 + 1, 3])
    return g0, g1, g2, g3


@njit(cache=True, fastmath=True)
def _aug_rhs(filled, grads, n, h, radius, sgn, state, out):
    """RHS of the variational system: state = (x, v, J flattened row-major).

    J = d(X, V)/d(x0, v0) is 4x4 with rows (X1, X2, V1, V2); its rate is
    [[0, I], [grad E, 0]] J, where (grad E)[i, j] = dE_i/dx_j.
    """
    x = state[0]
    y = state[1]
    vx = state[2]
    vy = state[3]
    ex, ey = _field_at(filled, n, h, radius, x, y)
    g0, g1, g2, g3 = _grad_at(grads, n, h, radius, x, y)
    out[0] = sgn * vx
    out[1] = sgn * vy
    out[2] = sgn * ex
    out[3] = sgn * ey
    # J rows: 0..1 positions, 2..3 velocities; columns = initial coords
    for c in range(4):
        jx1 = state[4 + 0 * 4 + c]
        jx2 = state[4 + 1 * 4 + c]
        jv1 = state[4 + 2 * 4 + c]
        jv2 = state[4 + 3 * 4 + c]
        out[4 + 0 * 4 + c] = sgn * jv1
        out[4 + 1 * 4 + c] = sgn * jv2
        out[4 + 2 * 4 + c] = sgn * (g0 * jx1 + g1 * jx2)
        out[4 + 3 * 4 + c] = sgn * (g2 * jx1 + g3 * jx2)


@njit(cache=True, fastmath=True)
def _aug_step(filled, grads, n, h, radius, sgn, state, dt, k1, k2, k3, k4, tmp, out):
    _aug_rhs(filled, grads, n, h, radius, sgn, state, k1)
    for i in range(20):
        tmp[i] = state[i] + 0.5 * dt * k1[i]
    _aug_rhs(filled, grads, n, h, radius, sgn, tmp, k2)
    for i in range(20):
        tmp[i] = state[i] + 0.5 * dt * k2[i]
    _aug_rhs(filled, grads, n, h, radius, sgn, tmp, k3)
    for i in range(20):
        tmp[i] = state[i] + dt * k3[i]
    _aug_rhs(filled, grads, n, h, radius, sgn, tmp, k4)
    c = dt / 6.0
    for i in range(20):
        out[i] = state[i] + c * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])


@njit(cache=True, fastmath=True)
def trace_variational(x0x, x0y, v0x, v0y, filled, grads, n, radius, sgn, dt_scale):
    """Trace with the 4x4 flow Jacobian co-integrated; J(0) = identity.

    Returns (status, t, x, y, vx, vy, nsteps, J) with J the Jacobian at
    the exit time.
    """
    h = 2.0 * radius / n
    R2 = radius * radius
    state = np.zeros(20)
    state[0] = x0x
    state[1] = x0y
    state[2] = v0x
    state[3] = v0y
    for i in range(4):
        state[4 + i * 4 + i] = 1.0
    k1 = np.empty(20)
    k2 = np.empty(20)
    k3 = np.empty(20)
    k4 = np.empty(20)
    tmp = np.empty(20)
    new = np.empty(20)
    speed = np.sqrt(v0x * v0x + v0y * v0y)
    tcap = 8.0 * radius / speed
    dt = h / (2.0 * speed)
    if dt > tcap / 64.0:
        dt = tcap / 64.0
    dt *= dt_scale
    tmax = 10.0 * tcap
    t = 0.0
    nsteps = 0
    st = 1
    while t < tmax:
        _aug_step(filled, grads, n, h, radius, sgn, state, dt, k1, k2, k3, k4, tmp, new)
        nsteps += 1
        if new[0] * new[0] + new[1] * new[1] > R2:
            lo = 0.0
            hi = dt
            fin = new.copy()
            for _ in range(60):
                if hi - lo <= 1e-12 * dt:
                    break
                mid = 0.5 * (lo + hi)
                _aug_step(filled, grads, n, h, radius, sgn, state, mid, k1, k2, k3, k4, tmp, new)
                if new[0] * new[0] + new[1] * new[1] > R2:
                    hi = mid
                    fin = new.copy()
                else:
                    lo = mid
            state = fin
            t += hi
            st = 0
            break
        for i in range(20):
            state[i] = new[i]
        t += dt
        if abs(state[0]) > radius + h or abs(state[1]) > radius + h:
            st = 2
            break
    J = state[4:].copy().reshape(4, 4)
    return st, t, state[0], state[1], state[2], state[3], nsteps, J
