"""Compiled inner loops for the physics step and contact resolution.

Everything here works on flat numpy arrays so the 1200 Hz step stays cheap.
The Python-facing wrappers live in ``world``.

Parameter vector layout (``prm``), see ``world.SimParams.as_array``:
  0 r_tip, 1 k_contact, 2 b_contact, 3 mu, 4 b_tangent, 5 ground_decel,
  6 v_max, 7 palm_x, 8 palm_half_width, 9 palm_radius, 10 joint_limit,
  11 hard_stop_k, 12 k_tangent

Friction is elastic-plastic: each touching (body, object) pair carries a
tangential anchor displacement in ``anchor`` (3 + n_obj, n_obj) that acts as a
spring while sticking and is clipped to the friction cone when slipping.
"""

import math

import numpy as np
from numba import njit

# contact row layout produced by ``contact_rows``
C_BODY, C_OBJ, C_PX, C_PY, C_NX, C_NY, C_PEN, C_FN, C_FT, C_VT = range(10)
N_CONTACT_COLS = 10
BODY_LEFT, BODY_RIGHT, BODY_PALM = 0, 1, 2
# object-object rows use body = 3 + other object index


@njit(cache=True)
def finger_chain(q, base, links, mount, sign, out_pts):
    """Fill out_pts (4, 2) with joint positions in the gripper frame."""
    x = base[0]
    y = base[1]
    out_pts[0, 0] = x
    out_pts[0, 1] = y
    phi = mount
    for i in range(3):
        phi += q[i]
        a = sign * phi
        x += links[i] * math.cos(a)
        y += links[i] * math.sin(a)
        out_pts[i + 1, 0] = x
        out_pts[i + 1, 1] = y


@njit(cache=True)
def _tip_state(q, qd, base_pose, base_vel, fbase, links, mount, sign, J, pts):
    """World tip position/velocity; fills the gripper-frame Jacobian J (2, 3)."""
    finger_chain(q, fbase, links, mount, sign, pts)
    tx = pts[3, 0]
    ty = pts[3, 1]
    vgx = 0.0
    vgy = 0.0
    for i in range(3):
        J[0, i] = -sign * (ty - pts[i, 1])
        J[1, i] = sign * (tx - pts[i, 0])
        vgx += J[0, i] * qd[i]
        vgy += J[1, i] * qd[i]
    c = math.cos(base_pose[2])
    s = math.sin(base_pose[2])
    wx = base_pose[0] + c * tx - s * ty
    wy = base_pose[1] + s * tx + c * ty
    rx = wx - base_pose[0]
    ry = wy - base_pose[1]
    vx = base_vel[0] - base_vel[2] * ry + c * vgx - s * vgy
    vy = base_vel[1] + base_vel[2] * rx + s * vgx + c * vgy
    return wx, wy, vx, vy


@njit(cache=True)
def _normal_law(pen, closing, k, b):
    if pen <= 0.0:
        return 0.0
    f = k * pen + b * closing
    if f < 0.0:
        f = 0.0
    return f


@njit(cache=True)
def _friction(vt, slip, fn, mu, bt, kt):
    f = -kt * slip - bt * vt
    lim = mu * fn
    if f > lim:
        f = lim
    elif f < -lim:
        f = -lim
    return f


@njit(cache=True)
def contact_rows(q, qd, base_pose, base_vel, fbase, links, mount, signs,
                 obj_pos, obj_vel, obj_r, anchor, prm, out):
    """Resolve every contact in the current state.

    Rows hold (body, object, point x/y, normal x/y, penetration, f_n, f_t, v_t).
    The normal points from the body into the object; f_t is the tangential
    force on the object along (-n_y, n_x) and v_t the object's sliding speed
    relative to the body along the same direction. Returns the number of rows used.
    """
    r_tip = prm[0]
    k = prm[1]
    b = prm[2]
    mu = prm[3]
    bt = prm[4]
    kt = prm[12]
    n_obj = obj_pos.shape[0]
    J = np.empty((2, 3))
    pts = np.empty((4, 2))
    m = 0
    for f in range(2):
        tx, ty, tvx, tvy = _tip_state(q[f], qd[f], base_pose, base_vel, fbase[f],
                                      links[f], mount[f], signs[f], J, pts)
        for j in range(n_obj):
            dx = obj_pos[j, 0] - tx
            dy = obj_pos[j, 1] - ty
            d = math.sqrt(dx * dx + dy * dy)
            reach = obj_r[j] + r_tip
            if d > reach or d == 0.0:
                continue
            nx = dx / d
            ny = dy / d
            pen = reach - d
            rvx = obj_vel[j, 0] - tvx
            rvy = obj_vel[j, 1] - tvy
            closing = -(rvx * nx + rvy * ny)
            fn = _normal_law(pen, closing, k, b)
            vt = -rvx * ny + rvy * nx
            ft = _friction(vt, anchor[f, j], fn, mu, bt, kt)
            if m < out.shape[0]:
                out[m, C_BODY] = f
                out[m, C_OBJ] = j
                out[m, C_PX] = tx + nx * r_tip
                out[m, C_PY] = ty + ny * r_tip
                out[m, C_NX] = nx
                out[m, C_NY] = ny
                out[m, C_PEN] = pen
                out[m, C_FN] = fn
                out[m, C_FT] = ft
                out[m, C_VT] = vt
                m += 1
    # palm: a capsule along the gripper y-axis at x = palm_x
    c = math.cos(base_pose[2])
    s = math.sin(base_pose[2])
    for j in range(n_obj):
        rx = obj_pos[j, 0] - base_pose[0]
        ry = obj_pos[j, 1] - base_pose[1]
        gx = c * rx + s * ry
        gy = -s * rx + c * ry
        py = min(max(gy, -prm[8]), prm[8])
        px = prm[7]
        dxg = gx - px
        dyg = gy - py
        d = math.sqrt(dxg * dxg + dyg * dyg)
        reach = obj_r[j] + prm[9]
        if d > reach or d == 0.0:
            continue
        nxg = dxg / d
        nyg = dyg / d
        nx = c * nxg - s * nyg
        ny = s * nxg + c * nyg
        wpx = base_pose[0] + c * px - s * py
        wpy = base_pose[1] + s * px + c * py
        pvx = base_vel[0] - base_vel[2] * (wpy - base_pose[1])
        pvy = base_vel[1] + base_vel[2] * (wpx - base_pose[0])
        rvx = obj_vel[j, 0] - pvx
        rvy = obj_vel[j, 1] - pvy
        pen = reach - d
        closing = -(rvx * nx + rvy * ny)
        fn = _normal_law(pen, closing, k, b)
        vt = -rvx * ny + rvy * nx
        ft = _friction(vt, anchor[BODY_PALM, j], fn, mu, bt, kt)
        if m < out.shape[0]:
            out[m, C_BODY] = BODY_PALM
            out[m, C_OBJ] = j
            out[m, C_PX] = wpx + nx * prm[9]
            out[m, C_PY] = wpy + ny * prm[9]
            out[m, C_NX] = nx
            out[m, C_NY] = ny
            out[m, C_PEN] = pen
            out[m, C_FN] = fn
            out[m, C_FT] = ft
            out[m, C_VT] = vt
            m += 1
    # object pairs; normal points from object i into object j
    for i in range(n_obj):
        for j in range(i + 1, n_obj):
            dx = obj_pos[j, 0] - obj_pos[i, 0]
            dy = obj_pos[j, 1] - obj_pos[i, 1]
            d = math.sqrt(dx * dx + dy * dy)
            reach = obj_r[i] + obj_r[j]
            if d > reach or d == 0.0:
                continue
            nx = dx / d
            ny = dy / d
            pen = reach - d
            rvx = obj_vel[j, 0] - obj_vel[i, 0]
            rvy = obj_vel[j, 1] - obj_vel[i, 1]
            closing = -(rvx * nx + rvy * ny)
            fn = _normal_law(pen, closing, k, b)
            vt = -rvx * ny + rvy * nx
            ft = _friction(vt, anchor[3 + i, j], fn, mu, bt, kt)
            if m < out.shape[0]:
                out[m, C_BODY] = 3 + i
                out[m, C_OBJ] = j
                out[m, C_PX] = obj_pos[i, 0] + nx * obj_r[i]
                out[m, C_PY] = obj_pos[i, 1] + ny * obj_r[i]
                out[m, C_NX] = nx
                out[m, C_NY] = ny
                out[m, C_PEN] = pen
                out[m, C_FN] = fn
                out[m, C_FT] = ft
                out[m, C_VT] = vt
                m += 1
    return m


@njit(cache=True)
def step_n(q, qd, base_pose, base_vel, fbase, links, mount, signs,
           obj_pos, obj_vel, obj_r, obj_m, obj_static, anchor,
           tau_cmd, inertia, joint_damping, prm, dt, nsteps, rows):
    """Advance the world ``nsteps`` semi-implicit Euler steps in place.

    ``tau_cmd`` (2, 3) is held constant over the call. ``rows`` is scratch
    space for contact rows. Returns the number of contact rows of the last step.
    """
    n_obj = obj_pos.shape[0]
    J = np.empty((2, 3))
    pts = np.empty((4, 2))
    fobj = np.zeros((n_obj, 2))
    ftip = np.zeros((3, 2))
    v_max = prm[6]
    decel = prm[5]
    lim = prm[10]
    kstop = prm[11]
    slip_cap = prm[3] / prm[12]
    touched = np.zeros(anchor.shape, dtype=np.bool_)
    m = 0
    for _ in range(nsteps):
        m = contact_rows(q, qd, base_pose, base_vel, fbase, links, mount, signs,
                         obj_pos, obj_vel, obj_r, anchor, prm, rows)
        # advance the friction anchors; pairs out of contact forget theirs
        touched[:, :] = False
        for r in range(m):
            body = int(rows[r, C_BODY])
            j = int(rows[r, C_OBJ])
            a = anchor[body, j] + rows[r, C_VT] * dt
            cap = slip_cap * rows[r, C_FN]
            if a > cap:
                a = cap
            elif a < -cap:
                a = -cap
            anchor[body, j] = a
            touched[body, j] = True
        for bi in range(anchor.shape[0]):
            for j in range(n_obj):
                if not touched[bi, j]:
                    anchor[bi, j] = 0.0
        fobj[:, :] = 0.0
        ftip[:, :] = 0.0
        for r in range(m):
            body = int(rows[r, C_BODY])
            j = int(rows[r, C_OBJ])
            nx = rows[r, C_NX]
            ny = rows[r, C_NY]
            fn = rows[r, C_FN]
            ft = rows[r, C_FT]
            fx = fn * nx - ft * ny
            fy = fn * ny + ft * nx
            fobj[j, 0] += fx
            fobj[j, 1] += fy
            if body < 3:
                ftip[body, 0] -= fx
                ftip[body, 1] -= fy
            else:
                i = body - 3
                fobj[i, 0] -= fx
                fobj[i, 1] -= fy
        # fingers: joint-space dynamics with decoupled inertia
        c = math.cos(base_pose[2])
        s = math.sin(base_pose[2])
        for f in range(2):
            _tip_state(q[f], qd[f], base_pose, base_vel, fbase[f], links[f],
                       mount[f], signs[f], J, pts)
            # contact force on the tip, expressed in the gripper frame
            gx = c * ftip[f, 0] + s * ftip[f, 1]
            gy = -s * ftip[f, 0] + c * ftip[f, 1]
            for i in range(3):
                tau = tau_cmd[f, i] + J[0, i] * gx + J[1, i] * gy - joint_damping[i] * qd[f, i]
                if q[f, i] > lim:
                    tau -= kstop * (q[f, i] - lim)
                elif q[f, i] < -lim:
                    tau -= kstop * (q[f, i] + lim)
                qd[f, i] += tau / inertia[i] * dt
            for i in range(3):
                q[f, i] += qd[f, i] * dt
        # objects: contact forces, ground friction, speed cap
        for j in range(n_obj):
            if obj_static[j]:
                obj_vel[j, 0] = 0.0
                obj_vel[j, 1] = 0.0
                continue
            vx = obj_vel[j, 0] + fobj[j, 0] / obj_m[j] * dt
            vy = obj_vel[j, 1] + fobj[j, 1] / obj_m[j] * dt
            sp = math.sqrt(vx * vx + vy * vy)
            dv = decel * dt
            if sp <= dv:
                vx = 0.0
                vy = 0.0
            else:
                scale = (sp - dv) / sp
                if sp - dv > v_max:
                    scale = v_max / sp
                vx *= scale
                vy *= scale
            obj_vel[j, 0] = vx
            obj_vel[j, 1] = vy
            obj_pos[j, 0] += vx * dt
            obj_pos[j, 1] += vy * dt
        base_pose[0] += base_vel[0] * dt
        base_pose[1] += base_vel[1] * dt
        base_pose[2] += base_vel[2] * dt
    return m


@njit(cache=True)
def first_nonfinite(q, qd, obj_pos, obj_vel, base_pose):
    """Index (0..4) of the first argument holding a NaN/inf, or -1."""
    if not np.all(np.isfinite(q)):
        return 0
    if not np.all(np.isfinite(qd)):
        return 1
    if not np.all(np.isfinite(obj_pos)):
        return 2
    if not np.all(np.isfinite(obj_vel)):
        return 3
    if not np.all(np.isfinite(base_pose)):
        return 4
    return -1


@njit(cache=True)
def ray_disk(ox, oy, dx, dy, cx, cy, r):
    """Distance along a unit ray to the first non-negative hit on a circle, or inf."""
    fx = ox - cx
    fy = oy - cy
    bh = fx * dx + fy * dy
    c = fx * fx + fy * fy - r * r
    disc = bh * bh - c
    if disc < 0.0:
        return math.inf
    sq = math.sqrt(disc)
    t0 = -bh - sq
    if t0 >= 0.0:
        return t0
    t1 = -bh + sq
    if t1 >= 0.0:
        # origin inside the circle: the near root is behind the origin
        return t1
    return math.inf


@njit(cache=True)
def cast_rays(origins, dirs, obj_pos, obj_r, d_max, out):
    """Min-over-objects ray distances clamped to d_max (no hit -> d_max)."""
    for k in range(origins.shape[0]):
        best = d_max
        for j in range(obj_pos.shape[0]):
            t = ray_disk(origins[k, 0], origins[k, 1], dirs[k, 0], dirs[k, 1],
                         obj_pos[j, 0], obj_pos[j, 1], obj_r[j])
            if t < best:
                best = t
        out[k] = best


@njit(cache=True)
def sensor_snapshot(q, qd, base_pose, base_vel, fbase, links, mount, signs,
                    obj_pos, obj_vel, obj_r, anchor, prm, d_max, prox, tips, rows):
    """One sensor refresh: 7 ray distances into ``prox`` and, per fingertip, the
    strongest contact as (in_contact, theta, f_n, f_shear) into ``tips`` (2, 4).
    """
    pts = np.empty((4, 2))
    origins = np.empty((7, 2))
    dirs = np.empty((7, 2))
    c = math.cos(base_pose[2])
    s = math.sin(base_pose[2])
    headings = np.empty(2)
    for f in range(2):
        finger_chain(q[f], fbase[f], links[f], mount[f], signs[f], pts)
        gx = pts[3, 0]
        gy = pts[3, 1]
        h = base_pose[2] + signs[f] * (mount[f] + q[f, 0] + q[f, 1] + q[f, 2])
        headings[f] = h
        fx = math.cos(h)
        fy = math.sin(h)
        if f == 0:
            ox, oy = -fy, fx
            ko, kf, ki = 0, 1, 2
        else:
            ox, oy = fy, -fx
            ko, kf, ki = 6, 5, 4
        wx = base_pose[0] + c * gx - s * gy
        wy = base_pose[1] + s * gx + c * gy
        for k in (ko, kf, ki):
            origins[k, 0] = wx
            origins[k, 1] = wy
        dirs[ko, 0] = ox
        dirs[ko, 1] = oy
        dirs[kf, 0] = fx
        dirs[kf, 1] = fy
        dirs[ki, 0] = -ox
        dirs[ki, 1] = -oy
    origins[3, 0] = base_pose[0] + c * prm[7]
    origins[3, 1] = base_pose[1] + s * prm[7]
    dirs[3, 0] = c
    dirs[3, 1] = s
    cast_rays(origins, dirs, obj_pos, obj_r, d_max, prox)
    m = contact_rows(q, qd, base_pose, base_vel, fbase, links, mount, signs,
                     obj_pos, obj_vel, obj_r, anchor, prm, rows)
    tips[:, :] = 0.0
    for r in range(m):
        body = int(rows[r, C_BODY])
        if body > 1:
            continue
        fn = rows[r, C_FN]
        if tips[body, 0] == 0.0 or fn > tips[body, 2]:
            th = math.atan2(rows[r, C_NY], rows[r, C_NX]) - headings[body]
            th = math.atan2(math.sin(th), math.cos(th))
            tips[body, 0] = 1.0
            tips[body, 1] = th
            tips[body, 2] = fn
            tips[body, 3] = -rows[r, C_FT]
    return m
