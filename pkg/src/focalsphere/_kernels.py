"""Numba-compiled hot loops: BFS, triangle-tree location, force steps.

Everything here is deterministic for a fixed seed regardless of thread
count: parallel loops only write to per-iteration output slots, and all
reductions happen inside a single iteration in a fixed order.
"""

from __future__ import annotations

import math

import numpy as np
from numba import get_thread_id, njit, prange

# working degeneracy floor: arccos cannot resolve angles closer than
# ~1.5e-8 to 0 or pi, so coincidence/antipode tests trigger at 1e-7
ANGLE_EPS = 1e-7
STACK_CAP = 128
_REP_SALT = np.uint64(0xD1B54A32D192ED03)


@njit(cache=True, nogil=True)
def bfs_kernel(indptr, indices, source, dist, queue):
    dist[:] = -1
    dist[source] = 0
    queue[0] = source
    head = 0
    tail = 1
    while head < tail:
        u = queue[head]
        head += 1
        du = dist[u] + 1
        for e in range(indptr[u], indptr[u + 1]):
            v = indices[e]
            if dist[v] < 0:
                dist[v] = du
                queue[tail] = v
                tail += 1
    return tail


@njit(cache=True, inline="always")
def _clamp(x):
    if x > 1.0:
        return 1.0
    if x < -1.0:
        return -1.0
    return x


@njit(cache=True, inline="always")
def _hash_angle(salt, a, b):
    # splitmix64-style scramble -> angle in [0, 2pi)
    h = (salt ^ (a * np.uint64(0x9E3779B97F4A7C15)) ^ (b * np.uint64(0xBF58476D1CE4E5B9)))
    h = (h ^ (h >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    h = (h ^ (h >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    h = h ^ (h >> np.uint64(31))
    return 2.0 * math.pi * (float(h) / 18446744073709551616.0)


@njit(cache=True, inline="always")
def _tangent_dir(px, py, pz, phi):
    # orthonormal tangent pair at p, combined at angle phi
    ax = abs(px)
    ay = abs(py)
    az = abs(pz)
    if ax <= ay and ax <= az:
        ex, ey, ez = 1.0, 0.0, 0.0
    elif ay <= az:
        ex, ey, ez = 0.0, 1.0, 0.0
    else:
        ex, ey, ez = 0.0, 0.0, 1.0
    t1x = py * ez - pz * ey
    t1y = pz * ex - px * ez
    t1z = px * ey - py * ex
    n1 = math.sqrt(t1x * t1x + t1y * t1y + t1z * t1z)
    t1x /= n1
    t1y /= n1
    t1z /= n1
    t2x = py * t1z - pz * t1y
    t2y = pz * t1x - px * t1z
    t2z = px * t1y - py * t1x
    c = math.cos(phi)
    s = math.sin(phi)
    return c * t1x + s * t2x, c * t1y + s * t2y, c * t1z + s * t2z


@njit(cache=True, inline="always")
def _rep_target(px, py, pz, qx, qy, qz, th, theta_max, paper_branch):
    # point at angle th + theta_max from q on the q->p great circle,
    # i.e. p pushed theta_max further away from q. Both slerp forms of the
    # displacement are the same point; pick per the requested rule.
    if paper_branch:
        use_first = (math.pi - th) <= theta_max
    else:
        use_first = th < 0.5 * math.pi  # larger slerp base angle wins
    if use_first:
        base = math.pi - th
        t = theta_max / base
        s = math.sin(base)
        c1 = math.sin((1.0 - t) * base) / s
        c2 = math.sin(t * base) / s
        return c1 * px - c2 * qx, c1 * py - c2 * qy, c1 * pz - c2 * qz
    base = th
    t = (theta_max + th - math.pi) / th
    s = math.sin(base)
    c1 = math.sin((1.0 - t) * base) / s
    c2 = math.sin(t * base) / s
    return -c1 * qx - c2 * px, -c1 * qy - c2 * py, -c1 * qz - c2 * pz


@njit(cache=True, inline="always")
def _root_face(px, py, pz, rv1, rv2, rv3, rn, sector_faces):
    # candidate faces from the azimuth/hemisphere table, verified by the
    # ray-plane intersection's signed barycentric coordinates
    az = math.atan2(py, px)
    if az < 0.0:
        az += 2.0 * math.pi
    sector = int(az / (math.pi / 5.0))
    if sector > 9:
        sector = 9
    hemi = 0 if pz >= 0.0 else 1
    best = -1
    best_min = -1e30
    for pass_no in range(2):
        n_cand = sector_faces.shape[2] if pass_no == 0 else 20
        for c in range(n_cand):
            if pass_no == 0:
                f = sector_faces[sector, hemi, c]
                if f < 0:
                    break
            else:
                f = c
            nx, ny, nz = rn[f, 0], rn[f, 1], rn[f, 2]
            denom = px * nx + py * ny + pz * nz
            if denom <= 1e-12:
                continue
            scale = (rv1[f, 0] * nx + rv1[f, 1] * ny + rv1[f, 2] * nz) / denom
            ix = scale * px
            iy = scale * py
            iz = scale * pz
            l1, l2, l3 = _signed_bary(ix, iy, iz, rv1[f], rv2[f], rv3[f], rn[f])
            m = min(l1, min(l2, l3))
            if m >= -1e-12:
                return f, l1, l2, l3
            if pass_no == 1 and m > best_min:
                best_min = m
                best = f
        if pass_no == 0:
            continue
    # numerically outside everything: take the closest face
    f = best
    nx, ny, nz = rn[f, 0], rn[f, 1], rn[f, 2]
    denom = px * nx + py * ny + pz * nz
    scale = (rv1[f, 0] * nx + rv1[f, 1] * ny + rv1[f, 2] * nz) / denom
    l1, l2, l3 = _signed_bary(scale * px, scale * py, scale * pz, rv1[f], rv2[f], rv3[f], rn[f])
    return f, l1, l2, l3


@njit(cache=True, inline="always")
def _signed_bary(ix, iy, iz, v1, v2, v3, n):
    # areas of the sub-triangles spanned with the intersection point,
    # signed against the face normal so outside points go negative
    ax = v2[0] - ix
    ay = v2[1] - iy
    az = v2[2] - iz
    bx = v3[0] - ix
    by = v3[1] - iy
    bz = v3[2] - iz
    c1x = ay * bz - az * by
    c1y = az * bx - ax * bz
    c1z = ax * by - ay * bx
    ax = v3[0] - ix
    ay = v3[1] - iy
    az = v3[2] - iz
    bx = v1[0] - ix
    by = v1[1] - iy
    bz = v1[2] - iz
    c2x = ay * bz - az * by
    c2y = az * bx - ax * bz
    c2z = ax * by - ay * bx
    ax = v2[0] - v1[0]
    ay = v2[1] - v1[1]
    az = v2[2] - v1[2]
    bx = v3[0] - v1[0]
    by = v3[1] - v1[1]
    bz = v3[2] - v1[2]
    dx = ay * bz - az * by
    dy = az * bx - ax * bz
    dz = ax * by - ay * bx
    area = math.sqrt(dx * dx + dy * dy + dz * dz)
    s1 = 1.0 if (c1x * dx + c1y * dy + c1z * dz) >= 0.0 else -1.0
    s2 = 1.0 if (c2x * dx + c2y * dy + c2z * dz) >= 0.0 else -1.0
    l1 = s1 * math.sqrt(c1x * c1x + c1y * c1y + c1z * c1z) / area
    l2 = s2 * math.sqrt(c2x * c2x + c2y * c2y + c2z * c2z) / area
    return l1, l2, 1.0 - l1 - l2


@njit(cache=True, inline="always")
def _locate_one(px, py, pz, rv1, rv2, rv3, rn, sector_faces, max_level):
    f, l1, l2, l3 = _root_face(px, py, pz, rv1, rv2, rv3, rn, sector_faces)
    cell = f
    for _ in range(max_level):
        # decision borders at lambda = 0.5; refinement is the affine
        # (linear-interpolation) subdivision of the parent triangle
        if l1 > 0.5:
            child = 0
            l1, l2, l3 = 2.0 * l1 - 1.0, 2.0 * l2, 2.0 * l3
        elif l2 > 0.5:
            child = 1
            l1, l2, l3 = 2.0 * l1, 2.0 * l2 - 1.0, 2.0 * l3
        elif l3 > 0.5:
            child = 2
            l1, l2, l3 = 2.0 * l1, 2.0 * l2, 2.0 * l3 - 1.0
        else:
            child = 3
            l1, l2, l3 = 1.0 - 2.0 * l3, 1.0 - 2.0 * l1, 1.0 - 2.0 * l2
        cell = cell * 4 + child
    return cell


@njit(cache=True, nogil=True, parallel=True)
def locate_kernel(pos, ids, rv1, rv2, rv3, rn, sector_faces, max_level, out):
    for k in prange(ids.shape[0]):
        i = ids[k]
        out[k] = _locate_one(
            pos[i, 0], pos[i, 1], pos[i, 2], rv1, rv2, rv3, rn, sector_faces, max_level
        )


@njit(cache=True, nogil=True)
def root_bary_kernel(px, py, pz, rv1, rv2, rv3, rn, sector_faces):
    return _root_face(px, py, pz, rv1, rv2, rv3, rn, sector_faces)


@njit(cache=True, nogil=True)
def repulsors_kernel(
    px, py, pz, own_leaf,
    counts, sums, level_off, edge_ang, leaf_start, leaf_members, pos,
    opening, max_level, exclude,
    out_centers, out_weights, out_ids,
):
    """Collect (mass center, weight) approximations plus leaf members for one probe.

    Returns the number of entries written. The probe's own root-to-leaf
    path is never aggregated, so the excluded node only ever appears as
    an individual leaf member (and is dropped there).
    """
    stack = np.empty(STACK_CAP, np.int64)
    sp = 0
    for root in range(19, -1, -1):
        stack[sp] = root * 8
        sp += 1
    k = 0
    while sp > 0:
        sp -= 1
        code = stack[sp]
        lvl = int(code & 7)
        cell = int(code >> 3)
        flat = level_off[lvl] + cell
        cnt = counts[flat]
        if cnt == 0:
            continue
        on_own = own_leaf >= 0 and (own_leaf >> np.int64(2 * (max_level - lvl))) == cell
        sx = sums[flat, 0]
        sy = sums[flat, 1]
        sz = sums[flat, 2]
        nrm = math.sqrt(sx * sx + sy * sy + sz * sz)
        accept = False
        if not on_own and nrm > 1e-12:
            cx = sx / nrm
            cy = sy / nrm
            cz = sz / nrm
            th = math.acos(_clamp(px * cx + py * cy + pz * cz))
            accept = th > opening * edge_ang[lvl]
        if accept:
            out_centers[k, 0] = cx
            out_centers[k, 1] = cy
            out_centers[k, 2] = cz
            out_weights[k] = cnt
            out_ids[k] = -1
            k += 1
        elif lvl == max_level:
            for m in range(leaf_start[cell], leaf_start[cell + 1]):
                j = leaf_members[m]
                if j == exclude:
                    continue
                out_centers[k, 0] = pos[j, 0]
                out_centers[k, 1] = pos[j, 1]
                out_centers[k, 2] = pos[j, 2]
                out_weights[k] = 1
                out_ids[k] = j
                k += 1
        else:
            base = cell * 4
            nlvl = lvl + 1
            for child in range(3, -1, -1):
                stack[sp] = (base + child) * 8 + nlvl
                sp += 1
    return k


@njit(cache=True, nogil=True, parallel=True)
def step_kernel(
    pos, out, active, indptr, indices,
    counts, sums, level_off, edge_ang, leaf_start, leaf_members, leaf_of,
    theta_max, opening, max_level, jitter_salt, paper_branch, stacks,
):
    """One synchronous force step: reads `pos`, writes `out`.

    Per node: attraction target from active neighbors (distance-squared
    weighted slerp), repulsion target from the triangle-tree traversal
    (1/distance weighted), new position = renormalized mean of the two
    normalized targets. Inactive nodes are copied through. `stacks` is a
    (threads, STACK_CAP) workspace; allocating it once per step instead
    of per node keeps the parallel loop off the allocator lock.
    """
    n = pos.shape[0]
    for i in prange(n):
        px = pos[i, 0]
        py = pos[i, 1]
        pz = pos[i, 2]
        if active[i] == 0:
            out[i, 0] = px
            out[i, 1] = py
            out[i, 2] = pz
            continue
        # -- attraction (Eq: sum of theta^2-weighted capped slerps) --
        axs = 0.0
        ays = 0.0
        azs = 0.0
        has_a = False
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if active[j] == 0:
                continue
            qx = pos[j, 0]
            qy = pos[j, 1]
            qz = pos[j, 2]
            th = math.acos(_clamp(px * qx + py * qy + pz * qz))
            if th < ANGLE_EPS:
                continue  # coincident neighbor: zero weight
            if th > math.pi - ANGLE_EPS:
                phi = _hash_angle(jitter_salt, np.uint64(i), np.uint64(j))
                dx, dy, dz = _tangent_dir(qx, qy, qz, phi)
                ca = math.cos(1e-6)
                sa = math.sin(1e-6)
                qx = ca * qx + sa * dx
                qy = ca * qy + sa * dy
                qz = ca * qz + sa * dz
                th = math.acos(_clamp(px * qx + py * qy + pz * qz))
            t = theta_max / th
            if t > 1.0:
                t = 1.0
            s = math.sin(th)
            w = th * th
            c1 = w * math.sin((1.0 - t) * th) / s
            c2 = w * math.sin(t * th) / s
            axs += c1 * px + c2 * qx
            ays += c1 * py + c2 * qy
            azs += c1 * pz + c2 * qz
            has_a = True
        # -- repulsion (tree traversal, 1/theta weighted fixed-step push) --
        rxs = 0.0
        rys = 0.0
        rzs = 0.0
        has_r = False
        own_leaf = leaf_of[i]
        stack = stacks[get_thread_id()]
        sp = 0
        for root in range(19, -1, -1):
            stack[sp] = root * 8
            sp += 1
        while sp > 0:
            sp -= 1
            code = stack[sp]
            lvl = int(code & 7)
            cell = int(code >> 3)
            flat = level_off[lvl] + cell
            cnt = counts[flat]
            if cnt == 0:
                continue
            on_own = own_leaf >= 0 and (own_leaf >> np.int64(2 * (max_level - lvl))) == cell
            sx = sums[flat, 0]
            sy = sums[flat, 1]
            sz = sums[flat, 2]
            nrm = math.sqrt(sx * sx + sy * sy + sz * sz)
            accept = False
            cx = 0.0
            cy = 0.0
            cz = 0.0
            th = 0.0
            if not on_own and nrm > 1e-12:
                cx = sx / nrm
                cy = sy / nrm
                cz = sz / nrm
                th = math.acos(_clamp(px * cx + py * cy + pz * cz))
                accept = th > opening * edge_ang[lvl]
            if accept:
                if th < ANGLE_EPS or th > math.pi - ANGLE_EPS:
                    # repulsion jitters on a different salt than attraction
                    # so exactly-antipodal pairs do not cancel to a tie
                    phi = _hash_angle(jitter_salt ^ _REP_SALT, np.uint64(i), np.uint64(cell))
                    dx, dy, dz = _tangent_dir(cx, cy, cz, phi)
                    ca = math.cos(1e-6)
                    sa = math.sin(1e-6)
                    cx = ca * cx + sa * dx
                    cy = ca * cy + sa * dy
                    cz = ca * cz + sa * dz
                    th = math.acos(_clamp(px * cx + py * cy + pz * cz))
                tx, ty, tz = _rep_target(px, py, pz, cx, cy, cz, th, theta_max, paper_branch)
                w = cnt / th
                rxs += w * tx
                rys += w * ty
                rzs += w * tz
                has_r = True
            elif lvl == max_level:
                for m in range(leaf_start[cell], leaf_start[cell + 1]):
                    j = leaf_members[m]
                    if j == i:
                        continue
                    qx = pos[j, 0]
                    qy = pos[j, 1]
                    qz = pos[j, 2]
                    th = math.acos(_clamp(px * qx + py * qy + pz * qz))
                    if th < ANGLE_EPS or th > math.pi - ANGLE_EPS:
                        phi = _hash_angle(jitter_salt ^ _REP_SALT, np.uint64(i), np.uint64(j))
                        dx, dy, dz = _tangent_dir(qx, qy, qz, phi)
                        ca = math.cos(1e-6)
                        sa = math.sin(1e-6)
                        qx = ca * qx + sa * dx
                        qy = ca * qy + sa * dy
                        qz = ca * qz + sa * dz
                        th = math.acos(_clamp(px * qx + py * qy + pz * qz))
                    tx, ty, tz = _rep_target(px, py, pz, qx, qy, qz, th, theta_max, paper_branch)
                    w = 1.0 / th
                    rxs += w * tx
                    rys += w * ty
                    rzs += w * tz
                    has_r = True
            else:
                base = cell * 4
                nlvl = lvl + 1
                for child in range(3, -1, -1):
                    stack[sp] = (base + child) * 8 + nlvl
                    sp += 1
        # -- combine (mean of the two normalized targets, renormalized) --
        na = math.sqrt(axs * axs + ays * ays + azs * azs)
        nr = math.sqrt(rxs * rxs + rys * rys + rzs * rzs)
        if has_a and na > 1e-300 and has_r and nr > 1e-300:
            vx = 0.5 * (axs / na + rxs / nr)
            vy = 0.5 * (ays / na + rys / nr)
            vz = 0.5 * (azs / na + rzs / nr)
        elif has_r and nr > 1e-300:
            vx, vy, vz = rxs, rys, rzs
        elif has_a and na > 1e-300:
            vx, vy, vz = axs, ays, azs
        else:
            out[i, 0] = px
            out[i, 1] = py
            out[i, 2] = pz
            continue
        nv = math.sqrt(vx * vx + vy * vy + vz * vz)
        out[i, 0] = vx / nv
        out[i, 1] = vy / nv
        out[i, 2] = vz / nv
