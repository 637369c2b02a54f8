"""Numba-compiled kernels for the hot paths.

Everything here is deterministic: parallel loops only ever write to
per-iteration output slots, no fastmath, no cross-thread reductions, so
results are bit-identical run to run regardless of thread count.

Grid values are passed as a flat (n, 3) float64 array in x-fastest order
together with dims/origin/spacing; the trilinear formula must stay in sync
with the numpy implementation in ``field.py`` (same operation order).
"""

import math

import numpy as np
from numba import njit, prange

# ---------------------------------------------------------------------------
# trilinear sampling


@njit(cache=True, inline="always")
def _grid_sample(vals, nx, ny, nz, ox, oy, oz, sx, sy, sz,
                 hx, hy, hz, px, py, pz):
    """Sample one point. Returns (vx, vy, vz, inside)."""
    if px < ox or px > hx or py < oy or py > hy or pz < oz or pz > hz:
        return 0.0, 0.0, 0.0, False
    ux = (px - ox) / sx
    uy = (py - oy) / sy
    uz = (pz - oz) / sz
    i = int(math.floor(ux))
    j = int(math.floor(uy))
    k = int(math.floor(uz))
    if i > nx - 2:
        i = nx - 2
    if i < 0:
        i = 0
    if j > ny - 2:
        j = ny - 2
    if j < 0:
        j = 0
    if k > nz - 2:
        k = nz - 2
    if k < 0:
        k = 0
    fx = ux - i
    fy = uy - j
    fz = uz - k
    if fx < 0.0:
        fx = 0.0
    if fx > 1.0:
        fx = 1.0
    if fy < 0.0:
        fy = 0.0
    if fy > 1.0:
        fy = 1.0
    if fz < 0.0:
        fz = 0.0
    if fz > 1.0:
        fz = 1.0
    base = i + nx * (j + ny * k)
    sxy = nx * ny
    out = np.empty(3, np.float64)
    for c in range(3):
        v000 = vals[base, c]
        v100 = vals[base + 1, c]
        v010 = vals[base + nx, c]
        v110 = vals[base + nx + 1, c]
        v001 = vals[base + sxy, c]
        v101 = vals[base + sxy + 1, c]
        v011 = vals[base + sxy + nx, c]
        v111 = vals[base + sxy + nx + 1, c]
        c00 = v000 * (1.0 - fx) + v100 * fx
        c10 = v010 * (1.0 - fx) + v110 * fx
        c01 = v001 * (1.0 - fx) + v101 * fx
        c11 = v011 * (1.0 - fx) + v111 * fx
        c0 = c00 * (1.0 - fy) + c10 * fy
        c1 = c01 * (1.0 - fy) + c11 * fy
        out[c] = c0 * (1.0 - fz) + c1 * fz
    return out[0], out[1], out[2], True


@njit(cache=True, parallel=True)
def grid_sample_many(vals, nx, ny, nz, ox, oy, oz, sx, sy, sz,
                     hx, hy, hz, pts, out, ok):
    for q in prange(pts.shape[0]):
        vx, vy, vz, inside = _grid_sample(
            vals, nx, ny, nz, ox, oy, oz, sx, sy, sz, hx, hy, hz,
            pts[q, 0], pts[q, 1], pts[q, 2])
        out[q, 0] = vx
        out[q, 1] = vy
        out[q, 2] = vz
        ok[q] = inside


# ---------------------------------------------------------------------------
# streamline tracing (classical RK4 on the normalized field, fixed arc step)


@njit(cache=True, inline="always")
def _unit_dir(vals, nx, ny, nz, ox, oy, oz, sx, sy, sz, hx, hy, hz,
              px, py, pz, eps_speed, sgn):
    vx, vy, vz, inside = _grid_sample(vals, nx, ny, nz, ox, oy, oz,
                                      sx, sy, sz, hx, hy, hz, px, py, pz)
    if not inside:
        return 0.0, 0.0, 0.0, 0.0, False
    sp = math.sqrt(vx * vx + vy * vy + vz * vz)
    if sp < eps_speed:
        return 0.0, 0.0, 0.0, sp, False
    return sgn * vx / sp, sgn * vy / sp, sgn * vz / sp, sp, True


@njit(cache=True, parallel=True)
def trace_many(vals, nx, ny, nz, ox, oy, oz, sx, sy, sz, hx, hy, hz,
               seeds, h, max_steps, eps_speed, out_pts, out_lo, out_n):
    """Bidirectional fixed-arc-length RK4 from each seed.

    out_pts is (n_seeds, 2*max_steps+1, 4) holding (x, y, z, speed); the
    seed sits at slot max_steps, backward steps fill downward, forward
    steps fill upward, so [lo, lo+n) is the ordered streamline. n == 0
    signals a dropped seed (outside bounds or below the speed floor).
    """
    m = max_steps
    for s in prange(seeds.shape[0]):
        x0 = seeds[s, 0]
        y0 = seeds[s, 1]
        z0 = seeds[s, 2]
        vx, vy, vz, inside = _grid_sample(vals, nx, ny, nz, ox, oy, oz,
                                          sx, sy, sz, hx, hy, hz, x0, y0, z0)
        sp0 = math.sqrt(vx * vx + vy * vy + vz * vz)
        if not inside or sp0 < eps_speed:
            out_lo[s] = m
            out_n[s] = 0
            continue
        out_pts[s, m, 0] = x0
        out_pts[s, m, 1] = y0
        out_pts[s, m, 2] = z0
        out_pts[s, m, 3] = sp0
        nback = 0
        nfwd = 0
        for direction in range(2):
            sgn = -1.0 if direction == 0 else 1.0
            px = x0
            py = y0
            pz = z0
            steps = 0
            while steps < max_steps:
                k1x, k1y, k1z, _, ok = _unit_dir(
                    vals, nx, ny, nz, ox, oy, oz, sx, sy, sz, hx, hy, hz,
                    px, py, pz, eps_speed, sgn)
                if not ok:
                    break
                k2x, k2y, k2z, _, ok = _unit_dir(
                    vals, nx, ny, nz, ox, oy, oz, sx, sy, sz, hx, hy, hz,
                    px + 0.5 * h * k1x, py + 0.5 * h * k1y,
                    pz + 0.5 * h * k1z, eps_speed, sgn)
                if not ok:
                    break
                k3x, k3y, k3z, _, ok = _unit_dir(
                    vals, nx, ny, nz, ox, oy, oz, sx, sy, sz, hx, hy, hz,
                    px + 0.5 * h * k2x, py + 0.5 * h * k2y,
                    pz + 0.5 * h * k2z, eps_speed, sgn)
                if not ok:
                    break
                k4x, k4y, k4z, _, ok = _unit_dir(
                    vals, nx, ny, nz, ox, oy, oz, sx, sy, sz, hx, hy, hz,
                    px + h * k3x, py + h * k3y, pz + h * k3z,
                    eps_speed, sgn)
                if not ok:
                    break
                dx = (k1x + 2.0 * k2x + 2.0 * k3x + k4x) / 6.0
                dy = (k1y + 2.0 * k2y + 2.0 * k3y + k4y) / 6.0
                dz = (k1z + 2.0 * k2z + 2.0 * k3z + k4z) / 6.0
                dn = math.sqrt(dx * dx + dy * dy + dz * dz)
                if dn == 0.0:
                    break
                # renormalize so each committed step is exactly arc length h
                qx = px + h * dx / dn
                qy = py + h * dy / dn
                qz = pz + h * dz / dn
                wx, wy, wz, inside = _grid_sample(
                    vals, nx, ny, nz, ox, oy, oz, sx, sy, sz, hx, hy, hz,
                    qx, qy, qz)
                if not inside:
                    break
                spq = math.sqrt(wx * wx + wy * wy + wz * wz)
                if spq < eps_speed:
                    break
                steps += 1
                if direction == 0:
                    nback += 1
                    slot = m - nback
                else:
                    nfwd += 1
                    slot = m + nfwd
                out_pts[s, slot, 0] = qx
                out_pts[s, slot, 1] = qy
                out_pts[s, slot, 2] = qz
                out_pts[s, slot, 3] = spq
                px = qx
                py = qy
                pz = qz
        out_lo[s] = m - nback
        out_n[s] = nback + 1 + nfwd


# ---------------------------------------------------------------------------
# KD-tree queries over segments


@njit(cache=True, inline="always")
def _boxdist2(qx, qy, qz, lo, hi, node):
    acc = 0.0
    d = lo[node, 0] - qx
    if d > 0.0:
        acc += d * d
    d = qx - hi[node, 0]
    if d > 0.0:
        acc += d * d
    d = lo[node, 1] - qy
    if d > 0.0:
        acc += d * d
    d = qy - hi[node, 1]
    if d > 0.0:
        acc += d * d
    d = lo[node, 2] - qz
    if d > 0.0:
        acc += d * d
    d = qz - hi[node, 2]
    if d > 0.0:
        acc += d * d
    return acc


@njit(cache=True, inline="always")
def _segment_distance(qx, qy, qz, ax, ay, az, bx, by, bz, metric):
    """Point-segment distance: 0 shortest, 1 longest, 2 average."""
    dax = qx - ax
    day = qy - ay
    daz = qz - az
    dbx = qx - bx
    dby = qy - by
    dbz = qz - bz
    da2 = dax * dax + day * day + daz * daz
    db2 = dbx * dbx + dby * dby + dbz * dbz
    dmax = math.sqrt(da2 if da2 > db2 else db2)
    if metric == 1:
        return dmax
    ux = bx - ax
    uy = by - ay
    uz = bz - az
    l2 = ux * ux + uy * uy + uz * uz
    if l2 > 0.0:
        t = (dax * ux + day * uy + daz * uz) / l2
    else:
        t = 0.0
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    cx = ax + t * ux - qx
    cy = ay + t * uy - qy
    cz = az + t * uz - qz
    dmin = math.sqrt(cx * cx + cy * cy + cz * cz)
    if metric == 0:
        return dmin
    return 0.5 * (dmin + dmax)


@njit(cache=True, parallel=True)
def knn_fill(qs, a, b, left, right, start, end, lo, hi, perm,
             metric, ks, indptr, out_d, out_g):
    """Per query, the ks[q] nearest segments by (distance, global id).

    Results land sorted ascending in out_d/out_g[indptr[q]:indptr[q]+m]
    where m = min(ks[q], n_segments); the point-to-box distance is a valid
    lower bound for all three metrics since d_min <= d_mean <= d_max.
    """
    nq = qs.shape[0]
    for qi in prange(nq):
        qx = qs[qi, 0]
        qy = qs[qi, 1]
        qz = qs[qi, 2]
        base = indptr[qi]
        k = int(ks[qi])
        if k <= 0:
            continue
        cnt = 0
        thr = np.inf
        nstack = np.empty(128, np.int32)
        dstack = np.empty(128, np.float64)
        nstack[0] = 0
        dstack[0] = 0.0
        sp = 1
        while sp > 0:
            sp -= 1
            if math.sqrt(dstack[sp]) > thr:
                continue
            node = nstack[sp]
            while left[node] != -1:
                l = left[node]
                r = right[node]
                dl = _boxdist2(qx, qy, qz, lo, hi, l)
                dr = _boxdist2(qx, qy, qz, lo, hi, r)
                if dl <= dr:
                    if math.sqrt(dr) <= thr:
                        nstack[sp] = r
                        dstack[sp] = dr
                        sp += 1
                    if math.sqrt(dl) > thr:
                        node = -1
                        break
                    node = l
                else:
                    if math.sqrt(dl) <= thr:
                        nstack[sp] = l
                        dstack[sp] = dl
                        sp += 1
                    if math.sqrt(dr) > thr:
                        node = -1
                        break
                    node = r
            if node == -1:
                continue
            for i in range(start[node], end[node]):
                d = _segment_distance(qx, qy, qz, a[i, 0], a[i, 1], a[i, 2],
                                      b[i, 0], b[i, 1], b[i, 2], metric)
                g = perm[i]
                if cnt == k:
                    wd = out_d[base + k - 1]
                    wg = out_g[base + k - 1]
                    if d > wd or (d == wd and g > wg):
                        continue
                    pos = k - 1
                else:
                    pos = cnt
                while pos > 0 and (out_d[base + pos - 1] > d or
                                   (out_d[base + pos - 1] == d and
                                    out_g[base + pos - 1] > g)):
                    out_d[base + pos] = out_d[base + pos - 1]
                    out_g[base + pos] = out_g[base + pos - 1]
                    pos -= 1
                out_d[base + pos] = d
                out_g[base + pos] = g
                if cnt < k:
                    cnt += 1
                if cnt == k:
                    thr = out_d[base + k - 1]


@njit(cache=True, parallel=True)
def rbn_count(qs, a, b, left, right, start, end, lo, hi, perm,
              metric, r, out_count, out_nd, out_ng):
    """Count segments with distance strictly below r; track the nearest.

    The nearest (distance, global id) pair is tracked over the whole index
    so the radius query's single-nearest fallback needs no second pass.
    """
    nq = qs.shape[0]
    for qi in prange(nq):
        qx = qs[qi, 0]
        qy = qs[qi, 1]
        qz = qs[qi, 2]
        cnt = 0
        bd = np.inf
        bg = np.int64(-1)
        nstack = np.empty(128, np.int32)
        dstack = np.empty(128, np.float64)
        nstack[0] = 0
        dstack[0] = 0.0
        sp = 1
        while sp > 0:
            sp -= 1
            bdist = math.sqrt(dstack[sp])
            if bdist >= r and bdist > bd:
                continue
            node = nstack[sp]
            while left[node] != -1:
                l = left[node]
                r_ = right[node]
                dl = _boxdist2(qx, qy, qz, lo, hi, l)
                dr = _boxdist2(qx, qy, qz, lo, hi, r_)
                if dl <= dr:
                    sl = math.sqrt(dr)
                    if sl < r or sl <= bd:
                        nstack[sp] = r_
                        dstack[sp] = dr
                        sp += 1
                    sl = math.sqrt(dl)
                    if sl >= r and sl > bd:
                        node = -1
                        break
                    node = l
                else:
                    sl = math.sqrt(dl)
                    if sl < r or sl <= bd:
                        nstack[sp] = l
                        dstack[sp] = dl
                        sp += 1
                    sl = math.sqrt(dr)
                    if sl >= r and sl > bd:
                        node = -1
                        break
                    node = r_
            if node == -1:
                continue
            for i in range(start[node], end[node]):
                d = _segment_distance(qx, qy, qz, a[i, 0], a[i, 1], a[i, 2],
                                      b[i, 0], b[i, 1], b[i, 2], metric)
                g = perm[i]
                if d < r:
                    cnt += 1
                if d < bd or (d == bd and g < bg):
                    bd = d
                    bg = g
        out_count[qi] = cnt
        out_nd[qi] = bd
        out_ng[qi] = bg


# ---------------------------------------------------------------------------
# icosahedral direction binning


@njit(cache=True, inline="always")
def _face_bit(table, ntheta, nphi, dx, dy, dz, rr):
    ct = dz / rr
    if ct > 1.0:
        ct = 1.0
    elif ct < -1.0:
        ct = -1.0
    theta = math.acos(ct)
    phi = math.atan2(dy, dx)
    if phi < 0.0:
        phi += 2.0 * math.pi
    it = int(theta * ntheta / math.pi)
    if it > ntheta - 1:
        it = ntheta - 1
    ip = int(phi * nphi / (2.0 * math.pi))
    if ip > nphi - 1:
        ip = nphi - 1
    return np.uint32(1) << np.uint32(table[it, ip])


@njit(cache=True, parallel=True)
def segment_bin_masks(qrow, qs, gids, a0, b0, table, ntheta, nphi,
                      n_samples, eps_len2, out_mask):
    """Per (query, neighbor segment) pair, the 20-bit flag mask of bins
    its direction samples fall in. Samples span the whole segment; callers
    guarantee every segment lies inside the uniformity sphere (the default
    radius rule), so no clipping happens here.
    """
    for e in prange(gids.shape[0]):
        q = qrow[e]
        qx = qs[q, 0]
        qy = qs[q, 1]
        qz = qs[q, 2]
        g = gids[e]
        ax = a0[g, 0]
        ay = a0[g, 1]
        az = a0[g, 2]
        ux = b0[g, 0] - ax
        uy = b0[g, 1] - ay
        uz = b0[g, 2] - az
        mask = np.uint32(0)
        for j in range(n_samples):
            t = j / (n_samples - 1.0)
            dx = ax + t * ux - qx
            dy = ay + t * uy - qy
            dz = az + t * uz - qz
            r2 = dx * dx + dy * dy + dz * dz
            if r2 < eps_len2:
                continue
            mask |= _face_bit(table, ntheta, nphi, dx, dy, dz, math.sqrt(r2))
        out_mask[e] = mask


@njit(cache=True, parallel=True)
def prefix_stats(indptr, d, mask, gids, vecs, eps,
                 cum_pop, cum_d, cum_iw, cum_ivec, cum_vec):
    """Row-wise running stats over sorted neighbor lists.

    For each CSR row and each prefix length m (1-based, value stored at
    offset m-1): bin-coverage popcount, distance sum, inverse-square-
    distance weight sum, weighted vector sum, plain vector sum. Distances
    are floored at eps for the weights only.
    """
    nq = indptr.shape[0] - 1
    for q in prange(nq):
        s = indptr[q]
        e = indptr[q + 1]
        acc_mask = np.uint32(0)
        acc_d = 0.0
        acc_iw = 0.0
        ax = 0.0
        ay = 0.0
        az = 0.0
        ux = 0.0
        uy = 0.0
        uz = 0.0
        for i in range(s, e):
            acc_mask |= mask[i]
            acc_d += d[i]
            dd = d[i] if d[i] > eps else eps
            w = 1.0 / (dd * dd)
            acc_iw += w
            g = gids[i]
            vx = vecs[g, 0]
            vy = vecs[g, 1]
            vz = vecs[g, 2]
            ax += w * vx
            ay += w * vy
            az += w * vz
            ux += vx
            uy += vy
            uz += vz
            pc = 0
            mm = acc_mask
            while mm != np.uint32(0):
                pc += 1
                mm &= mm - np.uint32(1)
            cum_pop[i] = pc
            cum_d[i] = acc_d
            cum_iw[i] = acc_iw
            cum_ivec[i, 0] = ax
            cum_ivec[i, 1] = ay
            cum_ivec[i, 2] = az
            cum_vec[i, 0] = ux
            cum_vec[i, 1] = uy
            cum_vec[i, 2] = uz


@njit(cache=True, parallel=True)
def saliency_prefix_stats(indptr, gids, qseg, starts, dirs, sl_ids, idx_on,
                          window, eps, cum_wt, cum_w, cum_sd, cum_n):
    """Row-wise running saliency sums over sorted neighbor lists.

    qseg[q] is the querying segment id for row q. Neighbors on the same
    streamline within `window` indices (the query segment included) are
    skipped when window >= 1; window == 0 keeps everything. Weights are
    inverse squared start-point distances, angles come from
    atan2(|cross|, dot) of the unit directions.
    """
    nq = indptr.shape[0] - 1
    for q in prange(nq):
        s = indptr[q]
        e = indptr[q + 1]
        qg = qseg[q]
        qsl = sl_ids[qg]
        qix = idx_on[qg]
        px = starts[qg, 0]
        py = starts[qg, 1]
        pz = starts[qg, 2]
        vx = dirs[qg, 0]
        vy = dirs[qg, 1]
        vz = dirs[qg, 2]
        acc_wt = 0.0
        acc_w = 0.0
        acc_sd = 0.0
        acc_n = 0
        for i in range(s, e):
            g = gids[i]
            if window >= 1 and sl_ids[g] == qsl:
                di = idx_on[g] - qix
                if -window <= di <= window:
                    cum_wt[i] = acc_wt
                    cum_w[i] = acc_w
                    cum_sd[i] = acc_sd
                    cum_n[i] = acc_n
                    continue
            dx = starts[g, 0] - px
            dy = starts[g, 1] - py
            dz = starts[g, 2] - pz
            sd = math.sqrt(dx * dx + dy * dy + dz * dz)
            sdg = sd if sd > eps else eps
            w = 1.0 / (sdg * sdg)
            wx = dirs[g, 0]
            wy = dirs[g, 1]
            wz = dirs[g, 2]
            cx = vy * wz - vz * wy
            cy = vz * wx - vx * wz
            cz = vx * wy - vy * wx
            cross = math.sqrt(cx * cx + cy * cy + cz * cz)
            dot = vx * wx + vy * wy + vz * wz
            ang = math.atan2(cross, dot)
            acc_wt += w * ang
            acc_w += w
            acc_sd += sd
            acc_n += 1
            cum_wt[i] = acc_wt
            cum_w[i] = acc_w
            cum_sd[i] = acc_sd
            cum_n[i] = acc_n


@njit(cache=True, parallel=True)
def circle_reference_angles(starts, dirs, radii, keep, n_circle,
                            vals, nx, ny, nz, ox, oy, oz, sx, sy, sz,
                            hx, hy, hz, eps_speed, out_ang, out_used):
    """Mean angle between each segment direction and the field on a
    perpendicular circle of per-segment radius. Out-of-bounds or
    sub-eps-speed samples are skipped; out_used reports retained counts.
    """
    two_pi = 2.0 * math.pi
    for i in prange(starts.shape[0]):
        out_ang[i] = np.nan
        out_used[i] = 0
        if not keep[i]:
            continue
        vx = dirs[i, 0]
        vy = dirs[i, 1]
        vz = dirs[i, 2]
        axx = abs(vx)
        axy = abs(vy)
        axz = abs(vz)
        # canonical axis least aligned with v, ties to x then y
        if axx <= axy and axx <= axz:
            cx, cy, cz = 1.0, 0.0, 0.0
        elif axy <= axz:
            cx, cy, cz = 0.0, 1.0, 0.0
        else:
            cx, cy, cz = 0.0, 0.0, 1.0
        e1x = vy * cz - vz * cy
        e1y = vz * cx - vx * cz
        e1z = vx * cy - vy * cx
        n1 = math.sqrt(e1x * e1x + e1y * e1y + e1z * e1z)
        e1x /= n1
        e1y /= n1
        e1z /= n1
        e2x = vy * e1z - vz * e1y
        e2y = vz * e1x - vx * e1z
        e2z = vx * e1y - vy * e1x
        rad = radii[i]
        acc = 0.0
        used = 0
        for j in range(n_circle):
            ang = two_pi * j / n_circle
            ca = math.cos(ang)
            sa = math.sin(ang)
            px = starts[i, 0] + rad * (ca * e1x + sa * e2x)
            py = starts[i, 1] + rad * (ca * e1y + sa * e2y)
            pz = starts[i, 2] + rad * (ca * e1z + sa * e2z)
            wx, wy, wz, inside = _grid_sample(vals, nx, ny, nz, ox, oy, oz,
                                              sx, sy, sz, hx, hy, hz,
                                              px, py, pz)
            if not inside:
                continue
            sp = math.sqrt(wx * wx + wy * wy + wz * wz)
            if sp < eps_speed:
                continue
            ccx = vy * wz - vz * wy
            ccy = vz * wx - vx * wz
            ccz = vx * wy - vy * wx
            cross = math.sqrt(ccx * ccx + ccy * ccy + ccz * ccz)
            dot = vx * wx + vy * wy + vz * wz
            acc += math.atan2(cross, dot)
            used += 1
        if used > 0:
            out_ang[i] = acc / used
        out_used[i] = used


def warm_up():
    """Compile every kernel on tiny inputs (results discarded)."""
    vals = np.zeros((8, 3))
    pts = np.zeros((1, 3))
    out = np.empty((1, 3))
    ok = np.empty(1, np.bool_)
    grid_sample_many(vals, 2, 2, 2, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0,
                     1.0, 1.0, 1.0, pts, out, ok)
    op = np.empty((1, 3, 4))
    lo = np.empty(1, np.int64)
    n = np.empty(1, np.int64)
    trace_many(vals, 2, 2, 2, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
               pts + 0.5, 0.1, 1, 1e-12, op, lo, n)
    a = np.array([[0.0, 0.0, 0.0]])
    b = np.array([[1.0, 0.0, 0.0]])
    left = np.array([-1], np.int32)
    right = np.array([-1], np.int32)
    start = np.array([0], np.int32)
    end = np.array([1], np.int32)
    blo = np.zeros((1, 3))
    bhi = np.ones((1, 3))
    perm = np.array([0], np.int64)
    ks = np.array([1], np.int64)
    indptr = np.array([0, 1], np.int64)
    od = np.empty(1)
    og = np.full(1, -1, np.int64)
    knn_fill(pts, a, b, left, right, start, end, blo, bhi, perm, 0,
             ks, indptr, od, og)
    oc = np.empty(1, np.int64)
    ond = np.empty(1)
    ong = np.empty(1, np.int64)
    rbn_count(pts, a, b, left, right, start, end, blo, bhi, perm, 0, 1.0,
              oc, ond, ong)
    table = np.zeros((4, 4), np.uint8)
    qrow = np.array([0], np.int64)
    om = np.empty(1, np.uint32)
    segment_bin_masks(qrow, pts, perm, a, b, table, 4, 4, 4, 1e-30, om)
    cp = np.empty(1, np.uint8)
    cd = np.empty(1)
    ciw = np.empty(1)
    civ = np.empty((1, 3))
    cv = np.empty((1, 3))
    prefix_stats(indptr, od, om, og, np.zeros((1, 3)), 1e-9,
                 cp, cd, ciw, civ, cv)
    cwt = np.empty(1)
    cw = np.empty(1)
    csd = np.empty(1)
    cn = np.empty(1, np.int64)
    saliency_prefix_stats(indptr, np.array([0], np.int64),
                          np.array([0], np.int64), a,
                          np.array([[1.0, 0.0, 0.0]]),
                          np.array([0], np.int64), np.array([0], np.int64),
                          1, 1e-9, cwt, cw, csd, cn)
    oa = np.empty(1)
    ou = np.empty(1, np.int64)
    circle_reference_angles(a, np.array([[1.0, 0.0, 0.0]]), np.array([0.1]),
                            np.array([True]), 4, vals, 2, 2, 2,
                            0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
                            1e-12, oa, ou)
