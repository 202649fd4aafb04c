"""Numba hot loops for compositing and screen-space marching.

Semantics mirror the vectorized numpy paths exactly (same operation
order per pixel); tests assert equivalence. Everything is float64 and
fastmath stays off so results are deterministic and bit-stable across
thread counts: tiles and rays write disjoint outputs.
"""

import math

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional accelerator
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco if not (args and callable(args[0])) else args[0]

    prange = range


@njit(cache=True, parallel=True)
def composite_tiles(h, w, tile, tiles_x, tiles_y, splat_sorted, bounds,
                    means2d, conic, colors, opacities, depths, q_reject,
                    cutoff, alpha_max, min_alpha,
                    shade_mask, view_centers, cam_dirs, fx, fy, cx, cy,
                    light_view, albedo, wrap,
                    out_color, out_depth, out_trans):
    for t_idx in prange(tiles_x * tiles_y):
        ty = t_idx // tiles_x
        tx = t_idx % tiles_x
        x0 = tx * tile
        y0 = ty * tile
        x1 = min(x0 + tile, w)
        y1 = min(y0 + tile, h)
        s0 = bounds[t_idx]
        s1 = bounds[t_idx + 1]
        if s1 <= s0:
            continue
        for py in range(y0, y1):
            pcy = py + 0.5
            v_pix = (pcy - cy) / fy
            for px in range(x0, x1):
                pcx = px + 0.5
                u_pix = (pcx - cx) / fx
                pidx = py * w + px
                t_run = 1.0
                cr = 0.0
                cg = 0.0
                cb = 0.0
                dep = 0.0
                for si in range(s0, s1):
                    r = splat_sorted[si]
                    dx = pcx - means2d[r, 0]
                    dy = pcy - means2d[r, 1]
                    q = (conic[r, 0] * dx * dx + 2.0 * conic[r, 1] * dx * dy
                         + conic[r, 2] * dy * dy)
                    if q > q_reject[r]:
                        # guaranteed below the alpha skip: saves the exp
                        continue
                    a = opacities[r] * math.exp(-0.5 * q)
                    if a > alpha_max:
                        a = alpha_max
                    if a < min_alpha:
                        continue
                    test_t = t_run * (1.0 - a)
                    if test_t < cutoff:
                        break
                    weight = a * t_run
                    if shade_mask[r]:
                        # sphere normal from the Mahalanobis radius, wrap-lit
                        n2x = cam_dirs[r, 0]
                        n2y = cam_dirs[r, 1]
                        n2z = cam_dirs[r, 2]
                        vz = view_centers[r, 2]
                        d_par = math.sqrt(q) if q < 1.0 else 1.0
                        qx = u_pix * vz - view_centers[r, 0]
                        qy = v_pix * vz - view_centers[r, 1]
                        n1n2 = -n2z
                        nx, ny, nz = n2x, n2y, n2z
                        if abs(n1n2) > 1e-9:
                            s_ = (qx * n2x + qy * n2y) / n1n2
                            dn = math.sqrt(qx * qx + qy * qy + s_ * s_)
                            if dn > 1e-9:
                                delta = math.sqrt(max(1.0 - d_par * d_par, 0.0))
                                inv = d_par / dn
                                nx = qx * inv + delta * n2x
                                ny = qy * inv + delta * n2y
                                nz = s_ * inv + delta * n2z
                        ndl = nx * light_view[0] + ny * light_view[1] + nz * light_view[2]
                        lit = (ndl + wrap) / (1.0 + wrap)
                        if lit < 0.0:
                            lit = 0.0
                        cr += weight * albedo[0] * lit
                        cg += weight * albedo[1] * lit
                        cb += weight * albedo[2] * lit
                    else:
                        cr += weight * colors[r, 0]
                        cg += weight * colors[r, 1]
                        cb += weight * colors[r, 2]
                    dep += weight * depths[r]
                    t_run = test_t
                out_color[pidx, 0] = cr
                out_color[pidx, 1] = cg
                out_color[pidx, 2] = cb
                out_depth[pidx] = dep
                out_trans[pidx] = t_run


@njit(cache=True, parallel=True)
def flood_pass(scene_depth, frame_color, rot, cam_pos, trans, fx, fy, cx, cy, near,
               plane_origin, t1, t2, nrm, num,
               wave_dir, wave_k, wave_omega, wave_q, wave_phase, time, refine_iters,
               ior, absorption, shallow, deep, body_scale, path_cap, background,
               step_len, steps, bias, refine,
               out_color, out_z, water_mask, refl_w_out):
    """Whole flood pass per pixel: intersection, waves, Fresnel, inline
    screen-space reflection, refracted lookup with absorption.

    Mirrors the vectorized numpy path; out_color/out_z are written only
    where water_mask is set.
    """
    h, w = scene_depth.shape
    n_waves = wave_k.shape[0]
    r0 = ((1.0 - ior) / (1.0 + ior)) ** 2
    max_amp = 0.0
    for k in range(n_waves):
        max_amp += wave_q[k] / wave_k[k]
    eta = 1.0 / ior

    # pass 1: base-plane depth per pixel (needed at refraction sample pixels)
    z_base = np.empty(h * w, dtype=np.float64)
    for i in prange(h * w):
        u = ((i % w) + 0.5 - cx) / fx
        v = ((i // w) + 0.5 - cy) / fy
        dwx = rot[0, 0] * u + rot[1, 0] * v + rot[2, 0]
        dwy = rot[0, 1] * u + rot[1, 1] * v + rot[2, 1]
        dwz = rot[0, 2] * u + rot[1, 2] * v + rot[2, 2]
        denom = dwx * nrm[0] + dwy * nrm[1] + dwz * nrm[2]
        z_base[i] = num / denom

    for i in prange(h * w):
        zb = z_base[i]
        if not (math.isfinite(zb) and zb > 0.0):
            continue
        scene_z = np.float64(scene_depth[i // w, i % w])
        u = ((i % w) + 0.5 - cx) / fx
        v = ((i // w) + 0.5 - cy) / fy
        dwx = rot[0, 0] * u + rot[1, 0] * v + rot[2, 0]
        dwy = rot[0, 1] * u + rot[1, 1] * v + rot[2, 1]
        dwz = rot[0, 2] * u + rot[1, 2] * v + rot[2, 2]
        denom = dwx * nrm[0] + dwy * nrm[1] + dwz * nrm[2]
        slack = abs(max_amp / denom)
        if not (scene_z > zb - slack - 1e-12 and zb + slack > near):
            continue

        z = zb
        for _ in range(refine_iters * min(n_waves, 1)):
            px = cam_pos[0] + z * dwx - plane_origin[0]
            py = cam_pos[1] + z * dwy - plane_origin[1]
            pz = cam_pos[2] + z * dwz - plane_origin[2]
            uu = px * t1[0] + py * t1[1] + pz * t1[2]
            vv = px * t2[0] + py * t2[1] + pz * t2[2]
            height = 0.0
            for k in range(n_waves):
                theta = (wave_k[k] * (uu * wave_dir[k, 0] + vv * wave_dir[k, 1])
                         - wave_omega[k] * time + wave_phase[k])
                height += wave_q[k] / wave_k[k] * math.sin(theta)
            z = (num + height) / denom
        if not (scene_z > z and z > near):
            continue

        # surface normal of the trochoidal sum at the hit point
        px = cam_pos[0] + z * dwx - plane_origin[0]
        py = cam_pos[1] + z * dwy - plane_origin[1]
        pz = cam_pos[2] + z * dwz - plane_origin[2]
        uu = px * t1[0] + py * t1[1] + pz * t1[2]
        vv = px * t2[0] + py * t2[1] + pz * t2[2]
        du0 = 1.0
        du1 = 0.0
        du2 = 0.0
        dv0 = 0.0
        dv1 = 0.0
        dv2 = 1.0
        for k in range(n_waves):
            dkx = wave_dir[k, 0]
            dkz = wave_dir[k, 1]
            theta = (wave_k[k] * (uu * dkx + vv * dkz)
                     - wave_omega[k] * time + wave_phase[k])
            s = math.sin(theta)
            c = math.cos(theta)
            qf = wave_q[k]
            du0 -= qf * dkx * dkx * s
            du1 += qf * dkx * c
            du2 -= qf * dkx * dkz * s
            dv0 -= qf * dkz * dkx * s
            dv1 += qf * dkz * c
            dv2 -= qf * dkz * dkz * s
        lx = dv1 * du2 - dv2 * du1
        ly = dv2 * du0 - dv0 * du2
        lz = dv0 * du1 - dv1 * du0
        ln = math.sqrt(lx * lx + ly * ly + lz * lz)
        lx /= ln
        ly /= ln
        lz /= ln
        nwx = lx * t1[0] + ly * nrm[0] + lz * t2[0]
        nwy = lx * t1[1] + ly * nrm[1] + lz * t2[1]
        nwz = lx * t1[2] + ly * nrm[2] + lz * t2[2]

        dn = math.sqrt(dwx * dwx + dwy * dwy + dwz * dwz)
        vx = dwx / dn
        vy = dwy / dn
        vz = dwz / dn
        vdotn = vx * nwx + vy * nwy + vz * nwz
        cos_t = -vdotn
        if cos_t < 0.0:
            cos_t = 0.0
        if cos_t > 1.0:
            cos_t = 1.0
        rw = r0 + (1.0 - r0) * (1.0 - cos_t) ** 5

        # reflected ray in view space; origin on the water surface, nudged off
        rxw = vx - 2.0 * vdotn * nwx
        ryw = vy - 2.0 * vdotn * nwy
        rzw = vz - 2.0 * vdotn * nwz
        rvx = rot[0, 0] * rxw + rot[0, 1] * ryw + rot[0, 2] * rzw
        rvy = rot[1, 0] * rxw + rot[1, 1] * ryw + rot[1, 2] * rzw
        rvz = rot[2, 0] * rxw + rot[2, 1] * ryw + rot[2, 2] * rzw
        ox = u * z + rvx * 1e-3
        oy = v * z + rvy * 1e-3
        oz = z + rvz * 1e-3

        refl_r = background[0]
        refl_g = background[1]
        refl_b = background[2]
        sx_ = rvx * step_len
        sy_ = rvy * step_len
        sz_ = rvz * step_len
        lx_ = ox
        ly_ = oy
        lz_ = oz
        for _ in range(steps):
            qx = lx_ + sx_
            qy = ly_ + sy_
            qz = lz_ + sz_
            if qz <= near:
                break
            inv_z = 1.0 / qz
            ppx = fx * qx * inv_z + cx
            ppy = fy * qy * inv_z + cy
            if ppx < 0.0 or ppx >= w or ppy < 0.0 or ppy >= h:
                break
            buf = scene_depth[int(ppy), int(ppx)]
            if qz - buf > bias:
                hx = ppx
                hy = ppy
                lox, loy, loz = lx_, ly_, lz_
                hix, hiy, hiz = qx, qy, qz
                for _ in range(refine):
                    mx_ = 0.5 * (lox + hix)
                    my_ = 0.5 * (loy + hiy)
                    mz_ = 0.5 * (loz + hiz)
                    mz_c = mz_ if mz_ > 1e-9 else 1e-9
                    tpx = fx * mx_ / mz_c + cx
                    tpy = fy * my_ / mz_c + cy
                    if tpx < 0.0:
                        tpx = 0.0
                    if tpx > w - 1:
                        tpx = float(w - 1)
                    if tpy < 0.0:
                        tpy = 0.0
                    if tpy > h - 1:
                        tpy = float(h - 1)
                    mbuf = scene_depth[int(tpy), int(tpx)]
                    if mz_ - mbuf > bias:
                        hix, hiy, hiz = mx_, my_, mz_
                        hx = tpx
                        hy = tpy
                    else:
                        lox, loy, loz = mx_, my_, mz_
                refl_r = frame_color[int(hy), int(hx), 0]
                refl_g = frame_color[int(hy), int(hx), 1]
                refl_b = frame_color[int(hy), int(hx), 2]
                break
            lx_, ly_, lz_ = qx, qy, qz

        # refraction: Snell, then offset the screen sample along it
        cos_i = -(vx * nwx + vy * nwy + vz * nwz)
        sin2_t = eta * eta * (1.0 - cos_i * cos_i)
        cos_tt = math.sqrt(max(1.0 - sin2_t, 0.0))
        fac = eta * cos_i - cos_tt
        tx_ = eta * vx + fac * nwx
        ty_ = eta * vy + fac * nwy
        tz_ = eta * vz + fac * nwz

        depth_below = path_cap
        if math.isfinite(scene_z):
            depth_below = scene_z - z
            if depth_below < 0.0:
                depth_below = 0.0
        off = depth_below if depth_below < 1.0 else 1.0
        swx = cam_pos[0] + z * dwx + tx_ * off
        swy = cam_pos[1] + z * dwy + ty_ * off
        swz = cam_pos[2] + z * dwz + tz_ * off
        svx = rot[0, 0] * swx + rot[0, 1] * swy + rot[0, 2] * swz + trans[0]
        svy = rot[1, 0] * swx + rot[1, 1] * swy + rot[1, 2] * swz + trans[1]
        svz = rot[2, 0] * swx + rot[2, 1] * swy + rot[2, 2] * swz + trans[2]
        if svz < near:
            svz = near
        spx = fx * svx / svz + cx
        spy = fy * svy / svz + cy
        if spx < 0.0:
            spx = 0.0
        if spx > w - 1:
            spx = float(w - 1)
        if spy < 0.0:
            spy = 0.0
        if spy > h - 1:
            spy = float(h - 1)
        sxi = int(spx)
        syi = int(spy)
        sampled_z = scene_depth[syi, sxi]
        valid = (sampled_z > z_base[syi * w + sxi]) or (not math.isfinite(sampled_z))
        if valid:
            sc_r = frame_color[syi, sxi, 0]
            sc_g = frame_color[syi, sxi, 1]
            sc_b = frame_color[syi, sxi, 2]
            if math.isfinite(sampled_z):
                path = sampled_z - z
                if path < 0.0:
                    path = 0.0
            else:
                path = path_cap
        else:
            sc_r = frame_color[i // w, i % w, 0]
            sc_g = frame_color[i // w, i % w, 1]
            sc_b = frame_color[i // w, i % w, 2]
            path = depth_below if depth_below < path_cap else path_cap

        capped = path if path < path_cap else path_cap
        mix = capped / (capped + body_scale)
        ar = math.exp(-absorption[0] * path)
        ag = math.exp(-absorption[1] * path)
        ab = math.exp(-absorption[2] * path)
        refr_r = ar * sc_r + (1.0 - ar) * (shallow[0] + (deep[0] - shallow[0]) * mix)
        refr_g = ag * sc_g + (1.0 - ag) * (shallow[1] + (deep[1] - shallow[1]) * mix)
        refr_b = ab * sc_b + (1.0 - ab) * (shallow[2] + (deep[2] - shallow[2]) * mix)

        tw = 1.0 - rw
        out_color[i, 0] = rw * refl_r + tw * refr_r
        out_color[i, 1] = rw * refl_g + tw * refr_g
        out_color[i, 2] = rw * refl_b + tw * refr_b
        out_z[i] = z
        water_mask[i] = True
        refl_w_out[i] = rw


@njit(cache=True, parallel=True)
def ssr_march(origins, dirs, scene_depth, frame_color, fx, fy, cx, cy, near,
              step_len, steps, bias, refine, background, out_color, out_hit):
    h, w = scene_depth.shape
    n_rays = origins.shape[0]
    for i in prange(n_rays):
        lx = origins[i, 0]
        ly = origins[i, 1]
        lz = origins[i, 2]
        hit = False
        sx = dirs[i, 0] * step_len
        sy = dirs[i, 1] * step_len
        sz = dirs[i, 2] * step_len
        for _ in range(steps):
            qx = lx + sx
            qy = ly + sy
            qz = lz + sz
            if qz <= near:
                break
            inv_z = 1.0 / qz
            px = fx * qx * inv_z + cx
            py = fy * qy * inv_z + cy
            if px < 0.0 or px >= w or py < 0.0 or py >= h:
                break
            buf = scene_depth[int(py), int(px)]
            if qz - buf > bias:
                hx = px
                hy = py
                lo_x, lo_y, lo_z = lx, ly, lz
                hi_x, hi_y, hi_z = qx, qy, qz
                for _ in range(refine):
                    mx_ = 0.5 * (lo_x + hi_x)
                    my_ = 0.5 * (lo_y + hi_y)
                    mz_ = 0.5 * (lo_z + hi_z)
                    if mz_ < 1e-9:
                        mz_c = 1e-9
                    else:
                        mz_c = mz_
                    ppx = fx * mx_ / mz_c + cx
                    ppy = fy * my_ / mz_c + cy
                    if ppx < 0.0:
                        ppx = 0.0
                    if ppx > w - 1:
                        ppx = float(w - 1)
                    if ppy < 0.0:
                        ppy = 0.0
                    if ppy > h - 1:
                        ppy = float(h - 1)
                    mbuf = scene_depth[int(ppy), int(ppx)]
                    if mz_ - mbuf > bias:
                        hi_x, hi_y, hi_z = mx_, my_, mz_
                        hx = ppx
                        hy = ppy
                    else:
                        lo_x, lo_y, lo_z = mx_, my_, mz_
                out_color[i, 0] = frame_color[int(hy), int(hx), 0]
                out_color[i, 1] = frame_color[int(hy), int(hx), 1]
                out_color[i, 2] = frame_color[int(hy), int(hx), 2]
                out_hit[i] = True
                hit = True
                break
            lx, ly, lz = qx, qy, qz
        if not hit:
            out_color[i, 0] = background[0]
            out_color[i, 1] = background[1]
            out_color[i, 2] = background[2]
            out_hit[i] = False
