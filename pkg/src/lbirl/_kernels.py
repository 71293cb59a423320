"""Jitted inner loops of the simulator.

Everything here is deterministic: all randomness is pre-drawn by the caller
from a seeded numpy Generator and passed in as (tick, ue)-indexed arrays, so
the consumed stream never depends on what happens inside a tick.

Falls back to plain Python when numba is unavailable (slow but identical).
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(f):
            return f

        return wrap


@njit(cache=True)
def _wrap_angle(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@njit(cache=True)
def _gain_db(offset, phi3, backlobe):
    off = abs(_wrap_angle(offset))
    g = 12.0 * (off / phi3) ** 2
    if g > backlobe:
        g = backlobe
    return -g


@njit(cache=True)
def _path_term_db(d2, s0, d0, eta, dmin):
    dd = d2
    if dd < dmin * dmin:
        dd = dmin * dmin
    return s0 - 5.0 * eta * math.log10(dd / (d0 * d0))


@njit(cache=True)
def _efficiency(s_db, noise, cap_raw, ref_raw):
    snr = 10.0 ** (s_db / 10.0) / noise
    raw = math.log1p(snr) / math.log(2.0)
    if raw > cap_raw:
        raw = cap_raw
    return raw / ref_raw


@njit(cache=True)
def _camp_idle(pos_x, pos_y, active, serving, only_idle,
               site_x, site_y, sector_site, sector_az, sector_cells, cell_carrier,
               s0, d0, eta, dmin, phi3, backlobe):
    """Re-camp UEs on the strongest-signal sector, keeping each UE's carrier."""
    n_sites = site_x.shape[0]
    spe = sector_az.shape[0] // n_sites  # sectors per site
    for u in range(pos_x.shape[0]):
        if only_idle and active[u]:
            continue
        best = -1.0e300
        best_sec = 0
        for p in range(n_sites):
            dx = pos_x[u] - site_x[p]
            dy = pos_y[u] - site_y[p]
            pl = _path_term_db(dx * dx + dy * dy, s0, d0, eta, dmin)
            phi = math.atan2(dy, dx)
            for k in range(spe):
                s = p * spe + k
                sdb = pl + _gain_db(phi - sector_az[s], phi3, backlobe)
                if sdb > best:
                    best = sdb
                    best_sec = s
        serving[u] = sector_cells[best_sec, cell_carrier[serving[u]]]


@njit(cache=True)
def _iulb_step(active, serving, prb_last, cell_sector, sector_cells,
               cumw, wsum, trigger, smask, draws, resel_count):
    """Idle-mode reselection: idle UEs on overloaded cells redraw their cell
    within the sector with probability proportional to the cell weights."""
    moved = 0
    n_c = cumw.shape[1]
    for u in range(active.shape[0]):
        if active[u]:
            continue
        c = serving[u]
        s = cell_sector[c]
        if not smask[s]:
            continue
        if prb_last[c] <= trigger:
            continue
        if wsum[s] <= 0.0:
            continue
        r = draws[u]
        pick = n_c - 1
        for k in range(n_c):
            if r < cumw[s, k]:
                pick = k
                break
        new = sector_cells[s, pick]
        if new != c:
            serving[u] = new
            resel_count[s] += 1
            moved += 1
    return moved


@njit(cache=True)
def _mlb_step(pos_x, pos_y, active, serving, win_bits, win_act_sec,
              cell_sector, cell_site, cell_az, site_x, site_y,
              same_site_cells, cap_bits,
              thr_bits, admit_bits, qual_db, qweight_bits, smask, ho_count,
              s0, d0, eta, dmin, phi3, backlobe, noise, cap_raw, ref_raw):
    """Throughput-triggered handover of active UEs toward same-site cells.

    Throughput here is the windowed per-UE rate (served bits per UE-active
    second). A source cell below its trigger hands its active UEs to the
    best admissible target until the projected per-UE rate of the remaining
    UEs clears the trigger or no (UE, target) pair qualifies.
    """
    n_cells = cap_bits.shape[0]
    n_ue = pos_x.shape[0]
    n_act = np.zeros(n_cells, np.int64)
    for u in range(n_ue):
        if active[u]:
            n_act[serving[u]] += 1
    # group active UEs by cell once: offsets[c]..offsets[c+1] slice into member
    offsets = np.empty(n_cells + 1, np.int64)
    offsets[0] = 0
    for c in range(n_cells):
        offsets[c + 1] = offsets[c] + n_act[c]
    fill = offsets[:-1].copy()
    member = np.empty(offsets[n_cells], np.int64)
    for u in range(n_ue):
        if active[u]:
            c = serving[u]
            member[fill[c]] = u
            fill[c] += 1
    total = 0
    for c in range(n_cells):
        sec = cell_sector[c]
        if not smask[sec]:
            continue
        m = offsets[c + 1] - offsets[c]  # group size at tick start
        if m == 0:
            continue
        x_c = win_bits[c] / win_act_sec[c] if win_act_sec[c] > 0.0 else 0.0
        if x_c >= thr_bits[c]:
            continue
        ues = member[offsets[c]:offsets[c + 1]]
        p = cell_site[c]
        pl = np.empty(m)
        phi = np.empty(m)
        s_src = np.empty(m)
        eff_src = np.empty(m)
        for i in range(m):
            dx = pos_x[ues[i]] - site_x[p]
            dy = pos_y[ues[i]] - site_y[p]
            pl[i] = _path_term_db(dx * dx + dy * dy, s0, d0, eta, dmin)
            phi[i] = math.atan2(dy, dx)
            s_src[i] = pl[i] + _gain_db(phi[i] - cell_az[c], phi3, backlobe)
            eff_src[i] = _efficiency(s_src[i], noise, cap_raw, ref_raw)
        moved = np.zeros(m, np.bool_)
        n_rem = m
        n_cand = same_site_cells.shape[1]
        while n_rem > 0:
            eff_sum = 0.0
            for i in range(m):
                if not moved[i]:
                    eff_sum += eff_src[i]
            # projected per-UE rate under an equal split of the remaining UEs
            if cap_bits[c] * eff_sum / (n_rem * n_rem) >= thr_bits[c]:
                break
            best = -1.0e300
            bi = -1
            bj = -1
            for i in range(m):
                if moved[i]:
                    continue
                for jj in range(n_cand):
                    j = same_site_cells[c, jj]
                    s_t = pl[i] + _gain_db(phi[i] - cell_az[j], phi3, backlobe)
                    delta = s_t - s_src[i]
                    if delta <= qual_db[c]:
                        continue
                    offered = cap_bits[j] / (n_act[j] + 1.0) * _efficiency(
                        s_t, noise, cap_raw, ref_raw)
                    if offered <= x_c + admit_bits[c]:
                        continue
                    score = offered + qweight_bits * delta
                    if score > best:
                        best = score
                        bi = i
                        bj = j
            if bi < 0:
                break
            serving[ues[bi]] = bj
            moved[bi] = True
            n_act[c] -= 1
            n_act[bj] += 1
            n_rem -= 1
            ho_count[sec] += 1
            total += 1
    return total


@njit(cache=True)
def run_ticks(n_ticks, dt, clock_io, tick0, recamp_period,
              # per-UE state
              pos_x, pos_y, vel_x, vel_y, active, serving, backlog, next_req,
              # per-cell window accumulators and last-tick load
              win_bits, win_prb, win_act_sec, win_idle_sec, prb_last,
              # per-sector counters
              resel_count, ho_count,
              # topology
              site_x, site_y, sector_site, sector_az, cell_sector, cell_site,
              cell_az, cell_carrier, sector_cells, same_site_cells, cap_bits,
              coverage_r,
              # radio constants
              s0, d0, eta, dmin, phi3, backlobe, noise, cap_raw, ref_raw,
              # traffic
              packet_mu, packet_sigma, ue_interval,
              hot_x, hot_y, hot_amp, hot_inv2w2, diurnal,
              # load-balancing parameters (dense)
              iulb_cumw, iulb_wsum, iulb_trigger, iulb_mask,
              mlb_thr, mlb_admit, mlb_qual, mlb_qweight, mlb_mask,
              # pre-drawn randomness, shape (n_ticks, n_ue)
              rnorm, rexp_u, rres):
    """Advance the network by n_ticks of length dt seconds.

    Per tick: move UEs (reflecting at the coverage boundary), refresh idle
    camping on a fixed cadence, spawn requests, serve active UEs with an
    equal capacity split scaled by per-UE efficiency, then run the idle
    reselection and handover mechanisms.
    """
    n_ue = pos_x.shape[0]
    n_cells = cap_bits.shape[0]
    n_cur = np.empty(n_cells, np.int64)
    prb_tick = np.empty(n_cells, np.float64)
    for t in range(n_ticks):
        clock1 = clock_io[0] + dt
        hour = np.int64(clock1 // 3600.0) % 24
        mult = diurnal[hour]

        # movement with specular reflection at the disc boundary; the bounce
        # happens at the true crossing point so the billiard flow keeps the
        # UE density uniform
        for u in range(n_ue):
            x0 = pos_x[u]
            y0 = pos_y[u]
            x = x0 + vel_x[u] * dt
            y = y0 + vel_y[u] * dt
            if x * x + y * y > coverage_r * coverage_r:
                remain = dt
                for _ in range(4):
                    dx = x - x0
                    dy = y - y0
                    a = dx * dx + dy * dy
                    b = 2.0 * (x0 * dx + y0 * dy)
                    c = x0 * x0 + y0 * y0 - coverage_r * coverage_r
                    disc = b * b - 4.0 * a * c
                    if a <= 0.0 or disc < 0.0:
                        break
                    s = (-b + math.sqrt(disc)) / (2.0 * a)
                    if s < 0.0:
                        s = 0.0
                    cx = x0 + s * dx
                    cy = y0 + s * dy
                    nx = cx / coverage_r
                    ny = cy / coverage_r
                    vdn = vel_x[u] * nx + vel_y[u] * ny
                    vel_x[u] -= 2.0 * vdn * nx
                    vel_y[u] -= 2.0 * vdn * ny
                    remain *= (1.0 - s)
                    x0 = cx
                    y0 = cy
                    x = x0 + vel_x[u] * remain
                    y = y0 + vel_y[u] * remain
                    if x * x + y * y <= coverage_r * coverage_r:
                        break
                r2 = x * x + y * y
                if r2 > coverage_r * coverage_r:
                    # numerical corner case: pull just inside along the ray
                    shrink = coverage_r * 0.999999 / math.sqrt(r2)
                    x *= shrink
                    y *= shrink
            pos_x[u] = x
            pos_y[u] = y

        if (tick0 + t) % recamp_period == 0:
            _camp_idle(pos_x, pos_y, active, serving, True,
                       site_x, site_y, sector_site, sector_az, sector_cells,
                       cell_carrier, s0, d0, eta, dmin, phi3, backlobe)

        # new requests activate on the camped cell; sizes scale with the hour
        # multiplier and the episode's spatial demand field
        for u in range(n_ue):
            if not active[u] and next_req[u] <= clock1:
                active[u] = True
                g = 1.0
                for k in range(hot_x.shape[0]):
                    ddx = pos_x[u] - hot_x[k]
                    ddy = pos_y[u] - hot_y[k]
                    g += hot_amp[k] * math.exp(-(ddx * ddx + ddy * ddy) * hot_inv2w2)
                size = math.exp(packet_mu + packet_sigma * rnorm[t, u]) * mult * g
                backlog[u] = size if size > 1.0 else 1.0

        # equal-split service: each active UE gets capacity/n scaled by its
        # efficiency; active seconds accrue only while a buffer is non-empty
        for c in range(n_cells):
            n_cur[c] = 0
            prb_tick[c] = 0.0
        for u in range(n_ue):
            if active[u]:
                n_cur[serving[u]] += 1
        for u in range(n_ue):
            c = serving[u]
            if not active[u]:
                win_idle_sec[c] += dt
                continue
            p = cell_site[c]
            dx = pos_x[u] - site_x[p]
            dy = pos_y[u] - site_y[p]
            sdb = _path_term_db(dx * dx + dy * dy, s0, d0, eta, dmin) + _gain_db(
                math.atan2(dy, dx) - cell_az[c], phi3, backlobe)
            eff = _efficiency(sdb, noise, cap_raw, ref_raw)
            rate = cap_bits[c] / n_cur[c] * eff  # bits/s
            served = rate * dt
            if served >= backlog[u]:
                served = backlog[u]
                t_used = served / rate
                backlog[u] = 0.0
                active[u] = False
                next_req[u] = clock1 - ue_interval[u] * math.log(1.0 - rexp_u[t, u])
            else:
                t_used = dt
                backlog[u] -= served
            win_bits[c] += served
            win_act_sec[c] += t_used
            win_idle_sec[c] += dt - t_used
            prb_tick[c] += t_used / n_cur[c]
        for c in range(n_cells):
            win_prb[c] += prb_tick[c]
            prb_last[c] = prb_tick[c] / dt

        _iulb_step(active, serving, prb_last, cell_sector, sector_cells,
                   iulb_cumw, iulb_wsum, iulb_trigger, iulb_mask,
                   rres[t], resel_count)
        _mlb_step(pos_x, pos_y, active, serving, win_bits, win_act_sec,
                  cell_sector, cell_site, cell_az, site_x, site_y,
                  same_site_cells, cap_bits,
                  mlb_thr, mlb_admit, mlb_qual, mlb_qweight, mlb_mask, ho_count,
                  s0, d0, eta, dmin, phi3, backlobe, noise, cap_raw, ref_raw)

        clock_io[0] = clock1
        clock_io[1] += dt
