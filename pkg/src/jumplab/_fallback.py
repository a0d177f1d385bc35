"""Pure-Python implementation of the hot simulation loops.

This module and the compiled extension ``jumplab._core`` implement the
same contract, statement for statement, using the same libm functions
(math.exp / math.log / math.floor ...), so a given seed produces
bit-identical trajectories on either backend.  Keep the two in sync:
any change here must be mirrored in ``_core.pyx``.

Uniform-consumption protocol: every proposed event consumes exactly one
row of the uniform block, including the final row whose waiting time
crosses ``t_until`` (the event is discarded; by memorylessness of the
exponential clock a fresh draw after the snapshot is exact).

Family codes: 0 = top-hat, 1 = truncated-gaussian,
2 = truncated-exponential.
"""

from math import cos, exp, floor, log, sin, sqrt

from scipy.special import gammaincinv

_TAU = 6.283185307179586


def _phi_r2(r2, fam, amp, scale, cutoff):
    """Potential value from squared radius; exactly zero beyond cutoff."""
    if r2 > cutoff * cutoff:
        return 0.0
    if fam == 0:
        return amp
    if fam == 1:
        return amp * exp(-r2 / (2.0 * scale * scale))
    return amp * exp(-sqrt(r2) / scale)


def _min_image_r2(y, pos, j, d, L):
    r2 = 0.0
    for k in range(d):
        dx = y[k] - pos[j, k]
        dx -= L * floor(dx / L + 0.5)
        r2 += dx * dx
    return r2


def phi_sum_candidates(pos, cand, y, L, fam, amp, scale, cutoff, skip):
    """Sum of phi(min_image(y - pos[j])) over candidate indices.

    ``cand`` must be sorted ascending so that summation order (and hence
    the floating-point result) is canonical; ``skip`` drops one index
    (-1 for none).
    """
    d = pos.shape[1]
    total = 0.0
    for j in cand:
        j = int(j)
        if j == skip:
            continue
        total += _phi_r2(_min_image_r2(y, pos, j, d, L), fam, amp, scale, cutoff)
    return total


def pair_energy(pos, L, fam, amp, scale, cutoff):
    """Sum of phi over unordered pairs, (i, j) in lexicographic order."""
    n, d = pos.shape
    total = 0.0
    for i in range(n):
        yi = [pos[i, k] for k in range(d)]
        for j in range(i + 1, n):
            total += _phi_r2(_min_image_r2(yi, pos, j, d, L), fam, amp, scale, cutoff)
    return total


def _radius_from_uniform(u, d, fam, cut, scale, pnorm):
    if fam == 0:
        if d == 1:
            return cut * u
        if d == 2:
            return cut * sqrt(u)
        return cut * u ** (1.0 / 3.0)
    if fam == 1:
        return scale * sqrt(2.0 * float(gammaincinv(d / 2.0, u * pnorm)))
    return scale * float(gammaincinv(float(d), u * pnorm))


def _cell_index(y, d, ncx, cell_len):
    cid = 0
    for k in range(d):
        c = int(y[k] / cell_len)
        if c >= ncx:
            c = ncx - 1
        cid = cid * ncx + c
    return cid


def cell_insert(j, cid, head, nxt, prv, cell_of):
    nxt[j] = head[cid]
    prv[j] = -1
    if head[cid] >= 0:
        prv[head[cid]] = j
    head[cid] = j
    cell_of[j] = cid


def cell_remove(j, head, nxt, prv, cell_of):
    p = prv[j]
    nx = nxt[j]
    if p >= 0:
        nxt[p] = nx
    else:
        head[cell_of[j]] = nx
    if nx >= 0:
        prv[nx] = p


def _gather_candidates(y, d, ncx, cell_len, head, nxt):
    cid = [0, 0, 0]
    for k in range(d):
        c = int(y[k] / cell_len)
        if c >= ncx:
            c = ncx - 1
        cid[k] = c
    cand = []
    if d == 1:
        for ox in (-1, 0, 1):
            cc = (cid[0] + ox + ncx) % ncx
            j = head[cc]
            while j >= 0:
                cand.append(j)
                j = nxt[j]
    elif d == 2:
        for ox in (-1, 0, 1):
            c0 = (cid[0] + ox + ncx) % ncx
            for oy in (-1, 0, 1):
                c1 = (cid[1] + oy + ncx) % ncx
                j = head[c0 * ncx + c1]
                while j >= 0:
                    cand.append(j)
                    j = nxt[j]
    else:
        for ox in (-1, 0, 1):
            c0 = (cid[0] + ox + ncx) % ncx
            for oy in (-1, 0, 1):
                c1 = (cid[1] + oy + ncx) % ncx
                for oz in (-1, 0, 1):
                    c2 = (cid[2] + oz + ncx) % ncx
                    j = head[(c0 * ncx + c1) * ncx + c2]
                    while j >= 0:
                        cand.append(j)
                        j = nxt[j]
    cand.sort()
    return cand


def run_events(pos, t, t_until, rate, uni, start_row,
               L, prop_fam, prop_cut, prop_scale, prop_pnorm,
               phi_fam, phi_amp, phi_scale, phi_cut,
               exclude_self, use_cells, ncx, cell_len,
               head, nxt, prv, cell_of, scratch=None):
    """Advance the continuum jump process until t_until or block end.

    Mutates ``pos`` and the cell arrays in place.  ``scratch`` is
    accepted for signature parity with the compiled core and ignored.
    Returns (t, rows_used, proposals, accepts, reached).
    """
    n, d = pos.shape
    n_rows = uni.shape[0]
    proposals = 0
    accepts = 0
    used = 0
    y = [0.0, 0.0, 0.0]
    row = start_row
    while row < n_rows:
        dt = -log(1.0 - uni[row, 0]) / rate
        if t + dt > t_until:
            t = t_until
            used += 1
            return t, used, proposals, accepts, True
        t += dt
        proposals += 1
        i = int(uni[row, 1] * n)
        r = _radius_from_uniform(uni[row, 2], d, prop_fam, prop_cut,
                                 prop_scale, prop_pnorm)
        if d == 1:
            y[0] = pos[i, 0] + (r if uni[row, 3] >= 0.5 else -r)
        elif d == 2:
            ang = _TAU * uni[row, 3]
            y[0] = pos[i, 0] + r * cos(ang)
            y[1] = pos[i, 1] + r * sin(ang)
        else:
            z = 2.0 * uni[row, 3] - 1.0
            ang = _TAU * uni[row, 4]
            s2 = 1.0 - z * z
            s = sqrt(s2) if s2 > 0.0 else 0.0
            y[0] = pos[i, 0] + r * s * cos(ang)
            y[1] = pos[i, 1] + r * s * sin(ang)
            y[2] = pos[i, 2] + r * z
        for k in range(d):
            y[k] -= L * floor(y[k] / L)
        if use_cells:
            cand = _gather_candidates(y, d, ncx, cell_len, head, nxt)
        else:
            cand = range(n)
        skip = i if exclude_self else -1
        weight = 0.0
        for j in cand:
            if j == skip:
                continue
            weight += _phi_r2(_min_image_r2(y, pos, j, d, L),
                              phi_fam, phi_amp, phi_scale, phi_cut)
        u_acc = uni[row, uni.shape[1] - 1]
        if u_acc < exp(-weight):
            accepts += 1
            if use_cells:
                new_cid = _cell_index(y, d, ncx, cell_len)
                if new_cid != cell_of[i]:
                    cell_remove(i, head, nxt, prv, cell_of)
                    cell_insert(i, new_cid, head, nxt, prv, cell_of)
            for k in range(d):
                pos[i, k] = y[k]
        used += 1
        row += 1
    return t, used, proposals, accepts, False


def run_events_lattice(site_of, occ, t, t_until, rate, uni, start_row,
                       cdf, tgt, phi_site, exclude_self):
    """Advance the lattice jump process (exclusion on occupied sites).

    ``cdf`` is the cumulative proposal law over separation offsets,
    ``tgt[s, k]`` the target site for source s under offset k, and
    ``phi_site[v, z]`` the potential between sites v and z.  Mutates
    ``site_of`` and ``occ``.  Returns (t, rows_used, proposals,
    accepts, reached).
    """
    n = site_of.shape[0]
    n_off = cdf.shape[0]
    n_rows = uni.shape[0]
    proposals = 0
    accepts = 0
    used = 0
    row = start_row
    while row < n_rows:
        dt = -log(1.0 - uni[row, 0]) / rate
        if t + dt > t_until:
            t = t_until
            used += 1
            return t, used, proposals, accepts, True
        t += dt
        proposals += 1
        i = int(uni[row, 1] * n)
        u = uni[row, 2]
        lo = 0
        hi = n_off - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if u < cdf[mid]:
                hi = mid
            else:
                lo = mid + 1
        v = tgt[site_of[i], lo]
        if occ[v] == 0:
            weight = 0.0
            for j in range(n):
                if exclude_self and j == i:
                    continue
                weight += phi_site[v, site_of[j]]
            if uni[row, 3] < exp(-weight):
                accepts += 1
                occ[site_of[i]] = 0
                occ[v] = 1
                site_of[i] = v
        used += 1
        row += 1
    return t, used, proposals, accepts, False
