# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the hot simulation loops.

Mirror of ``jumplab._fallback``: same statements, same libm calls, same
uniform-consumption protocol, so both backends produce bit-identical
trajectories for identical seeds.  Keep the two files in sync.
"""

from libc.math cimport cos, exp, floor, log, pow, sin, sqrt

from scipy.special cimport cython_special

cdef double _TAU = 6.283185307179586


cdef inline double _phi_r2(double r2, int fam, double amp, double scale,
                           double cutoff) nogil:
    if r2 > cutoff * cutoff:
        return 0.0
    if fam == 0:
        return amp
    if fam == 1:
        return amp * exp(-r2 / (2.0 * scale * scale))
    return amp * exp(-sqrt(r2) / scale)


cdef inline double _min_image_r2(double* y, double[:, ::1] pos, Py_ssize_t j,
                                 int d, double L) nogil:
    cdef double r2 = 0.0
    cdef double dx
    cdef int k
    for k in range(d):
        dx = y[k] - pos[j, k]
        dx -= L * floor(dx / L + 0.5)
        r2 += dx * dx
    return r2


def phi_sum_candidates(double[:, ::1] pos, long long[::1] cand, double[::1] y,
                       double L, int fam, double amp, double scale,
                       double cutoff, long long skip):
    """Sum of phi(min_image(y - pos[j])) over sorted candidate indices."""
    cdef int d = pos.shape[1]
    cdef double total = 0.0
    cdef double yy[3]
    cdef Py_ssize_t m = cand.shape[0]
    cdef Py_ssize_t idx, j
    cdef int k
    for k in range(d):
        yy[k] = y[k]
    for idx in range(m):
        j = <Py_ssize_t> cand[idx]
        if j == <Py_ssize_t> skip:
            continue
        total += _phi_r2(_min_image_r2(yy, pos, j, d, L), fam, amp, scale, cutoff)
    return total


def pair_energy(double[:, ::1] pos, double L, int fam, double amp,
                double scale, double cutoff):
    """Sum of phi over unordered pairs, (i, j) in lexicographic order."""
    cdef Py_ssize_t n = pos.shape[0]
    cdef int d = pos.shape[1]
    cdef double total = 0.0
    cdef double yi[3]
    cdef Py_ssize_t i, j
    cdef int k
    for i in range(n):
        for k in range(d):
            yi[k] = pos[i, k]
        for j in range(i + 1, n):
            total += _phi_r2(_min_image_r2(yi, pos, j, d, L), fam, amp, scale, cutoff)
    return total


cdef inline double _radius_from_uniform(double u, int d, int fam, double cut,
                                        double scale, double pnorm):
    if fam == 0:
        if d == 1:
            return cut * u
        if d == 2:
            return cut * sqrt(u)
        return cut * pow(u, 1.0 / 3.0)
    if fam == 1:
        return scale * sqrt(2.0 * cython_special.gammaincinv(d / 2.0, u * pnorm))
    return scale * cython_special.gammaincinv(<double> d, u * pnorm)


cdef inline long long _cell_index(double* y, int d, long long ncx,
                                  double cell_len) nogil:
    cdef long long cid = 0
    cdef long long c
    cdef int k
    for k in range(d):
        c = <long long> (y[k] / cell_len)
        if c >= ncx:
            c = ncx - 1
        cid = cid * ncx + c
    return cid


cdef inline void _cell_insert(long long j, long long cid, long long[::1] head,
                              long long[::1] nxt, long long[::1] prv,
                              long long[::1] cell_of) nogil:
    nxt[j] = head[cid]
    prv[j] = -1
    if head[cid] >= 0:
        prv[head[cid]] = j
    head[cid] = j
    cell_of[j] = cid


cdef inline void _cell_remove(long long j, long long[::1] head,
                              long long[::1] nxt, long long[::1] prv,
                              long long[::1] cell_of) nogil:
    cdef long long p = prv[j]
    cdef long long nx = nxt[j]
    if p >= 0:
        nxt[p] = nx
    else:
        head[cell_of[j]] = nx
    if nx >= 0:
        prv[nx] = p


def cell_insert(long long j, long long cid, long long[::1] head,
                long long[::1] nxt, long long[::1] prv,
                long long[::1] cell_of):
    _cell_insert(j, cid, head, nxt, prv, cell_of)


def cell_remove(long long j, long long[::1] head, long long[::1] nxt,
                long long[::1] prv, long long[::1] cell_of):
    _cell_remove(j, head, nxt, prv, cell_of)


cdef Py_ssize_t _gather_candidates(double* y, int d, long long ncx,
                                   double cell_len, long long[::1] head,
                                   long long[::1] nxt,
                                   long long* cand) nogil:
    cdef long long cid[3]
    cdef long long c, c0, c1, c2, j
    cdef int k, ox, oy, oz
    cdef Py_ssize_t m = 0
    cdef Py_ssize_t a, b
    cdef long long key
    for k in range(d):
        c = <long long> (y[k] / cell_len)
        if c >= ncx:
            c = ncx - 1
        cid[k] = c
    if d == 1:
        for ox in range(-1, 2):
            c0 = (cid[0] + ox + ncx) % ncx
            j = head[c0]
            while j >= 0:
                cand[m] = j
                m += 1
                j = nxt[j]
    elif d == 2:
        for ox in range(-1, 2):
            c0 = (cid[0] + ox + ncx) % ncx
            for oy in range(-1, 2):
                c1 = (cid[1] + oy + ncx) % ncx
                j = head[c0 * ncx + c1]
                while j >= 0:
                    cand[m] = j
                    m += 1
                    j = nxt[j]
    else:
        for ox in range(-1, 2):
            c0 = (cid[0] + ox + ncx) % ncx
            for oy in range(-1, 2):
                c1 = (cid[1] + oy + ncx) % ncx
                for oz in range(-1, 2):
                    c2 = (cid[2] + oz + ncx) % ncx
                    j = head[(c0 * ncx + c1) * ncx + c2]
                    while j >= 0:
                        cand[m] = j
                        m += 1
                        j = nxt[j]
    # insertion sort: summation order must be canonical (ascending)
    for a in range(1, m):
        key = cand[a]
        b = a - 1
        while b >= 0 and cand[b] > key:
            cand[b + 1] = cand[b]
            b -= 1
        cand[b + 1] = key
    return m


def run_events(double[:, ::1] pos, double t, double t_until, double rate,
               double[:, ::1] uni, Py_ssize_t start_row,
               double L, int prop_fam, double prop_cut, double prop_scale,
               double prop_pnorm,
               int phi_fam, double phi_amp, double phi_scale, double phi_cut,
               bint exclude_self, bint use_cells, long long ncx,
               double cell_len, long long[::1] head, long long[::1] nxt,
               long long[::1] prv, long long[::1] cell_of,
               long long[::1] scratch):
    """Advance the continuum jump process until t_until or block end.

    Mutates ``pos`` and the cell arrays in place.  ``scratch`` is an
    int64 workspace of length >= len(pos).  Returns
    (t, rows_used, proposals, accepts, reached).
    """
    cdef Py_ssize_t n = pos.shape[0]
    cdef int d = pos.shape[1]
    cdef Py_ssize_t n_rows = uni.shape[0]
    cdef int n_cols = uni.shape[1]
    cdef long long proposals = 0
    cdef long long accepts = 0
    cdef Py_ssize_t used = 0
    cdef Py_ssize_t row = start_row
    cdef double y[3]
    cdef double dt, r, ang, z, s2, s, weight, u_acc
    cdef Py_ssize_t i, j, m, idx
    cdef long long skip, new_cid
    cdef int k
    while row < n_rows:
        dt = -log(1.0 - uni[row, 0]) / rate
        if t + dt > t_until:
            t = t_until
            used += 1
            return t, used, proposals, accepts, True
        t += dt
        proposals += 1
        i = <Py_ssize_t> (uni[row, 1] * n)
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
        skip = i if exclude_self else -1
        weight = 0.0
        if use_cells:
            m = _gather_candidates(y, d, ncx, cell_len, head, nxt, &scratch[0])
            for idx in range(m):
                j = <Py_ssize_t> scratch[idx]
                if j == <Py_ssize_t> skip:
                    continue
                weight += _phi_r2(_min_image_r2(y, pos, j, d, L),
                                  phi_fam, phi_amp, phi_scale, phi_cut)
        else:
            for j in range(n):
                if j == <Py_ssize_t> skip:
                    continue
                weight += _phi_r2(_min_image_r2(y, pos, j, d, L),
                                  phi_fam, phi_amp, phi_scale, phi_cut)
        u_acc = uni[row, n_cols - 1]
        if u_acc < exp(-weight):
            accepts += 1
            if use_cells:
                new_cid = _cell_index(y, d, ncx, cell_len)
                if new_cid != cell_of[i]:
                    _cell_remove(i, head, nxt, prv, cell_of)
                    _cell_insert(i, new_cid, head, nxt, prv, cell_of)
            for k in range(d):
                pos[i, k] = y[k]
        used += 1
        row += 1
    return t, used, proposals, accepts, False


def run_events_lattice(long long[::1] site_of, long long[::1] occ, double t,
                       double t_until, double rate, double[:, ::1] uni,
                       Py_ssize_t start_row, double[::1] cdf,
                       long long[:, ::1] tgt, double[:, ::1] phi_site,
                       bint exclude_self):
    """Advance the lattice jump process (exclusion on occupied sites)."""
    cdef Py_ssize_t n = site_of.shape[0]
    cdef Py_ssize_t n_off = cdf.shape[0]
    cdef Py_ssize_t n_rows = uni.shape[0]
    cdef long long proposals = 0
    cdef long long accepts = 0
    cdef Py_ssize_t used = 0
    cdef Py_ssize_t row = start_row
    cdef double dt, u, weight
    cdef Py_ssize_t i, j, lo, hi, mid
    cdef long long v
    while row < n_rows:
        dt = -log(1.0 - uni[row, 0]) / rate
        if t + dt > t_until:
            t = t_until
            used += 1
            return t, used, proposals, accepts, True
        t += dt
        proposals += 1
        i = <Py_ssize_t> (uni[row, 1] * n)
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
