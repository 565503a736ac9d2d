# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-cell kernel.

A line-by-line port of the pure-Python cell pipeline (rotation systems,
clipping, walls, alignment, colouring, measures) on C++ containers.  Every
floating-point expression is evaluated in the same order as the Python code
and the module is built without floating-point contraction, so both
implementations return bitwise-identical results.
"""
import numpy as np

from libc.math cimport sqrt
from libcpp.vector cimport vector
from libcpp.algorithm cimport sort

from .global_cut import BatchResult, CutError, winding_number
from .graph_core import CorruptRotationSystem, RotationSystem

cdef int OPEN = -1
cdef int CAP = -1
cdef int NONE = -3

cdef int[6][4] BOX_FACES = [[0, 4, 6, 2], [1, 3, 7, 5], [0, 1, 5, 4], [2, 6, 7, 3], [0, 2, 3, 1], [4, 5, 7, 6]]
cdef int[6] BOX_ANCHOR = [0, 1, 0, 2, 0, 4]


cdef struct Plane:
    double n[3]
    double p[3]
    int ref


cdef struct RS:
    vector[int] ids  # ascending
    vector[vector[int]] nb
    vector[vector[int]] lb
    bint open_


cdef struct Face:
    vector[int] v
    int label


cdef struct WS:
    vector[double] pts  # 3 per vertex
    vector[vector[double]] cols
    vector[Plane] rows
    double eps_sn
    double eps_hs


cdef struct Leaf:
    RS P
    RS S


# --------------------------------------------------------------------------
# small helpers


cdef inline int rs_find(const RS& R, int v):
    cdef int lo = 0
    cdef int hi = <int>R.ids.size()
    cdef int mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if R.ids[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    if lo < <int>R.ids.size() and R.ids[lo] == v:
        return lo
    return -1


cdef inline int index_of(const vector[int]& a, int x):
    cdef int i
    for i in range(<int>a.size()):
        if a[i] == x:
            return i
    return -1


cdef int corrupt(str msg) except -1:
    raise CorruptRotationSystem(msg)


cdef inline double snap(double d, double eps):
    if -eps <= d and d <= eps:
        return 0.0
    return d


cdef double sdist(const Plane& pl, const double* x, double eps):
    cdef double d = pl.n[0] * (x[0] - pl.p[0]) + pl.n[1] * (x[1] - pl.p[1]) + pl.n[2] * (x[2] - pl.p[2])
    return snap(d, eps)


cdef int plane_from_points(const double* a, const double* b, const double* c, int ref, Plane* out) except -1:
    cdef double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2]
    cdef double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2]
    cdef double cx = uy * vz - uz * vy
    cdef double cy = uz * vx - ux * vz
    cdef double cz = ux * vy - uy * vx
    cdef double norm = sqrt(cx * cx + cy * cy + cz * cz)
    if norm == 0.0:
        raise ValueError("collinear points do not define a plane")
    out.n[0] = cx / norm
    out.n[1] = cy / norm
    out.n[2] = cz / norm
    out.p[0] = a[0]
    out.p[1] = a[1]
    out.p[2] = a[2]
    out.ref = ref
    return 0


cdef inline int add_point(WS& w, double x, double y, double z):
    w.pts.push_back(x)
    w.pts.push_back(y)
    w.pts.push_back(z)
    return <int>(w.pts.size() / 3) - 1


# --------------------------------------------------------------------------
# rotation systems


cdef int rs_faces(const RS& R, vector[Face]& out) except -1:
    out.clear()
    cdef int n = <int>R.ids.size()
    cdef int limit = 1
    cdef int vi, i, ai, ia, bi, j, b, label, step
    cdef bint closed, done
    cdef vector[vector[char]] seen
    seen.resize(n)
    for vi in range(n):
        limit += <int>R.nb[vi].size()
        seen[vi].resize(R.nb[vi].size(), 0)
    cdef Face f
    for vi in range(n):
        for i in range(<int>R.nb[vi].size()):
            if R.nb[vi][i] == OPEN or seen[vi][i]:
                continue
            label = R.lb[vi][i]
            f.v.clear()
            ai = vi
            ia = i
            closed = False
            done = False
            for step in range(limit):
                seen[ai][ia] = 1
                f.v.push_back(R.ids[ai])
                b = R.nb[ai][ia]
                if b == OPEN:
                    done = True
                    break
                bi = rs_find(R, b)
                if bi < 0:
                    corrupt(f"vertex {b} missing from the rotation system")
                j = index_of(R.nb[bi], R.ids[ai])
                if j < 0:
                    corrupt(f"vertex {R.ids[ai]} is not adjacent to {b}")
                j += 1
                if j == <int>R.nb[bi].size():
                    j = 0
                ai = bi
                ia = j
                if ai == vi and ia == i:
                    closed = True
                    done = True
                    break
            if not done:
                corrupt(f"face traversal from ({R.ids[vi]}, {i}) does not terminate")
            if not closed:
                continue
            if R.open_ and label == CAP:
                continue
            f.label = label
            out.push_back(f)
    return 0


cdef struct Entry:
    int v
    int p
    int n
    int label
    int seq


cdef bint entry_less(const Entry& a, const Entry& b):
    if a.v != b.v:
        return a.v < b.v
    return a.seq < b.seq


cdef int from_polygons(const vector[vector[int]]& polys, const vector[int]& labels, RS& out) except -1:
    out.ids.clear()
    out.nb.clear()
    out.lb.clear()
    out.open_ = False
    cdef vector[Entry] E
    cdef Entry e
    cdef int k, m, q, seq = 0
    for q in range(<int>polys.size()):
        m = <int>polys[q].size()
        for k in range(m):
            e.p = polys[q][k - 1 if k > 0 else m - 1]
            e.v = polys[q][k]
            e.n = polys[q][(k + 1) % m]
            e.label = labels[q]
            e.seq = seq
            seq += 1
            E.push_back(e)
    sort(E.begin(), E.end(), entry_less)
    cdef int s = 0, t, a, x, u, idx, lab
    cdef int total = <int>E.size()
    cdef vector[int] order, used_list, labs
    cdef bint found
    while s < total:
        t = s
        while t < total and E[t].v == E[s].v:
            t += 1
        # duplicate predecessor check, in insertion order
        for a in range(s, t):
            for k in range(s, a):
                if E[k].p == E[a].p:
                    corrupt(f"edge ({E[a].p}, {E[a].v}) is used twice in the same direction")
        order.clear()
        # chains starting at predecessors that are nobody's successor
        for a in range(s, t):
            found = False
            for k in range(s, t):
                if E[k].n == E[a].p:
                    found = True
                    break
            if found:
                continue
            x = E[a].p
            while x != NONE and index_of(order, x) < 0:
                order.push_back(x)
                idx = NONE
                for k in range(s, t):
                    if E[k].p == x:
                        idx = E[k].n
                        break
                x = idx
        for a in range(s, t):
            if index_of(order, E[a].p) >= 0:
                continue
            x = E[a].p
            while index_of(order, x) < 0:
                order.push_back(x)
                idx = NONE
                for k in range(s, t):
                    if E[k].p == x:
                        idx = E[k].n
                        break
                if idx == NONE:
                    raise KeyError(x)
                x = idx
        labs.clear()
        for u in order:
            lab = CAP
            for k in range(s, t):
                if E[k].n == u:
                    lab = E[k].label
            labs.push_back(lab)
        out.ids.push_back(E[s].v)
        out.nb.push_back(order)
        out.lb.push_back(labs)
        s = t
    return 0


cdef void pol(const RS& R, RS& out):
    out.ids = R.ids
    out.nb.clear()
    out.lb.clear()
    out.open_ = True
    cdef int vi, i, u, l
    cdef bint bou
    cdef vector[int] na, nl
    for vi in range(<int>R.ids.size()):
        bou = False
        for i in range(<int>R.nb[vi].size()):
            if R.nb[vi][i] != OPEN and R.lb[vi][i] == CAP:
                bou = True
                break
        if not bou:
            out.nb.push_back(R.nb[vi])
            out.lb.push_back(R.lb[vi])
            continue
        na.clear()
        nl.clear()
        for i in range(<int>R.nb[vi].size()):
            u = R.nb[vi][i]
            l = R.lb[vi][i]
            if u != OPEN and l == CAP:
                na.push_back(OPEN)
                nl.push_back(CAP)
            na.push_back(u)
            nl.push_back(l)
        out.nb.push_back(na)
        out.lb.push_back(nl)


# --------------------------------------------------------------------------
# clipping


cdef int clip(WS& w, const RS& P, int row, bint closed, int sign, int cap, RS& out) except -1:
    cdef int n = <int>P.ids.size()
    cdef bint neg = sign < 0
    cdef vector[char] inside
    inside.resize(n)
    cdef int nin = 0, vi, i
    cdef double d
    for vi in range(n):
        d = w.cols[P.ids[vi]][row]
        if neg:
            d = -d
        inside[vi] = (d <= 0.0) if closed else (d < 0.0)
        nin += inside[vi]
    if nin == n:
        out = P
        return 0
    out.ids.clear()
    out.nb.clear()
    out.lb.clear()
    out.open_ = P.open_
    if nin == 0:
        return 0
    for vi in range(n):
        if inside[vi]:
            out.ids.push_back(P.ids[vi])
            out.nb.push_back(P.nb[vi])
            out.lb.push_back(P.lb[vi])
    cdef int nkept = <int>out.ids.size()
    cdef int first_new = <int>(w.pts.size() / 3)
    cdef int a, b, pb, dnew, r, nrow
    cdef double ha, hb, ra, rb, wa, wb, u, ww
    cdef double xa0, xa1, xa2, xb0, xb1, xb2
    cdef vector[double] col
    cdef vector[int] nbn, lbn
    cdef int ai
    for ai in range(nkept):
        a = out.ids[ai]
        for i in range(<int>out.nb[ai].size()):
            b = out.nb[ai][i]
            if b == OPEN:
                continue
            pb = rs_find(P, b)
            if inside[pb]:
                continue
            ha = w.cols[a][row]
            hb = w.cols[b][row]
            if neg:
                ha = -ha
                hb = -hb
            wa = -hb / (ha - hb)
            wb = ha / (ha - hb)
            xa0 = w.pts[3 * a]
            xa1 = w.pts[3 * a + 1]
            xa2 = w.pts[3 * a + 2]
            xb0 = w.pts[3 * b]
            xb1 = w.pts[3 * b + 1]
            xb2 = w.pts[3 * b + 2]
            dnew = add_point(w, wa * xa0 + wb * xb0, wa * xa1 + wb * xb1, wa * xa2 + wb * xb2)
            ra = w.cols[a][row]
            rb = w.cols[b][row]
            nrow = <int>w.cols[a].size()
            col.resize(nrow)
            for r in range(nrow):
                u = w.cols[a][r]
                ww = w.cols[b][r]
                if (u == ra and ww == rb) or (u == -ra and ww == -rb):
                    col[r] = 0.0
                elif u == ww:
                    col[r] = u
                else:
                    col[r] = wa * u + wb * ww
            w.cols.push_back(col)
            out.nb[ai][i] = dnew
            nbn.clear()
            lbn.clear()
            nbn.push_back(a)
            nbn.push_back(OPEN)
            nbn.push_back(OPEN)
            lbn.push_back(P.lb[pb][index_of(P.nb[pb], a)])
            lbn.push_back(CAP)
            lbn.push_back(CAP)
            out.ids.push_back(dnew)
            out.nb.push_back(nbn)
            out.lb.push_back(lbn)

    cdef int ntot = <int>out.ids.size()
    cdef int limit = 1
    for vi in range(ntot):
        limit += <int>out.nb[vi].size()
    cdef vector[char] assigned
    assigned.resize(ntot - nkept, 0)
    cdef int prev, cur, ci, j, step, nxt
    cdef bint reached
    for ai in range(nkept, ntot):
        a = out.ids[ai]
        prev = a
        cur = out.nb[ai][0]
        reached = False
        for step in range(limit):
            ci = rs_find(out, cur)
            if ci < 0:
                corrupt(f"vertex {cur} missing during the cut walk")
            j = index_of(out.nb[ci], prev)
            if j < 0:
                corrupt(f"vertex {prev} is not adjacent to {cur}")
            j += 1
            nxt = out.nb[ci][j if j < <int>out.nb[ci].size() else 0]
            prev = cur
            cur = nxt
            if cur == OPEN or cur >= first_new:
                reached = True
                break
        if not reached:
            corrupt("cut walk does not reach a new vertex")
        if cur == OPEN:
            continue
        out.nb[ai][2] = cur
        out.lb[ai][2] = cap
        ci = rs_find(out, cur)
        if assigned[ci - nkept]:
            corrupt(f"new vertex {cur} reached twice")
        assigned[ci - nkept] = 1
        out.nb[ci][1] = a
        out.lb[ci][1] = out.lb[ai][0]
    return 0


cdef int clip_rows(WS& w, const RS& P, const vector[int]& rows, const vector[int]& signs,
                   const vector[int]& caps, RS& out) except -1:
    """Open clips by each (row, sign) in turn."""
    cdef RS cur = P
    cdef RS nxt
    cdef int k
    for k in range(<int>rows.size()):
        if cur.ids.size() == 0:
            break
        clip(w, cur, rows[k], False, signs[k], caps[k], nxt)
        cur = nxt
    out = cur
    return 0


# --------------------------------------------------------------------------
# distances and alignment


cdef int add_planes(WS& w, const vector[Plane]& planes) except -1:
    cdef int v, q
    for q in range(<int>planes.size()):
        w.rows.push_back(planes[q])
    for v in range(<int>w.cols.size()):
        for q in range(<int>planes.size()):
            w.cols[v].push_back(sdist(planes[q], &w.pts[3 * v], w.eps_sn))
    return 0


cdef int alignment_sign_rows(WS& w, int ri, int rj, const vector[int]& vids):
    cdef double best = -1.0, a, b, m
    cdef int sign = 1, k
    for k in range(<int>vids.size()):
        a = w.cols[vids[k]][ri]
        b = w.cols[vids[k]][rj]
        if a == 0.0 or b == 0.0:
            continue
        m = abs(a) if abs(a) >= abs(b) else abs(b)
        if m > best:
            best = m
            sign = 1 if (a > 0.0) == (b > 0.0) else -1
    return sign


cdef bint quasi_aligned_rows(WS& w, int ri, int rj, const vector[int]& vids, double eps):
    cdef double dmax = 0.0, smax = 0.0, a, b, d, s
    cdef int k
    for k in range(<int>vids.size()):
        a = w.cols[vids[k]][ri]
        b = w.cols[vids[k]][rj]
        d = abs(a - b)
        if d > dmax:
            dmax = d
        s = abs(a + b)
        if s > smax:
            smax = s
    return (dmax if dmax < smax else smax) <= eps


cdef void copy_row(WS& w, int src, int dst, int sign, const vector[int]& vids):
    cdef int k
    if sign > 0:
        for k in range(<int>vids.size()):
            w.cols[vids[k]][dst] = w.cols[vids[k]][src]
    else:
        for k in range(<int>vids.size()):
            w.cols[vids[k]][dst] = -w.cols[vids[k]][src]


cdef void merge_rows(WS& w, const vector[int]& rows, const vector[int]& vids, vector[int]& signs):
    cdef int first = rows[0], k, q, v
    cdef double d
    cdef bint zero
    signs.clear()
    signs.push_back(1)
    for q in range(1, <int>rows.size()):
        signs.push_back(alignment_sign_rows(w, first, rows[q], vids))
    for k in range(<int>vids.size()):
        v = vids[k]
        zero = False
        for q in range(<int>rows.size()):
            if w.cols[v][rows[q]] == 0.0:
                zero = True
                break
        if zero:
            for q in range(<int>rows.size()):
                w.cols[v][rows[q]] = 0.0
        else:
            d = w.cols[v][first]
            for q in range(<int>rows.size()):
                w.cols[v][rows[q]] = d if signs[q] > 0 else -d


cdef int find_root(vector[int]& parent, int x):
    while parent[x] != x:
        x = parent[x]
    return x


cdef void align_planes(WS& w, const vector[int]& rows, const vector[int]& vids,
                       vector[int]& canon_rep, vector[int]& canon_sign):
    """Quasi-alignment is tested on a snapshot of the rows, as in the Python code."""
    cdef int nr = <int>rows.size(), a, b, x, y, k, q
    cdef int nrows = <int>w.rows.size()
    # snapshot: vals[a][k]
    cdef vector[vector[double]] vals
    vals.resize(nr)
    for a in range(nr):
        vals[a].resize(vids.size())
        for k in range(<int>vids.size()):
            vals[a][k] = w.cols[vids[k]][rows[a]]
    cdef vector[int] parent
    parent.resize(nrows, -1)
    for a in range(nr):
        parent[rows[a]] = rows[a]
    cdef double dmax, smax, u, v, d, s
    for a in range(nr):
        for b in range(a + 1, nr):
            dmax = 0.0
            smax = 0.0
            for k in range(<int>vids.size()):
                u = vals[a][k]
                v = vals[b][k]
                d = abs(u - v)
                if d > dmax:
                    dmax = d
                s = abs(u + v)
                if s > smax:
                    smax = s
            if (dmax if dmax < smax else smax) <= w.eps_hs:
                x = find_root(parent, rows[a])
                y = find_root(parent, rows[b])
                if x != y:
                    if x < y:
                        parent[y] = x
                    else:
                        parent[x] = y
    canon_rep.assign(nrows, -1)
    canon_sign.assign(nrows, 1)
    # groups by root, visited in ascending root order; members ascending
    cdef vector[int] roots, members, signs
    for a in range(nr):
        x = find_root(parent, rows[a])
        if index_of(roots, x) < 0:
            roots.push_back(x)
    sort(roots.begin(), roots.end())
    for q in range(<int>roots.size()):
        members.clear()
        for a in range(nr):
            if find_root(parent, rows[a]) == roots[q]:
                members.push_back(rows[a])
        sort(members.begin(), members.end())
        if members.size() == 1:
            canon_rep[roots[q]] = roots[q]
            canon_sign[roots[q]] = 1
            continue
        merge_rows(w, members, vids, signs)
        for k in range(<int>members.size()):
            canon_rep[members[k]] = members[0]
            canon_sign[members[k]] = signs[k]


# --------------------------------------------------------------------------
# walls, colouring, decomposition


cdef int walls(WS& w, const RS& S, vector[Plane]& out) except -1:
    out.clear()
    cdef vector[Face] fs
    rs_faces(S, fs)
    cdef int nrows = <int>w.rows.size()
    cdef vector[int] fidx
    fidx.assign(nrows, -1)
    cdef int q
    for q in range(<int>fs.size()):
        fidx[fs[q].label] = q
    cdef int ui, i, u, v, t, ww, vi, k, x
    cdef bint reflex
    cdef double ex, ey, ez, ee, nx, ny, nz, kk, norm
    cdef const double* xu
    cdef const double* xv
    cdef Plane pl
    for ui in range(<int>S.ids.size()):
        u = S.ids[ui]
        for i in range(<int>S.nb[ui].size()):
            v = S.nb[ui][i]
            if v == OPEN or v < u:
                continue
            t = S.lb[ui][i]
            vi = rs_find(S, v)
            ww = S.lb[vi][index_of(S.nb[vi], u)]
            if t == CAP or ww == CAP or t == ww:
                continue
            if fidx[t] < 0 or fidx[ww] < 0:
                raise KeyError(t if fidx[t] < 0 else ww)
            reflex = False
            for k in range(<int>fs[fidx[ww]].v.size()):
                x = fs[fidx[ww]].v[k]
                if w.cols[x][t] > 0.0:
                    reflex = True
                    break
            if not reflex:
                for k in range(<int>fs[fidx[t]].v.size()):
                    x = fs[fidx[t]].v[k]
                    if w.cols[x][ww] > 0.0:
                        reflex = True
                        break
            if not reflex:
                continue
            # bisector of the two faces through the edge
            xu = &w.pts[3 * u]
            xv = &w.pts[3 * v]
            ex = xv[0] - xu[0]
            ey = xv[1] - xu[1]
            ez = xv[2] - xu[2]
            ee = ex * ex + ey * ey + ez * ez
            nx = w.rows[t].n[0] - w.rows[ww].n[0]
            ny = w.rows[t].n[1] - w.rows[ww].n[1]
            nz = w.rows[t].n[2] - w.rows[ww].n[2]
            if sqrt(nx * nx + ny * ny + nz * nz) < 1e-6:
                nx = ey * w.rows[t].n[2] - ez * w.rows[t].n[1]
                ny = ez * w.rows[t].n[0] - ex * w.rows[t].n[2]
                nz = ex * w.rows[t].n[1] - ey * w.rows[t].n[0]
            kk = (nx * ex + ny * ey + nz * ez) / ee
            nx, ny, nz = nx - kk * ex, ny - kk * ey, nz - kk * ez
            norm = sqrt(nx * nx + ny * ny + nz * nz)
            pl.n[0] = nx / norm
            pl.n[1] = ny / norm
            pl.n[2] = nz / norm
            pl.p[0] = (xu[0] + xv[0]) * 0.5
            pl.p[1] = (xu[1] + xv[1]) * 0.5
            pl.p[2] = (xu[2] + xv[2]) * 0.5
            pl.ref = <int>out.size()
            out.push_back(pl)
    return 0


cdef void drop_flat(WS& w, RS& S, int row) except *:
    cdef vector[Face] fs
    rs_faces(S, fs)
    cdef int q, k, n, a, b, ai
    cdef bint flat
    for q in range(<int>fs.size()):
        flat = True
        for k in range(<int>fs[q].v.size()):
            if w.cols[fs[q].v[k]][row] != 0.0:
                flat = False
                break
        if not flat:
            continue
        n = <int>fs[q].v.size()
        for k in range(n):
            a = fs[q].v[k]
            b = fs[q].v[k + 1 if k + 1 < n else 0]
            ai = rs_find(S, a)
            S.lb[ai][index_of(S.nb[ai], b)] = CAP


cdef int decompose(WS& w, const RS& P, const RS& S, const vector[int]& wrows, int k,
                   vector[Leaf]& out) except -1:
    if P.ids.size() == 0:
        return 0
    cdef Leaf leaf
    if k == <int>wrows.size():
        leaf.P = P
        leaf.S = S
        out.push_back(leaf)
        return 0
    cdef int wr = wrows[k], vi
    cdef bint has_neg = False, has_pos = False
    cdef double d
    for vi in range(<int>P.ids.size()):
        d = w.cols[P.ids[vi]][wr]
        if d < 0.0:
            has_neg = True
        elif d > 0.0:
            has_pos = True
    cdef RS P1, S1
    if has_neg:
        if has_pos:
            clip(w, P, wr, True, 1, wr, P1)
        else:
            P1 = P
        if S.ids.size():
            clip(w, S, wr, True, 1, CAP, S1)
            drop_flat(w, S1, wr)
        else:
            S1 = S
        decompose(w, P1, S1, wrows, k + 1, out)
    if has_pos:
        if has_neg:
            clip(w, P, wr, True, -1, wr, P1)
        else:
            P1 = P
        if S.ids.size():
            clip(w, S, wr, True, -1, CAP, S1)
            drop_flat(w, S1, wr)
        else:
            S1 = S
        decompose(w, P1, S1, wrows, k + 1, out)
    return 0


cdef int colour(WS& w, const RS& S, vector[vector[Face]]& classes) except -1:
    """Classes of surface faces (concatenated per class, component by component)."""
    classes.clear()
    cdef vector[Face] fs
    rs_faces(S, fs)
    if fs.size() == 0:
        return 0
    cdef int npts = <int>(w.pts.size() / 3)
    cdef vector[int] parent
    parent.assign(npts, -1)
    cdef int q, k, v, r, r0, x
    for q in range(<int>fs.size()):
        for k in range(<int>fs[q].v.size()):
            v = fs[q].v[k]
            if parent[v] < 0:
                parent[v] = v
        r0 = find_root(parent, fs[q].v[0])
        for k in range(1, <int>fs[q].v.size()):
            r = find_root(parent, fs[q].v[k])
            if r != r0:
                if r < r0:
                    parent[r0] = r
                    r0 = r
                else:
                    parent[r] = r0
    # components ordered by root
    cdef vector[int] roots
    for q in range(<int>fs.size()):
        x = find_root(parent, fs[q].v[0])
        if index_of(roots, x) < 0:
            roots.push_back(x)
    sort(roots.begin(), roots.end())
    cdef int nc = <int>roots.size()
    cdef vector[vector[Face]] comps
    cdef vector[vector[int]] cverts, crows
    comps.resize(nc)
    cverts.resize(nc)
    crows.resize(nc)
    cdef vector[char] seen
    seen.assign(npts, 0)
    cdef int c
    for q in range(<int>fs.size()):
        c = index_of(roots, find_root(parent, fs[q].v[0]))
        comps[c].push_back(fs[q])
        for k in range(<int>fs[q].v.size()):
            v = fs[q].v[k]
            if not seen[v]:
                seen[v] = 1
                cverts[c].push_back(v)
        if index_of(crows[c], fs[q].label) < 0:
            crows[c].push_back(fs[q].label)
    cdef vector[vector[char]] inside, mutual
    inside.resize(nc)
    mutual.resize(nc)
    cdef int i, j
    cdef bint ok
    for i in range(nc):
        inside[i].assign(nc, 0)
        mutual[i].assign(nc, 0)
    for i in range(nc):
        for j in range(nc):
            if i == j:
                continue
            ok = True
            for k in range(<int>cverts[i].size()):
                for q in range(<int>crows[j].size()):
                    if w.cols[cverts[i][k]][crows[j][q]] > 0.0:
                        ok = False
                        break
                if not ok:
                    break
            inside[i][j] = ok
    for i in range(nc):
        for j in range(nc):
            mutual[i][j] = inside[i][j] and inside[j][i]
    cdef vector[int] V, C, nf, dg
    cdef vector[char] blocked, taken
    for i in range(nc):
        V.push_back(i)
    cdef vector[Face] cls
    while V.size():
        v = V[0]
        nf.clear()
        dg.clear()
        for k in range(<int>V.size()):
            if V[k] == v or mutual[v][V[k]]:
                nf.push_back(V[k])
            if V[k] != v and not inside[v][V[k]]:
                dg.push_back(V[k])
        blocked.assign(nc, 0)
        for q in range(<int>dg.size()):
            for k in range(<int>V.size()):
                if mutual[dg[q]][V[k]]:
                    blocked[V[k]] = 1
        C.clear()
        for k in range(<int>nf.size()):
            if not blocked[nf[k]]:
                C.push_back(nf[k])
        if C.size() == 0:
            from .convexify import ColouringError
            raise ColouringError("colouring makes no progress")
        cls.clear()
        taken.assign(nc, 0)
        for k in range(<int>C.size()):
            taken[C[k]] = 1
            for q in range(<int>comps[C[k]].size()):
                cls.push_back(comps[C[k]][q])
        classes.push_back(cls)
        nf.clear()
        for k in range(<int>V.size()):
            if not taken[V[k]]:
                nf.push_back(V[k])
        V = nf
    return 0


# --------------------------------------------------------------------------
# measures


cdef inline double tet_det(const double* a, const double* b, const double* c, const double* d):
    cdef double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2]
    cdef double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2]
    cdef double wx = d[0] - a[0], wy = d[1] - a[1], wz = d[2] - a[2]
    return ux * (vy * wz - vz * wy) + uy * (vz * wx - vx * wz) + uz * (vx * wy - vy * wx)


cdef double poly_volume(WS& w, const RS& P) except? -1.0:
    cdef int anchor = P.ids[0]
    cdef vector[Face] fs
    rs_faces(P, fs)
    cdef double total = 0.0
    cdef int q, k, n, mk, i
    cdef vector[int] vs
    for q in range(<int>fs.size()):
        if index_of(fs[q].v, anchor) >= 0:
            continue
        n = <int>fs[q].v.size()
        mk = 0
        for k in range(1, n):
            if fs[q].v[k] < fs[q].v[mk]:
                mk = k
        vs.clear()
        for k in range(n):
            vs.push_back(fs[q].v[(mk + k) % n])
        for i in range(1, n - 1):
            total += tet_det(&w.pts[3 * anchor], &w.pts[3 * vs[0]], &w.pts[3 * vs[i]], &w.pts[3 * vs[i + 1]])
    return total / 6.0


cdef double polygon_area(WS& w, const vector[int]& vs):
    cdef const double* p0 = &w.pts[3 * vs[0]]
    cdef const double* p
    cdef const double* q
    cdef double sx = 0.0, sy = 0.0, sz = 0.0, ux, uy, uz, vx, vy, vz, x, y, z
    cdef int i
    for i in range(1, <int>vs.size() - 1):
        p = &w.pts[3 * vs[i]]
        q = &w.pts[3 * vs[i + 1]]
        ux = p[0] - p0[0]
        uy = p[1] - p0[1]
        uz = p[2] - p0[2]
        vx = q[0] - p0[0]
        vy = q[1] - p0[1]
        vz = q[2] - p0[2]
        sx += uy * vz - uz * vy
        sy += uz * vx - ux * vz
        sz += ux * vy - uy * vx
    x = 0.5 * sx
    y = 0.5 * sy
    z = 0.5 * sz
    return sqrt(x * x + y * y + z * z)


cdef int segment_crossings(WS& w, const vector[vector[int]]& tris, int skip, const double* x,
                           const double* y):
    """Triangles crossed by the segment (x, y); -1 when a test is degenerate."""
    cdef int count = 0, q
    cdef const double* pa
    cdef const double* pb
    cdef const double* pc
    cdef double o1, o2, s1, s2, s3
    for q in range(<int>tris.size()):
        if q == skip:
            continue
        pa = &w.pts[3 * tris[q][0]]
        pb = &w.pts[3 * tris[q][1]]
        pc = &w.pts[3 * tris[q][2]]
        o1 = tet_det(pa, pb, pc, x)
        o2 = tet_det(pa, pb, pc, y)
        if (o1 > 0.0 and o2 > 0.0) or (o1 < 0.0 and o2 < 0.0):
            continue
        s1 = tet_det(x, y, pa, pb)
        s2 = tet_det(x, y, pb, pc)
        s3 = tet_det(x, y, pc, pa)
        if (s1 > 0.0 and s2 > 0.0 and s3 > 0.0) or (s1 < 0.0 and s2 < 0.0 and s3 < 0.0):
            if o1 == 0.0 or o2 == 0.0:
                return -1
            count += 1
        elif not ((s1 > 0.0 or s2 > 0.0 or s3 > 0.0) and (s1 < 0.0 or s2 < 0.0 or s3 < 0.0)):
            return -1
    return count


# --------------------------------------------------------------------------
# the per-cell pipeline


cdef struct SideResult:
    bint cut
    double vol
    double area
    double marks[6]
    int nleaves
    vector[RS] pieces
    vector[int] poly_ref
    vector[vector[int]] poly_verts


cdef class Mesh:
    cdef vector[double] verts
    cdef vector[int] faces
    cdef object classifier


cdef int cut_side(WS& w, const double* corners, const Plane* kplanes, Mesh mesh,
                  const vector[int]& fids, bint flip, double h, bint marks,
                  SideResult& res) except -1:
    res.cut = False
    res.pieces.clear()
    res.poly_ref.clear()
    res.poly_verts.clear()
    w.pts.clear()
    w.cols.clear()
    w.rows.clear()
    cdef int c, q, k, g, l, j, f, v
    for c in range(8):
        add_point(w, corners[3 * c], corners[3 * c + 1], corners[3 * c + 2])
    # local ids of the surface vertices, by first appearance
    cdef vector[int] gl, loc  # gl: global vertex of each local id (-1 for corners)
    gl.assign(8, -1)
    cdef vector[vector[int]] tris
    cdef vector[int] t3
    t3.resize(3)
    cdef int m = <int>fids.size()
    cdef int gv
    for q in range(m):
        for k in range(3):
            gv = mesh.faces[3 * fids[q] + k]
            l = -1
            for j in range(8, <int>gl.size()):
                if gl[j] == gv:
                    l = j
                    break
            if l < 0:
                l = <int>gl.size()
                gl.push_back(gv)
                add_point(w, mesh.verts[3 * gv], mesh.verts[3 * gv + 1], mesh.verts[3 * gv + 2])
            t3[k] = l
        if flip:
            l = t3[1]
            t3[1] = t3[2]
            t3[2] = l
        tris.push_back(t3)
        if flip:
            l = t3[1]
            t3[1] = t3[2]
            t3[2] = l
    cdef int ns0 = <int>(w.pts.size() / 3)
    cdef Plane pl
    for j in range(6):
        w.rows.push_back(kplanes[j])
    for q in range(m):
        plane_from_points(&w.pts[3 * tris[q][0]], &w.pts[3 * tris[q][1]], &w.pts[3 * tris[q][2]], fids[q], &pl)
        w.rows.push_back(pl)
    cdef int nrow0 = <int>w.rows.size()
    cdef vector[double] col
    col.resize(nrow0)
    for v in range(ns0):
        for j in range(nrow0):
            col[j] = sdist(w.rows[j], &w.pts[3 * v], w.eps_sn)
        w.cols.push_back(col)

    # faces on a cell plane
    cdef vector[int] group
    cdef bint any_kept = False
    cdef double dot
    cdef int a, b, cc
    for q in range(m):
        a = tris[q][0]
        b = tris[q][1]
        cc = tris[q][2]
        g = -1
        for j in range(6):
            if w.cols[a][j] == 0.0 and w.cols[b][j] == 0.0 and w.cols[cc][j] == 0.0:
                dot = (w.rows[6 + q].n[0] * w.rows[j].n[0] + w.rows[6 + q].n[1] * w.rows[j].n[1]
                       + w.rows[6 + q].n[2] * w.rows[j].n[2])
                if dot > 0.5:
                    g = j
                    break
                if dot < -0.5:
                    g = -2
                    break
        group.push_back(g)
        if g != -2:
            any_kept = True
    if not any_kept:
        return 0

    cdef vector[int] srows
    for q in range(m):
        srows.push_back(6 + q)
    cdef RS tmp, S0
    from_polygons(tris, srows, tmp)
    pol(tmp, S0)
    cdef vector[Plane] wpl
    walls(w, S0, wpl)
    cdef vector[int] wrows
    for q in range(<int>wpl.size()):
        wrows.push_back(nrow0 + q)
    add_planes(w, wpl)

    cdef vector[int] all0, svids
    for v in range(ns0):
        all0.push_back(v)
        if v >= 8:
            svids.push_back(v)
    cdef vector[int] on_row, on_sign
    on_row.assign(6 + m, -1)
    on_sign.assign(6 + m, 0)
    cdef int fk, fs_
    for fk in range(6):
        for fs_ in range(6, 6 + m):
            if not quasi_aligned_rows(w, fk, fs_, svids, w.eps_hs):
                continue
            g = alignment_sign_rows(w, fk, fs_, all0)
            copy_row(w, fk, fs_, g, all0)
            on_row[fs_] = fk
            on_sign[fs_] = g
    for q in range(m):
        if group[q] >= 0:
            copy_row(w, group[q], 6 + q, 1, all0)
            on_row[6 + q] = group[q]
            on_sign[6 + q] = 1

    # clip each group of faces to the open cell
    cdef vector[RS] parts
    cdef vector[vector[int]] gtris
    cdef vector[int] glabels, krows, ksigns, kcaps
    cdef RS part
    gtris.clear()
    glabels.clear()
    for q in range(m):
        if group[q] == -1:
            gtris.push_back(tris[q])
            glabels.push_back(6 + q)
    if gtris.size():
        from_polygons(gtris, glabels, tmp)
        pol(tmp, part)
        krows.clear()
        ksigns.clear()
        kcaps.clear()
        for j in range(6):
            krows.push_back(j)
            ksigns.push_back(1)
            kcaps.push_back(CAP)
        clip_rows(w, part, krows, ksigns, kcaps, tmp)
        parts.push_back(tmp)
    cdef vector[int] remap_from, remap_to
    cdef int nv
    for j in range(6):
        gtris.clear()
        glabels.clear()
        remap_from.clear()
        remap_to.clear()
        for q in range(m):
            if group[q] != j:
                continue
            for k in range(3):
                v = tris[q][k]
                l = index_of(remap_from, v)
                if l < 0:
                    nv = add_point(w, w.pts[3 * v], w.pts[3 * v + 1], w.pts[3 * v + 2])
                    col = w.cols[v]
                    w.cols.push_back(col)
                    remap_from.push_back(v)
                    remap_to.push_back(nv)
                    t3[k] = nv
                else:
                    t3[k] = remap_to[l]
            gtris.push_back(t3)
            glabels.push_back(6 + q)
        if gtris.size() == 0:
            continue
        from_polygons(gtris, glabels, tmp)
        pol(tmp, part)
        krows.clear()
        ksigns.clear()
        kcaps.clear()
        for k in range(6):
            if k != j:
                krows.push_back(k)
                ksigns.push_back(1)
                kcaps.push_back(CAP)
        clip_rows(w, part, krows, ksigns, kcaps, tmp)
        parts.push_back(tmp)

    # union of the parts, ids ascending
    cdef RS S
    S.open_ = True
    cdef vector[int] order
    for q in range(<int>parts.size()):
        for k in range(<int>parts[q].ids.size()):
            order.push_back(parts[q].ids[k])
    sort(order.begin(), order.end())
    cdef int pq, pk
    for k in range(<int>order.size()):
        for pq in range(<int>parts.size()):
            pk = rs_find(parts[pq], order[k])
            if pk >= 0:
                S.ids.push_back(order[k])
                S.nb.push_back(parts[pq].nb[pk])
                S.lb.push_back(parts[pq].lb[pk])
                break
    cdef vector[Face] bfaces
    rs_faces(S, bfaces)
    if bfaces.size() == 0:
        return 0
    res.cut = True

    cdef double area = 0.0, ar
    cdef int best = -1
    cdef double best_area = -1.0
    cdef double on_same[6]
    cdef double on_opp[6]
    for j in range(6):
        on_same[j] = 0.0
        on_opp[j] = 0.0
    for q in range(<int>bfaces.size()):
        ar = polygon_area(w, bfaces[q].v)
        area += ar
        if ar > best_area:
            best = q
            best_area = ar
        if on_row[bfaces[q].label] >= 0:
            if on_sign[bfaces[q].label] > 0:
                on_same[on_row[bfaces[q].label]] += ar
            else:
                on_opp[on_row[bfaces[q].label]] += ar
        res.poly_ref.push_back(w.rows[bfaces[q].label].ref)
        res.poly_verts.push_back(bfaces[q].v)
    res.area = area

    cdef vector[int] live_rows, live
    for q in range(<int>bfaces.size()):
        if index_of(live_rows, bfaces[q].label) < 0:
            live_rows.push_back(bfaces[q].label)
    sort(live_rows.begin(), live_rows.end())
    for q in range(<int>wrows.size()):
        live_rows.push_back(wrows[q])
    for v in range(8):
        live.push_back(v)
    for k in range(<int>order.size()):
        live.push_back(order[k])
    cdef vector[int] canon_rep, canon_sign
    align_planes(w, live_rows, live, canon_rep, canon_sign)

    cdef vector[vector[int]] box
    cdef vector[int] box_labels
    cdef vector[int] quad
    quad.resize(4)
    for j in range(6):
        for k in range(4):
            quad[k] = BOX_FACES[j][k]
        box.push_back(quad)
        box_labels.push_back(j)
    cdef RS P
    from_polygons(box, box_labels, P)
    cdef vector[Leaf] leaves
    decompose(w, P, S, wrows, 0, leaves)
    res.nleaves = <int>leaves.size()

    cdef double yref[3]
    cdef double xc[3]
    cdef double sx = 0.0, sy = 0.0, sz = 0.0, wn, side
    nv = <int>bfaces[best].v.size()
    for k in range(nv):
        v = bfaces[best].v[k]
        sx += w.pts[3 * v]
        sy += w.pts[3 * v + 1]
        sz += w.pts[3 * v + 2]
    yref[0] = sx / nv
    yref[1] = sy / nv
    yref[2] = sz / nv
    cdef Plane nref = w.rows[bfaces[best].label]
    cdef int cnt

    cdef double thr = w.eps_sn * h * h
    cdef vector[vector[Face]] classes
    cdef vector[int] crow, csign
    cdef int li, ci, fi, r
    cdef bint inside, dup
    cdef RS Q
    for li in range(<int>leaves.size()):
        colour(w, leaves[li].S, classes)
        if classes.size() == 0:
            sx = 0.0
            sy = 0.0
            sz = 0.0
            for k in range(<int>leaves[li].P.ids.size()):
                v = leaves[li].P.ids[k]
                sx += w.pts[3 * v]
                sy += w.pts[3 * v + 1]
                sz += w.pts[3 * v + 2]
            nv = <int>leaves[li].P.ids.size()
            xc[0] = sx / nv
            xc[1] = sy / nv
            xc[2] = sz / nv
            cnt = segment_crossings(w, tris, bfaces[best].label - 6, xc, yref)
            side = nref.n[0] * (xc[0] - yref[0]) + nref.n[1] * (xc[1] - yref[1]) + nref.n[2] * (xc[2] - yref[2])
            if cnt < 0 or side == 0.0:
                wn = mesh.classifier((xc[0], xc[1], xc[2]))
                inside = wn < 0.5 if flip else wn > 0.5
            else:
                inside = (side < 0.0) != (cnt % 2 == 1)
            if inside and poly_volume(w, leaves[li].P) > thr:
                res.pieces.push_back(leaves[li].P)
            continue
        for ci in range(<int>classes.size()):
            crow.clear()
            csign.clear()
            for fi in range(<int>classes[ci].size()):
                r = classes[ci][fi].label
                dup = False
                for k in range(<int>crow.size()):
                    if crow[k] == canon_rep[r] and csign[k] == canon_sign[r]:
                        dup = True
                        break
                if not dup:
                    crow.push_back(canon_rep[r])
                    csign.push_back(canon_sign[r])
            clip_rows(w, leaves[li].P, crow, csign, crow, Q)
            if Q.ids.size() and poly_volume(w, Q) > thr:
                res.pieces.push_back(Q)

    cdef double vol = 0.0
    for q in range(<int>res.pieces.size()):
        vol += poly_volume(w, res.pieces[q])
    res.vol = vol
    cdef double at[6]
    cdef vector[Face] pf
    cdef bint ok
    if marks:
        for j in range(6):
            at[j] = 0.0
        for q in range(<int>res.pieces.size()):
            rs_faces(res.pieces[q], pf)
            for fi in range(<int>pf.size()):
                for j in range(6):
                    ok = True
                    for k in range(<int>pf[fi].v.size()):
                        if w.cols[pf[fi].v[k]][j] != 0.0:
                            ok = False
                            break
                    if ok:
                        at[j] += polygon_area(w, pf[fi].v)
        for j in range(6):
            res.marks[j] = (at[j] - on_same[j] + on_opp[j]) / (h * h)
    return 0


# --------------------------------------------------------------------------
# conversion to Python objects (kept geometry only)


cdef object to_rotation_system(WS& w, const RS& R):
    cdef int n = <int>R.ids.size(), vi, k
    ids = {}
    for vi in range(n):
        ids[R.ids[vi]] = vi
    ids[OPEN] = OPEN
    pts = [(w.pts[3 * R.ids[vi]], w.pts[3 * R.ids[vi] + 1], w.pts[3 * R.ids[vi] + 2]) for vi in range(n)]
    adj = {}
    lab = {}
    for vi in range(n):
        adj[vi] = [ids[R.nb[vi][k]] for k in range(<int>R.nb[vi].size())]
        lab[vi] = [R.lb[vi][k] for k in range(<int>R.lb[vi].size())]
    return RotationSystem(adj, lab, pts, R.open_)


cdef void grid_point(const double* o, double h, bint rotated, const double* r, const double* c,
                     int i, int j, int k, double* out):
    cdef double l0 = o[0] + i * h
    cdef double l1 = o[1] + j * h
    cdef double l2 = o[2] + k * h
    cdef double d0, d1, d2
    if not rotated:
        out[0] = l0
        out[1] = l1
        out[2] = l2
        return
    d0 = l0 - c[0]
    d1 = l1 - c[1]
    d2 = l2 - c[2]
    out[0] = r[0] * d0 + r[1] * d1 + r[2] * d2 + c[0]
    out[1] = r[3] * d0 + r[4] * d1 + r[5] * d2 + c[1]
    out[2] = r[6] * d0 + r[7] * d1 + r[8] * d2 + c[2]


def process_cells(ctx, cells, ptr, idx, dims, bint exteriors, bint keep, classifier=None):
    """Compiled counterpart of ``global_cut.process_cells_py`` (same arguments and result)."""
    cdef Mesh mesh = Mesh()
    V = np.ascontiguousarray(np.asarray(ctx.verts, dtype=np.float64).reshape(-1))
    F = np.ascontiguousarray(np.asarray(ctx.faces, dtype=np.int64).reshape(-1))
    cdef double[::1] Vv = V
    cdef long long[::1] Fv = F
    cdef int q
    mesh.verts.resize(Vv.shape[0])
    for q in range(Vv.shape[0]):
        mesh.verts[q] = Vv[q]
    mesh.faces.resize(Fv.shape[0])
    for q in range(Fv.shape[0]):
        mesh.faces[q] = <int>Fv[q]
    if classifier is None:
        tri = ctx.triangles
        classifier = lambda p: winding_number(tri, p)
    mesh.classifier = classifier

    cdef long long[::1] cv = np.ascontiguousarray(cells, dtype=np.int64)
    cdef long long[::1] pv = np.ascontiguousarray(ptr, dtype=np.int64)
    cdef long long[::1] iv = np.ascontiguousarray(idx, dtype=np.int64)
    cdef int n = cv.shape[0]
    cut = np.zeros(n, bool)
    v_in = np.zeros(n)
    v_out = np.zeros(n)
    area = np.zeros(n)
    marks = np.zeros((n, 6))
    nleaves = np.zeros(n, np.int64)
    cdef double[::1] vinv = v_in, voutv = v_out, areav = area
    cdef double[:, ::1] mv = marks
    cdef long long[::1] nlv = nleaves
    geometry = {} if keep else None

    cdef double o[3]
    cdef double cen[3]
    o[0], o[1], o[2] = ctx.origin
    cen[0], cen[1], cen[2] = ctx.center
    cdef double h = ctx.h
    R = ctx.rotation
    cdef double axes[3][3]
    cdef double rot[9]
    cdef bint rotated = R is not None
    cdef int a, j
    for a in range(3):
        for j in range(3):
            if R is None:
                axes[a][j] = 1.0 if a == j else 0.0
                rot[3 * a + j] = 0.0
            else:
                axes[a][j] = R[j][a]
                rot[3 * a + j] = R[a][j]
    cdef int ny = dims[1], nz = dims[2]
    cdef long long c
    cdef int i, jj, kk, corner
    cdef double corners[24]
    cdef Plane kplanes[6]
    cdef WS w
    w.eps_sn = ctx.eps_sn
    w.eps_hs = ctx.eps_hs
    cdef vector[int] fids
    cdef SideResult res, rx
    cdef RS K
    cdef vector[vector[int]] box
    cdef vector[int] box_labels, quad
    quad.resize(4)
    for j in range(6):
        for a in range(4):
            quad[a] = BOX_FACES[j][a]
        box.push_back(quad)
        box_labels.push_back(j)
    cdef double vk
    for q in range(n):
        c = cv[q]
        i = <int>(c // (ny * nz))
        jj = <int>((c // nz) % ny)
        kk = <int>(c % nz)
        for corner in range(8):
            grid_point(o, h, rotated, rot, cen, i + (corner & 1), jj + ((corner >> 1) & 1), kk + ((corner >> 2) & 1),
                       &corners[3 * corner])
        for j in range(6):
            a = j // 2
            if j % 2 == 0:
                kplanes[j].n[0] = -axes[a][0]
                kplanes[j].n[1] = -axes[a][1]
                kplanes[j].n[2] = -axes[a][2]
            else:
                kplanes[j].n[0] = axes[a][0]
                kplanes[j].n[1] = axes[a][1]
                kplanes[j].n[2] = axes[a][2]
            kplanes[j].p[0] = corners[3 * BOX_ANCHOR[j]]
            kplanes[j].p[1] = corners[3 * BOX_ANCHOR[j] + 1]
            kplanes[j].p[2] = corners[3 * BOX_ANCHOR[j] + 2]
            kplanes[j].ref = j
        fids.clear()
        for a in range(<int>pv[q], <int>pv[q + 1]):
            fids.push_back(<int>iv[a])
        try:
            cut_side(w, corners, kplanes, mesh, fids, False, h, True, res)
            if not res.cut:
                continue
            cut[q] = True
            vinv[q] = res.vol
            areav[q] = res.area
            for j in range(6):
                mv[q, j] = res.marks[j]
            nlv[q] = res.nleaves
            if keep:
                pieces = [to_rotation_system(w, res.pieces[a]) for a in range(<int>res.pieces.size())]
                polys = [(res.poly_ref[a], [(w.pts[3 * v], w.pts[3 * v + 1], w.pts[3 * v + 2])
                                            for v in res.poly_verts[a]])
                         for a in range(<int>res.poly_ref.size())]
            ext = []
            if exteriors:
                cut_side(w, corners, kplanes, mesh, fids, True, h, False, rx)
                if not rx.cut:
                    w.pts.clear()
                    for corner in range(8):
                        add_point(w, corners[3 * corner], corners[3 * corner + 1], corners[3 * corner + 2])
                    from_polygons(box, box_labels, K)
                    vk = poly_volume(w, K)
                    if not res.vol > 0.5 * vk:
                        voutv[q] = vk
                        if keep:
                            ext = [to_rotation_system(w, K)]
                else:
                    voutv[q] = rx.vol
                    if keep:
                        ext = [to_rotation_system(w, rx.pieces[a]) for a in range(<int>rx.pieces.size())]
            if keep:
                geometry[int(c)] = (pieces, ext, polys)
        except Exception as exc:
            raise CutError((i, jj, kk), exc) from exc
    return BatchResult(cut, v_in, v_out, area, marks, nleaves, geometry)
