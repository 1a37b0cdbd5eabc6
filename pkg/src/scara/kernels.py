"""Hot loops: bounded leaf enumeration for the solver and all-pairs shortest
path counting for centrality.

Each kernel has a numba implementation and a numpy implementation with the
same signature and bit-identical results. The public names dispatch on
``scara._accel.USE_NUMBA``.

Leaf enumeration works on a *compiled* constraint problem:

* ``sizes[k]`` values for variable ``k``, stored at
  ``vals_flat[vals_off[k]:vals_off[k] + sizes[k]]`` in ascending order;
* binary atoms ``value[a] OP value[b] + off`` with op codes from ``OP_*``;
* not-in-box clauses: clause ``c`` owns entries
  ``clause_start[c]:clause_start[c] + clause_len[c]``; entry ``e`` tests
  variable ``ent_var[e]`` against the membership mask at
  ``mask_flat[ent_mask_off[e]:...]`` (indexed by value position). A clause
  holds when at least one entry's value lies outside its mask.

Leaves are visited in mixed-radix order with the last variable varying
fastest, so the first model found is the lexicographically smallest one.
"""

from __future__ import annotations

import numpy as np

from scara._accel import USE_NUMBA, njit

OP_EQ, OP_NEQ, OP_LE, OP_GE, OP_LT, OP_GT = range(6)

_INDEX_CAP = 1 << 62
_CHUNK = 1 << 16


def strides_for(sizes: np.ndarray) -> tuple[np.ndarray, int]:
    """Mixed-radix strides (clipped at 2**62) and the clipped leaf count."""
    strides = np.zeros(len(sizes), dtype=np.int64)
    acc = 1
    for k in range(len(sizes) - 1, -1, -1):
        strides[k] = min(acc, _INDEX_CAP)
        acc = min(acc * int(sizes[k]), _INDEX_CAP)
    return strides, acc


@njit
def _scan(sizes, strides, vals_flat, vals_off, bin_a, bin_b, bin_op, bin_off,
          clause_start, clause_len, ent_var, ent_mask_off, mask_flat, start,
          limit, cap, stop_at_cap):
    """Visit up to ``limit`` leaves from ``start`` and collect the models.

    Returns ``(hits, n, visited, complete)``. With ``stop_at_cap`` the scan
    ends as soon as ``cap`` models are held; otherwise it ends (incomplete)
    on the first model beyond ``cap``.

    The leaf test is written out in the loop body on purpose: a helper taking
    the twelve arrays costs far more per call than the test itself.
    """
    nv = sizes.shape[0]
    out = np.empty(max(cap, 1), dtype=np.int64)
    n = 0
    digits = np.zeros(nv, dtype=np.int64)
    for k in range(nv):
        digits[k] = (start // strides[k]) % sizes[k]
    for i in range(limit):
        ok = True
        for j in range(bin_a.shape[0]):
            a = bin_a[j]
            b = bin_b[j]
            x = vals_flat[vals_off[a] + digits[a]]
            y = vals_flat[vals_off[b] + digits[b]] + bin_off[j]
            op = bin_op[j]
            if op == 0:
                ok = x == y
            elif op == 1:
                ok = x != y
            elif op == 2:
                ok = x <= y
            elif op == 3:
                ok = x >= y
            elif op == 4:
                ok = x < y
            else:
                ok = x > y
            if not ok:
                break
        if ok:
            for c in range(clause_start.shape[0]):
                hit = False
                for e in range(clause_start[c], clause_start[c] + clause_len[c]):
                    if mask_flat[ent_mask_off[e] + digits[ent_var[e]]] == 0:
                        hit = True
                        break
                if not hit:
                    ok = False
                    break
        if ok:
            if n == cap:
                return out, n, i + 1, False
            out[n] = start + i
            n += 1
            if stop_at_cap and n == cap:
                return out, n, i + 1, True
        k = nv - 1
        while k >= 0:
            digits[k] += 1
            if digits[k] < sizes[k]:
                break
            digits[k] = 0
            k -= 1
    return out, n, limit, True


def first_leaf_numba(sizes, strides, vals_flat, vals_off, bin_a, bin_b, bin_op,
                     bin_off, clause_start, clause_len, ent_var, ent_mask_off,
                     mask_flat, start, limit):
    out, n, visited, _ = _scan(sizes, strides, vals_flat, vals_off, bin_a, bin_b,
                               bin_op, bin_off, clause_start, clause_len, ent_var,
                               ent_mask_off, mask_flat, start, limit, 1, True)
    if n:
        return int(out[0]), int(visited)
    return -1, limit


def all_leaves_numba(sizes, strides, vals_flat, vals_off, bin_a, bin_b, bin_op,
                     bin_off, clause_start, clause_len, ent_var, ent_mask_off,
                     mask_flat, total, cap):
    out, n, _, complete = _scan(sizes, strides, vals_flat, vals_off, bin_a, bin_b,
                                bin_op, bin_off, clause_start, clause_len, ent_var,
                                ent_mask_off, mask_flat, 0, total, cap, False)
    return out[:n], int(n), bool(complete)


def _chunk_ok(idx, sizes, strides, vals_flat, vals_off, bin_a, bin_b, bin_op,
              bin_off, clause_start, clause_len, ent_var, ent_mask_off, mask_flat):
    digits = (idx[:, None] // strides[None, :]) % sizes[None, :]
    ok = np.ones(idx.shape[0], dtype=bool)
    for j in range(bin_a.shape[0]):
        a, b = bin_a[j], bin_b[j]
        xa = vals_flat[vals_off[a] + digits[:, a]]
        xb = vals_flat[vals_off[b] + digits[:, b]] + bin_off[j]
        op = bin_op[j]
        if op == OP_EQ:
            ok &= xa == xb
        elif op == OP_NEQ:
            ok &= xa != xb
        elif op == OP_LE:
            ok &= xa <= xb
        elif op == OP_GE:
            ok &= xa >= xb
        elif op == OP_LT:
            ok &= xa < xb
        else:
            ok &= xa > xb
    for c in range(clause_start.shape[0]):
        hit = np.zeros(idx.shape[0], dtype=bool)
        for e in range(clause_start[c], clause_start[c] + clause_len[c]):
            v = ent_var[e]
            hit |= mask_flat[ent_mask_off[e] + digits[:, v]] == 0
        ok &= hit
    return ok


def first_leaf_numpy(sizes, strides, vals_flat, vals_off, bin_a, bin_b, bin_op,
                     bin_off, clause_start, clause_len, ent_var, ent_mask_off,
                     mask_flat, start, limit):
    done = 0
    while done < limit:
        n = min(_CHUNK, limit - done)
        idx = np.arange(start + done, start + done + n, dtype=np.int64)
        ok = _chunk_ok(idx, sizes, strides, vals_flat, vals_off, bin_a, bin_b,
                       bin_op, bin_off, clause_start, clause_len, ent_var,
                       ent_mask_off, mask_flat)
        hits = np.flatnonzero(ok)
        if hits.size:
            first = int(hits[0])
            return start + done + first, done + first + 1
        done += n
    return -1, limit


def all_leaves_numpy(sizes, strides, vals_flat, vals_off, bin_a, bin_b, bin_op,
                     bin_off, clause_start, clause_len, ent_var, ent_mask_off,
                     mask_flat, total, cap):
    found = []
    count = 0
    done = 0
    while done < total:
        n = min(_CHUNK, total - done)
        idx = np.arange(done, done + n, dtype=np.int64)
        ok = _chunk_ok(idx, sizes, strides, vals_flat, vals_off, bin_a, bin_b,
                       bin_op, bin_off, clause_start, clause_len, ent_var,
                       ent_mask_off, mask_flat)
        hits = idx[ok]
        if count + hits.size > cap:
            found.append(hits[: cap - count])
            out = np.concatenate(found)
            return out, cap, False
        found.append(hits)
        count += hits.size
        done += n
    out = np.concatenate(found) if found else np.empty(0, dtype=np.int64)
    return out, count, True


@njit
def all_pairs_sigma_numba(indptr, indices, n):
    dist = np.full((n, n), -1, dtype=np.int64)
    sigma = np.zeros((n, n), dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    for s in range(n):
        dist[s, s] = 0
        sigma[s, s] = 1
        head = 0
        tail = 0
        queue[tail] = s
        tail += 1
        while head < tail:
            v = queue[head]
            head += 1
            for p in range(indptr[v], indptr[v + 1]):
                w = indices[p]
                if dist[s, w] < 0:
                    dist[s, w] = dist[s, v] + 1
                    queue[tail] = w
                    tail += 1
                if dist[s, w] == dist[s, v] + 1:
                    sigma[s, w] += sigma[s, v]
    return dist, sigma


def all_pairs_sigma_numpy(indptr, indices, n):
    adj = np.zeros((n, n), dtype=np.int64)
    for v in range(n):
        adj[v, indices[indptr[v]:indptr[v + 1]]] = 1
    dist = np.full((n, n), -1, dtype=np.int64)
    sigma = np.zeros((n, n), dtype=np.int64)
    frontier = np.eye(n, dtype=np.int64)
    np.fill_diagonal(dist, 0)
    np.fill_diagonal(sigma, 1)
    level = 0
    while frontier.any():
        level += 1
        nxt = frontier @ adj
        nxt[dist >= 0] = 0
        new = nxt > 0
        dist[new] = level
        sigma[new] = nxt[new]
        frontier = nxt
    return dist, sigma


if USE_NUMBA:
    first_leaf = first_leaf_numba
    all_leaves = all_leaves_numba
    all_pairs_sigma = all_pairs_sigma_numba
else:
    first_leaf = first_leaf_numpy
    all_leaves = all_leaves_numpy
    all_pairs_sigma = all_pairs_sigma_numpy
