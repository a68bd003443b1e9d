#!/usr/bin/env python3
"""Regenerate the parity-check matrices in codes/ as MacKay alist files.

The matrices are rebuilt from their standard constructions:

  * BCH codes: systematic PCM whose column j is x^j mod g(x), where g(x) is the
    narrow-sense generator over the primitive polynomial of GF(2^m).
  * Array LDPC codes: p = 11 circulant array, block (r, c) = P^(r*c); all
    j*p rows are kept, so the matrices carry j-1 linearly dependent rows.
  * LTE turbo code (132,40): constituent polynomial checks p*g0 = u*g1 with
    g0 = 1+D^2+D^3, g1 = 1+D+D^3, QPP interleaver (f1=3, f2=10), trellis
    termination; columns ordered [u, p1, p2, tail1, tail2] and reduced to
    echelon form with pivots taken from the last column backwards.
  * IEEE 802.22 (384,320): rate-5/6 base matrix, z = 16, shifts floor(p*z/96).

Usage: python3 scripts/reconstruct_pcms.py [outdir]
"""
import sys
from pathlib import Path


def gf_tables(m, prim):
    size = (1 << m) - 1
    exp, log = [0] * (2 * size), [0] * (size + 1)
    x = 1
    for i in range(size):
        exp[i] = x
        log[x] = i
        x <<= 1
        if x & (1 << m):
            x ^= prim
    for i in range(size, 2 * size):
        exp[i] = exp[i - size]
    return exp, log


def poly_mul(a, b):
    r = 0
    while b:
        if b & 1:
            r ^= a
        a <<= 1
        b >>= 1
    return r


def poly_mod(a, b):
    db = b.bit_length() - 1
    while a and a.bit_length() - 1 >= db:
        a ^= b << (a.bit_length() - 1 - db)
    return a


def min_poly(i, m, exp, log):
    size = (1 << m) - 1
    coset, j = set(), i
    while j not in coset:
        coset.add(j)
        j = (j * 2) % size
    p = [1]
    for c in coset:
        q = [0] * (len(p) + 1)
        for t, co in enumerate(p):
            q[t + 1] ^= co
            if co:
                q[t] ^= exp[(log[co] + c) % size]
        p = q
    return sum(1 << t for t, co in enumerate(p) if co), coset


def bch_generator(m, prim, t):
    exp, log = gf_tables(m, prim)
    g, used = 1, set()
    for i in range(1, 2 * t, 2):
        if i in used:
            continue
        mp, coset = min_poly(i, m, exp, log)
        used |= coset
        g = poly_mul(g, mp)
    return g


def bch_pcm(n, k, m, prim, t):
    g = bch_generator(m, prim, t)
    r = n - k
    assert g.bit_length() - 1 == r
    cols = [poly_mod(1 << j, g) for j in range(n)]
    return [[(cols[j] >> i) & 1 for j in range(n)] for i in range(r)]


def array_ldpc(p, j):
    n = p * p
    rows = []
    for r in range(j):
        for t in range(p):
            row = [0] * n
            for c in range(p):
                row[c * p + (t + r * c) % p] = 1
            rows.append(row)
    return rows


def echelon_from_right(rows):
    rows = [list(r) for r in rows]
    n = len(rows[0])
    out, rank = [], 0
    for col in reversed(range(n)):
        piv = next((i for i in range(rank, len(rows)) if rows[i][col]), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for i in range(len(rows)):
            if i != rank and rows[i][col]:
                rows[i] = [a ^ b for a, b in zip(rows[i], rows[rank])]
        rank += 1
    return rows[:rank]


def lte_turbo_40():
    k = 40
    perm = [(3 * i + 10 * i * i) % k for i in range(k)]
    g0, g1 = [1, 0, 1, 1], [1, 1, 0, 1]
    n = 3 * k + 12

    def ucol(enc, t):
        if t < k:
            return t if enc == 1 else perm[t]
        return 3 * k + (t - k) * 2 + (0 if enc == 1 else 6)

    def pcol(enc, t):
        if t < k:
            return (k if enc == 1 else 2 * k) + t
        return 3 * k + (t - k) * 2 + 1 + (0 if enc == 1 else 6)

    rows = []
    for enc in (1, 2):
        for t in range(k + 6):
            row = [0] * n
            for d in range(4):
                if 0 <= t - d < k + 3:
                    if g0[d]:
                        row[pcol(enc, t - d)] ^= 1
                    if g1[d]:
                        row[ucol(enc, t - d)] ^= 1
            rows.append(row)
    return echelon_from_right(rows)


WRAN_R56 = [
    [1, 25, 55, -1, 47, 4, -1, 91, 84, 8, 86, 52, 82, 33, 5, 0, 36, 20, 4, 77, 80, 0, -1, -1],
    [-1, 6, -1, 36, 40, 47, 12, 79, 47, -1, 41, 21, 12, 71, 14, 72, 0, 44, 49, 0, 0, 0, 0, -1],
    [51, 81, 83, 4, 67, -1, 21, -1, 31, 24, 91, 61, 81, 9, 86, 78, 60, 88, 67, 15, -1, -1, 0, 0],
    [50, -1, 50, 15, -1, 36, 13, 10, 11, 20, 53, 90, 29, 92, 57, 30, 84, 92, 11, 66, 80, -1, -1, 0],
]


def qc_expand(base, z, z0=96):
    rows = []
    nc = len(base[0])
    for brow in base:
        for t in range(z):
            row = [0] * (nc * z)
            for c, s in enumerate(brow):
                if s >= 0:
                    row[c * z + (t + (s * z) // z0) % z] = 1
            rows.append(row)
    return rows


def write_alist(path, rows):
    m, n = len(rows), len(rows[0])
    col_idx = [[r + 1 for r in range(m) if rows[r][c]] for c in range(n)]
    row_idx = [[c + 1 for c in range(n) if rows[r][c]] for r in range(m)]
    mc = max(len(c) for c in col_idx)
    mr = max(len(r) for r in row_idx)
    lines = [f"{n} {m}", f"{mc} {mr}",
             " ".join(str(len(c)) for c in col_idx),
             " ".join(str(len(r)) for r in row_idx)]
    lines += [" ".join(str(v) for v in c + [0] * (mc - len(c))) for c in col_idx]
    lines += [" ".join(str(v) for v in r + [0] * (mr - len(r))) for r in row_idx]
    Path(path).write_text("\n".join(lines) + "\n")


def main():
    out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "codes")
    out.mkdir(parents=True, exist_ok=True)
    codes = {
        "bch_31_16": bch_pcm(31, 16, 5, 0b100101, 3),
        "bch_63_36": bch_pcm(63, 36, 6, 0b1000011, 5),
        "bch_63_45": bch_pcm(63, 45, 6, 0b1000011, 3),
        "bch_63_51": bch_pcm(63, 51, 6, 0b1000011, 2),
        "bch_255_223": bch_pcm(255, 223, 8, 0b100011101, 4),
        "ldpc_121_60": array_ldpc(11, 6),
        "ldpc_121_70": array_ldpc(11, 5),
        "ldpc_121_80": array_ldpc(11, 4),
        "turbo_132_40": lte_turbo_40(),
        "wran_384_320": qc_expand(WRAN_R56, 16),
        "hamming_7_4": [[1, 0, 1, 0, 1, 0, 1], [0, 1, 1, 0, 0, 1, 1], [0, 0, 0, 1, 1, 1, 1]],
        "tree_3": [[1, 1, 0], [0, 1, 1]],
    }
    for name, rows in codes.items():
        write_alist(out / f"{name}.alist", rows)
        print(f"{name}: {len(rows)}x{len(rows[0])}")


if __name__ == "__main__":
    main()
