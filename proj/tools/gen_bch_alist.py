#!/usr/bin/env python3
"""Generate parity-check matrices (alist) for narrow-sense binary BCH codes.

H is built from the cyclic shifts of the reversed check polynomial
h(x) = (x^n + 1) / g(x), giving an (n-k) x n full-rank matrix.

    python3 tools/gen_bch_alist.py 63 36 data/codes/bch_63_36.alist
"""
import sys

PRIMITIVE = {63: 0b1000011, 127: 0b10001001}  # x^6+x+1, x^7+x^3+1


def gf_tables(n):
    m = n.bit_length()
    poly = PRIMITIVE[n]
    exp, log = [0] * (2 * n), [0] * (n + 1)
    x = 1
    for i in range(n):
        exp[i] = exp[i + n] = x
        log[x] = i
        x <<= 1
        if x >> m:
            x ^= poly
    return exp, log


def poly_mul(a, b):
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_divmod(a, b):
    q = 0
    db = b.bit_length() - 1
    while a and a.bit_length() - 1 >= db:
        s = a.bit_length() - 1 - db
        q |= 1 << s
        a ^= b << s
    return q, a


def min_poly(n, coset, exp, log):
    # prod (x + alpha^j) over the coset, coefficients in GF(2^m)
    coeffs = [1]
    for j in coset:
        root = exp[j % n]
        nxt = [0] * (len(coeffs) + 1)
        for i, c in enumerate(coeffs):
            nxt[i + 1] ^= c
            if c:
                nxt[i] ^= exp[(log[c] + log[root]) % n]
        coeffs = nxt
    assert all(c in (0, 1) for c in coeffs)
    return sum(c << i for i, c in enumerate(coeffs))


def generator(n, k):
    exp, log = gf_tables(n)
    g, seen, i = 1, set(), 1
    while g.bit_length() - 1 < n - k:
        if i % n not in seen:
            coset, j = [], i
            while j not in coset:
                coset.append(j)
                j = (2 * j) % n
            seen.update(coset)
            g = poly_mul(g, min_poly(n, coset, exp, log))
        i += 2
    if g.bit_length() - 1 != n - k:
        raise SystemExit(f"no narrow-sense BCH code with n={n}, k={k}")
    return g


def parity_check(n, k):
    g = generator(n, k)
    h, rem = poly_divmod((1 << n) | 1, g)
    assert rem == 0
    hrev = [(h >> (k - i)) & 1 for i in range(k + 1)]
    rows = []
    for r in range(n - k):
        row = [0] * n
        for i, bit in enumerate(hrev):
            row[r + i] = bit
        rows.append(row)
    return rows


def to_alist(rows, n):
    m = len(rows)
    cols = [[r + 1 for r in range(m) if rows[r][c]] for c in range(n)]
    rws = [[c + 1 for c in range(n) if rows[r][c]] for r in range(m)]
    mc, mr = max(map(len, cols)), max(map(len, rws))
    out = [f"{n} {m}", f"{mc} {mr}",
           " ".join(str(len(c)) for c in cols),
           " ".join(str(len(r)) for r in rws)]
    out += [" ".join(map(str, c + [0] * (mc - len(c)))) for c in cols]
    out += [" ".join(map(str, r + [0] * (mr - len(r)))) for r in rws]
    return "\n".join(out) + "\n"


if __name__ == "__main__":
    n, k, path = int(sys.argv[1]), int(sys.argv[2]), sys.argv[3]
    with open(path, "w") as f:
        f.write(to_alist(parity_check(n, k), n))
