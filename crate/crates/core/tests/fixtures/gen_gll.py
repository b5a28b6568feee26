# Regenerates gll_mpmath.txt: p-point GLL nodes/weights at 40 digits.
import mpmath as mp

mp.mp.dps = 60

def rule(p):
    n = p - 1
    # P_n coefficients (highest degree first) from the three-term recurrence.
    a, b = [mp.mpf(1)], [mp.mpf(1), mp.mpf(0)]
    for k in range(1, n):
        c = [(2 * k + 1) * v for v in b] + [mp.mpf(0)]
        d = [mp.mpf(0), mp.mpf(0)] + [k * v for v in a]
        a, b = b, [(x - y) / (k + 1) for x, y in zip(c, d)]
    P = a if n == 0 else b
    dcoef = [(len(P) - 1 - i) * v for i, v in enumerate(P[:-1])]
    inner = mp.polyroots(dcoef, maxsteps=500, extraprec=400) if n > 1 else []
    xs = [mp.mpf(-1)] + sorted(mp.re(r) for r in inner) + [mp.mpf(1)]
    ws = [2 / (p * n * mp.legendre(n, x) ** 2) for x in xs]
    return xs, ws

with open("gll_mpmath.txt", "w") as f:
    f.write("# p i node weight\n")
    for p in range(2, 11):
        xs, ws = rule(p)
        for i, (x, w) in enumerate(zip(xs, ws)):
            f.write(f"{p} {i} {mp.nstr(x, 40)} {mp.nstr(w, 40)}\n")
