"""Reference sigma_{K,N} and tau_{K,N} at 50 significant digits.

Run from this directory: python3 sigma_tau_mp.py > sigma_tau_mp.json
"""
import json

from mpmath import mp, mpf, pi, sin, sinh, sqrt

mp.dps = 50


def sigma(kappa, t, theta):
    x = kappa * theta**2
    if x >= pi**2:
        return None
    if x == 0:
        return t
    if x > 0:
        s = theta * sqrt(kappa)
        return sin(t * s) / sin(s)
    s = theta * sqrt(-kappa)
    return sinh(t * s) / sinh(s)


def sigma_kn(k, n, t, theta):
    if k * theta**2 <= n * pi**2:
        return None
    return sigma(k / n, t, theta)


def tau_kn(k, n, t, theta):
    s = sigma(k / (n - 1), t, theta)
    if s is None:
        return None
    return t ** (1 / n) * s ** ((n - 1) / n)


ts = [mpf(i) / 10 - mpf(1) / 20 for i in range(1, 11)]
thetas = [mpf(i) * 3 / 10 for i in range(1, 11)]
ns = [-mpf(i) / 2 for i in range(1, 11)]
ks = [mpf(-1), mpf(1), mpf(-7) / 2]

rows = []
for k in ks:
    for n in ns:
        for t in ts:
            for th in thetas:
                s = sigma_kn(k, n, t, th)
                u = tau_kn(k, n, t, th)
                rows.append(
                    [
                        mp.nstr(k, 17),
                        mp.nstr(n, 17),
                        mp.nstr(t, 17),
                        mp.nstr(th, 17),
                        "inf" if s is None else mp.nstr(s, 50),
                        "inf" if u is None else mp.nstr(u, 50),
                    ]
                )
print(json.dumps({"digits": 50, "rows": rows}))
