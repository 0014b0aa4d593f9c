"""Regenerate ``oracles.json`` from closed forms and high-precision ODE solves (mpmath only).

Run from the repository root:  python3 tests/oracles/make_oracles.py
Nothing here imports the package under test.
"""

import json
from pathlib import Path

import mpmath as mp

mp.mp.dps = 30


def equator_values(mu, n):
    """``p_mu(0)`` and ``p_mu'(0)`` from Gauss's second summation theorem."""
    mu, n = mp.mpf(mu), mp.mpf(n)
    lam = mu * (mu + n - 2)
    p0 = mp.sqrt(mp.pi) * mp.gamma((n - 1) / 2) * mp.rgamma((1 - mu) / 2) * mp.rgamma((mu + n - 1) / 2)
    dp0 = lam / (n - 1) * mp.sqrt(mp.pi) * mp.gamma((n + 1) / 2) * mp.rgamma(1 - mu / 2) * mp.rgamma((mu + n) / 2)
    return p0, dp0


def ratio_table():
    rows = []
    for m in range(3, 22, 2):
        for j in range(1, 20):
            mu = mp.mpf(m) + mp.mpf(j) / 20
            p0, dp0 = equator_values(mu, 3)
            normalized = (-dp0 / p0) / (m * (m + 1 - mu))
            rows.append({"m": m, "mu": float(mu), "normalized": float(normalized)})
    values = [r["normalized"] for r in rows]
    return {"rows": rows, "c": min(values), "C": max(values)}


def capbound(mu=10, delta=0.05, samples=201):
    """``sup_[0, delta] |h' - cos(sqrt(lambda) phi)| / delta^2`` for ``h(0) = 0, h'(0) = 1``, n = 3."""
    lam = mp.mpf(mu) * (mu + 1)
    f = mp.odefun(lambda x, y: [y[1], mp.tan(x) * y[1] - lam * y[0]], 0, [mp.mpf(0), mp.mpf(1)])
    w = mp.sqrt(lam)
    worst = mp.mpf(0)
    for i in range(samples):
        x = mp.mpf(delta) * i / (samples - 1)
        worst = max(worst, abs(f(x)[1] - mp.cos(w * x)))
    return {"mu": mu, "delta": delta, "samples": samples, "C_empirical": float(worst / mp.mpf(delta) ** 2)}


def equator_samples():
    out = []
    for n in (2, 3, 4, 5):
        for mu in (0.5, 1.5, 2.5, 3.5, 5.25, 7.75, 9.9):
            p0, dp0 = equator_values(mu, n)
            out.append({"n": n, "mu": mu, "p0": float(p0), "dp0": float(dp0)})
    return out


if __name__ == "__main__":
    data = {"ratio_band": ratio_table(), "capbound": capbound(), "equator": equator_samples()}
    path = Path(__file__).with_name("oracles.json")
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path}: band [{data['ratio_band']['c']:.6f}, {data['ratio_band']['C']:.6f}], "
          f"capbound C = {data['capbound']['C_empirical']:.6f}")
