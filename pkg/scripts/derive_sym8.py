#!/usr/bin/env python3
"""Regenerate the Symmlet-8 scaling filter hardcoded in besovclass.wavelets.

Spectral factorization of the order-8 Daubechies product filter: factor
|m0(w)|^2 = cos^16(w/2) P(sin^2(w/2)) over the unit circle, then pick the
root selection with the flattest group delay (least-asymmetric choice).
Root selections come in conjugate-reciprocal groups; enumerating one pick
per group gives all valid real filters.

Run:  python scripts/derive_sym8.py
"""
import itertools

import numpy as np
from scipy.special import comb

N = 8          # vanishing moments
TAPS = 2 * N


def candidate_filters():
    # P(y) = sum_k C(N-1+k, k) y^k, degree N-1
    coeffs = np.array([comb(N - 1 + k, k, exact=True) for k in range(N)], dtype=float)
    roots_y = np.polynomial.Polynomial(coeffs).roots()
    # Newton-polish the roots for a cleaner factorization
    dcoeffs = np.polynomial.polynomial.polyder(coeffs)
    for _ in range(3):
        p = np.polynomial.polynomial.polyval(roots_y, coeffs)
        dp = np.polynomial.polynomial.polyval(roots_y, dcoeffs)
        roots_y = roots_y - p / dp

    # Each y-root maps to a reciprocal pair of z-roots via
    # y = (2 - z - 1/z)/4  <=>  z^2 - 2(1 - 2y) z + 1 = 0.
    pairs = []
    for y in roots_y:
        b = 1.0 - 2.0 * y
        s = np.sqrt(b * b - 1.0 + 0j)
        z1, z2 = b + s, b - s
        inside = z1 if abs(z1) < 1 else z2
        pairs.append(inside)

    # Group complex roots with their conjugates; each group contributes a
    # binary choice (keep the inside pair, or swap to the reciprocal pair).
    reals = [z for z in pairs if abs(z.imag) < 1e-10]
    complexes = [z for z in pairs if z.imag > 1e-10]  # one per conjugate pair

    filters = []
    for flips in itertools.product([False, True], repeat=len(complexes) + len(reals)):
        zs = []
        for flip, z in zip(flips[: len(reals)], reals):
            zr = z.real
            zs.append(1.0 / zr if flip else zr)
        for flip, z in zip(flips[len(reals):], complexes):
            zc = 1.0 / np.conj(z) if flip else z
            zs.extend([zc, np.conj(zc)])
        # m0(z) ~ ((1+z)/2)^N * prod (z - z_i); build coefficients
        poly = np.array([1.0 + 0j])
        for _ in range(N):
            poly = np.convolve(poly, [0.5, 0.5])
        for zi in zs:
            poly = np.convolve(poly, [-zi, 1.0])
        h = poly.real
        h *= np.sqrt(2.0) / h.sum()
        filters.append(h)
    return filters


def group_delay_flatness(h):
    w = np.linspace(0.0, 0.8 * np.pi, 512)
    n = np.arange(len(h))
    E = np.exp(-1j * np.outer(w, n))
    H = E @ h
    dH = E @ (-1j * n * h)
    tau = -np.imag(dH / H)
    weight = np.abs(H) ** 2
    center = (len(h) - 1) / 2.0
    return np.sum(weight * (tau - center) ** 2) / np.sum(weight)


def qmf_residual(h):
    r = abs(h.sum() - np.sqrt(2.0))
    for k in range(1, len(h) // 2):
        r = max(r, abs(np.dot(h[: len(h) - 2 * k], h[2 * k:]) - 0.0))
    r = max(r, abs(np.dot(h, h) - 1.0))
    return r


def main():
    cands = candidate_filters()
    scored = sorted(cands, key=lambda h: (group_delay_flatness(h), tuple(h)))
    h = scored[0]
    print("# Symmlet-8 scaling filter (least-asymmetric spectral factor)")
    print("SYM8_LO = (")
    for v in h:
        print(f"    {float(v)!r},")
    print(")")
    print(f"# peak tap         : {h.max():.6f} at index {h.argmax()}")
    print(f"# qmf residual     : {qmf_residual(h):.3e}")
    print(f"# delay flatness   : {group_delay_flatness(h):.6e}")


if __name__ == "__main__":
    main()
