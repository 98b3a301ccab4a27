"""Evaluate the five densities of the composite channel at one parameter set.

Run:  python demos/01_densities_at_a_glance.py

The channel is h = sum_k |h1k||h2k| + h_d with N = 10 elements, Nakagami
shapes m1 = 2, m2 = 3 and unit spreads.  The script prints a few values of
each density, which evaluation path produced them, and the normalisation
audit.
"""
import math

import numpy as np

from ris_stats.channel import ChannelParams
from ris_stats.pdfs import curve, pdf_imag, pdf_joint, pdf_polar
from ris_stats.validation import normalization_audit

params = ChannelParams(n_elements=10, m1=2, m2=3)
print(f"parameters: {params}\n")

# The imaginary part is the direct link alone: a Gaussian with variance sigma_h^2 / 2.
print(f"f_imag(0) = {pdf_imag(0.0, params):.10f}  (1/sqrt(pi) = {1 / math.sqrt(math.pi):.10f})\n")

# The real part, envelope and phase go through `curve`, which records per point
# whether the power series or direct quadrature produced the value.
for which, grid in (
    ("real", np.linspace(0.0, 12.0, 7)),
    ("envelope", np.linspace(0.5, 12.0, 7)),
    ("phase", np.linspace(-3.0, 3.0, 7)),
):
    c = curve(which, grid, params)
    print(f"{which:>8}: " + "  ".join(f"{v:.4g}" for v in c.values))
    print(f"{'':>8}  paths: {sorted(set(c.paths))}")
    if c.notes and c.notes[0]:
        print(f"{'':>8}  why: {c.notes[0][:90]}...")

# Joint and polar densities are products / changes of variables of the above.
x, y = 6.0, 0.4
print(f"\nf_joint({x}, {y}) = {pdf_joint(x, y, params):.6g}")
r, t = math.hypot(x, y), math.atan2(y, x)
print(f"f_polar({r:.4f}, {t:.4f}) = {pdf_polar(r, t, params):.6g}  (= r * f_joint)")

audit = normalization_audit(params, points=401)
print("\nnormalisation audit (integral - 1):")
for which, entry in audit["integrals"].items():
    print(f"  {which:>8}: {entry['integral'] - 1:+.2e}  tolerance {entry['tolerance']:g}  passed={entry['passed']}")
