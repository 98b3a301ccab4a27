"""Which form of the phase-density series is right?

Run:  python demos/03_two_readings_of_the_phase_series.py

Integrating the polar density over r term by term gives a series in
cot(theta) with a 1/sin^2(theta) prefactor and a sigma^p weight.  The
"printed" reading omits both.  Direct radial quadrature of the polar density
decides between them.  The series is geometric in cot^2(theta), so it is
only evaluated well inside |cot(theta)| < 1 (convergence slows
sharply as |cot| approaches 1).
"""
import math

from ris_stats.channel import ChannelParams
from ris_stats.pdfs import pdf_phase_numeric
from ris_stats.series import SeriesConfig, phase_series

params = ChannelParams(2, 1, 1, omega1=0.1, omega2=0.1)
print(f"{'theta':>6} {'marginal':>12} {'corrected':>12} {'printed':>12}")
for theta in (1.0, 1.2, 1.5, 2.0, 2.2, -1.2):
    ref = pdf_phase_numeric(theta, params)
    vals = [phase_series(theta, params, SeriesConfig(phase_reading=r)).value for r in ("corrected", "printed")]
    print(f"{theta:6.2f} {ref:12.9f} {vals[0]:12.9f} {vals[1]:12.9f}")
print(
    "\nThe corrected reading matches the marginalisation to ~1e-8; the printed one is off by the\n"
    f"missing 1/sin^2 factor (at theta=1.2 that factor is {1 / math.sin(1.2) ** 2:.4f})."
)
