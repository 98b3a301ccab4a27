"""When does the power series for the real-part density converge?

Run:  python demos/02_where_the_series_converges.py

The series expands exp(-(x - X)^2 / sigma^2) around the cascade amplitude X,
so its l-th block scales like E[X^(2l)] / (l! sigma^(2l)).  With a small
cascade scale (omega1 = omega2 = 0.1) that ratio decays and the series
reproduces direct quadrature to ~1e-9.  With unit spreads the moments grow
factorially, the alternating sum cancels catastrophically, and the
cancellation alarm refuses to return a number -- in both double and
34-digit arithmetic.  `method="auto"` then falls back to quadrature of the
same law.
"""
from ris_stats.channel import ChannelParams
from ris_stats.pdfs import pdf_real_point
from ris_stats.series import SeriesConfig, SeriesError, real_series

quadrature = SeriesConfig(method="quadrature")

for label, params in (
    ("small cascade scale", ChannelParams(2, 1, 1, omega1=0.1, omega2=0.1)),
    ("unit spreads", ChannelParams(5, 1, 1)),
):
    print(f"--- {label}: {params}")
    for mode in ("standard", "extended"):
        cfg = SeriesConfig(precision_mode=mode)
        for x in (0.0, 1.0, 2.0):
            ref = pdf_real_point(x, params, quadrature).value
            try:
                res = real_series(x, params, cfg)
                print(
                    f"  {mode:>8} x={x:3.1f}: series {res.value:.10f}  quadrature {ref:.10f}  "
                    f"terms {res.terms_used:4d}  tail {res.tail_estimate:.1e}"
                )
            except SeriesError as exc:
                print(
                    f"  {mode:>8} x={x:3.1f}: {type(exc).__name__} after {exc.blocks} blocks "
                    f"(condition {exc.condition:.2e}); quadrature {ref:.10f}"
                )
    auto = pdf_real_point(2.0, params)
    print(f"  auto at x=2: value {auto.value:.10f} via {auto.path}\n")
