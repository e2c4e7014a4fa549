"""The four range-based volatility estimators on one synthetic ticker.

    python3 demos/estimators.py
"""

import numpy as np

from volts import volatility as hv
from volts.synthetic import planted_panel

panel = planted_panel(seed=1)
s = panel.series["MA"]

# one 21-bar window, then the rolling series
o, h, l, c = (x[-22:] for x in (s.open, s.high, s.low, s.close))
print("parkinson      ", hv.parkinson(h[1:], l[1:]))
print("garman_klass   ", hv.garman_klass(o[1:], h[1:], l[1:], c[1:]))
print("rogers_satchell", hv.rogers_satchell(o[1:], h[1:], l[1:], c[1:]))
parts = hv.yang_zhang_components(o, h, l, c)   # N+1 bars: the first supplies the prior close
print("yang_zhang     ", hv.yang_zhang(o, h, l, c), parts)

rolling = hv.all_estimators(s, 21)
mean = hv.mean_hv(s, 21, rolling)
for name, vs in rolling.items():
    print(f"{name:16s} median {np.median(vs.values):.5f}  annualised {np.median(hv.annualize(vs.values)):.3f}")
print(f"{'mean':16s} median {np.median(mean.values):.5f}  ({len(mean.values)} points from {mean.dates[0]})")
