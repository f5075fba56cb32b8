"""What the 0.5-40 Hz band-pass does, in numbers.

``python demos/filter_response.py`` prints the single-pass magnitude at a
few frequencies, the squared magnitude the forward-backward filter actually
applies, and the power removed from a three-tone test signal.
"""
import numpy as np

from ecgsynth.dsp import default_bandpass
from ecgsynth.validate import tone_power_change

bp = default_bandpass(500.0)
print("poles:", np.round(np.abs(np.roots(bp.a)), 5))
print(f"{'f (Hz)':>8} {'|H|':>9} {'|H|^2':>9}")
for f in (0.1, 0.5, 1.0, np.sqrt(20.0), 10.0, 40.0, 60.0, 100.0):
    h = abs(bp.response([f], 500.0)[0])
    print(f"{f:8.3f} {h:9.5f} {h * h:9.5f}")

print("\nthree-tone composite, fraction of power removed:")
for f, frac in tone_power_change((0.1, 10.0, 60.0)).items():
    print(f"  {f:5.1f} Hz  {frac:8.2%}")
