"""Where does a delay-Doppler symbol end up after a doubly dispersive channel?

A single unit symbol is sent at one DD grid point through a two-path channel
with on-grid delays and Doppler shifts. The received DD grid shows one compact
echo per path, shifted by exactly the path's (delay, Doppler) offset. The same
symbol seen on the time-frequency grid is spread over every resource element.
"""

import numpy as np

from otfslink import FrameParams, demodulate, isfft, modulate, sfft
from otfslink.channel import ChannelRealization, PathTap, apply

p = FrameParams(M=32, N=16, delta_f=15e3, cp_len=8)
print(f"grid {p.M} delay x {p.N} Doppler bins, "
      f"resolution {p.delay_resolution * 1e6:.2f} us x {p.doppler_resolution:.1f} Hz")

# Two paths: direct (no Doppler) and an echo 3 delay bins / 2 Doppler bins away.
ch = ChannelRealization((
    PathTap(0.8, 0.0, 0.0),
    PathTap(0.6j, 3 * p.delay_resolution, 2 * p.doppler_resolution),
))

l0, k0 = 10, 5                                   # delay bin, Doppler bin
dd = np.zeros(p.shape, complex)
dd[l0, k0] = 1.0

tf = isfft(dd, p)
print(f"\nTF footprint: {np.count_nonzero(np.abs(tf) > 1e-9)} of {p.size} elements non-zero, "
      f"each with magnitude {np.abs(tf).max():.4f}")

rx = sfft(demodulate(apply(modulate(tf, p), ch), p), p)
power = np.abs(rx) ** 2
print(f"\nreceived DD energy {power.sum():.4f} (channel power {sum(abs(t.gain) ** 2 for t in ch.taps):.4f})")
print(f"{'delay':>6} {'Doppler':>8} {'|gain|':>8}")
for l, k in zip(*np.nonzero(power > 1e-6)):
    print(f"{l - l0:>+6d} {k - k0:>+8d} {np.abs(rx[l, k]):8.4f}")
