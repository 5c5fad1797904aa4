"""
Damped Bogoliubov modes
=======================

A small cosine ripple on the uniform condensate oscillates at the
Bogoliubov frequency and, with damping, decays.  The measured complex
frequency is compared with the closed-form branch.
"""
# %%
import math

import numpy as np

from gpe1d import ModelParams, analytic_dispersion, bogoliubov_frequency, measure_dispersion
from gpe1d.bogoliubov import DispersionConfig, sound_wave_estimate

G = 1e4
cfg = DispersionConfig(n_points=256)

print(f"{'lam':>5} {'m':>2} {'measured':>26} {'analytic':>26} {'long-wave estimate':>26}")
for lam in (0.0, 0.01):
    p = ModelParams(G, lam=lam)
    for m in (1, 2, 3):
        meas = measure_dispersion(m, p, cfg)
        ref = analytic_dispersion(meas.k, p)
        est = sound_wave_estimate(meas.k, G, lam)
        print(f"{lam:5} {m:2d} {meas.omega:26.6f} {ref.omega:26.6f} {est:26.6f}")

# %%
# The damping rate carries the interaction energy, -lam (k^2/2 + G n0),
# so it is far larger than the kinetic-only estimate at these k.
# For the very longest waves the branch is overdamped: Re(omega) = 0
# below k ~ lam sqrt(G n0).
for k in (0.2, 0.5, 1.0, 2.0, 2 * math.pi):
    w = analytic_dispersion(k, ModelParams(G, lam=0.01)).omega
    print(f"k = {k:7.3f}   Re w = {w.real:9.3f}   Im w = {w.imag:9.3f}"
          f"   undamped {bogoliubov_frequency(k, G):9.3f}")
