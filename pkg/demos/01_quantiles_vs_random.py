"""Uniform quantiles versus random draws from an EMOS predictive distribution.

Fit EMOS on 30 days of a synthetic station, then compare the CRPS of an
ensemble built from equally spaced quantiles with one drawn at random.
"""
import numpy as np

from cobase import SyntheticConfig, generate_synthetic, fit_emos, predict_margin, gaussian_crps
from cobase import uniform_quantiles, random_sample, crps_ensemble

archive = generate_synthetic(SyntheticConfig(n_stations=1, n_days=400, seed=3))
m = archive.forecasts.mean(axis=1)[:, 0]
s2 = archive.forecasts.var(axis=1, ddof=1)[:, 0]
y = archive.observations[:, 0]

# the raw ensemble is biased by +1 and too narrow
raw = [crps_ensemble(archive.forecasts[t, :, 0], y[t]) for t in range(len(y))]
print(f"raw ensemble CRPS       {np.mean(raw):.4f}")

crps_q, crps_r, crps_exact = [], [], []
for t in range(31, len(y)):
    coeffs = fit_emos(m[t - 30:t], s2[t - 30:t], y[t - 30:t])
    margin = predict_margin(coeffs, m[t], s2[t])
    crps_exact.append(gaussian_crps(margin, y[t]))
    crps_q.append(crps_ensemble(uniform_quantiles(margin, 17).values, y[t]))
    crps_r.append(crps_ensemble(random_sample(margin, 17, seed=t).values, y[t]))

print(f"EMOS, closed form       {np.mean(crps_exact):.4f}")
print(f"EMOS, 17 quantiles      {np.mean(crps_q):.4f}")
print(f"EMOS, 17 random draws   {np.mean(crps_r):.4f}")

# random draws add sampling noise on top of the predictive distribution,
# quantiles reproduce it as closely as 17 points allow
coeffs = fit_emos(m[-30:], s2[-30:], y[-30:])
print("last window coefficients:", coeffs)
