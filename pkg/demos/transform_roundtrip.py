"""Decompose a trivariate test signal and verify the transform is lossless."""

import numpy as np

from mvdenoise import dwt_forward, dwt_inverse, get_filter, make_signal

signal = make_signal("heavydoppler3", 2048)
filt = get_filter("db8")

dec = dwt_forward(signal.channels, filt, levels=5)
print("scale  block shape")
for k, d in enumerate(dec.details, start=1):
    print(f"  {k}    {d.shape}")
print(f"  approx {dec.approx.shape}")

recon = dwt_inverse(dec)
err = np.abs(recon - signal.channels).max()
print(f"\nmax reconstruction error: {err:.3e}")

energy_in = (signal.channels**2).sum()
energy_coeff = sum((d**2).sum() for d in dec.details) + (dec.approx**2).sum()
print(f"energy ratio (coefficients / signal): {energy_coeff / energy_in:.12f}")
