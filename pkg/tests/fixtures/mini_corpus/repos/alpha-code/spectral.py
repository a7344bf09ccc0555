"""Patch spectrum utilities for spectral patch mixing."""

import numpy as np


def encode_patch_spectrum(patch):
    """Magnitudes of the 2-D FFT of a patch, flattened.

    The zero-frequency bin equals the sum of the patch pixels.
    """
    spectrum = np.fft.fft2(np.asarray(patch, dtype=float))
    return np.abs(spectrum).ravel()


def mix_spectra(a, b, weight):
    """Convex blend of two encoded patch spectra."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return weight * a + (1.0 - weight) * b


def spectral_patch_mixing(patch_a, patch_b, weight):
    """Encode two patches and blend their spectra with one weight."""
    return mix_spectra(
        encode_patch_spectrum(patch_a),
        encode_patch_spectrum(patch_b),
        weight,
    )
