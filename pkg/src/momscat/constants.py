"""Free-space electromagnetic constants (SI units)."""

from scipy.constants import c as C0, epsilon_0 as EPS0, mu_0 as MU0

# free-space wave impedance, ~376.73 ohms
Z0 = (MU0 / EPS0) ** 0.5


def wavenumber(frequency_hz):
    """Free-space wavenumber k0 = 2*pi*f/c in 1/m."""
    from math import pi

    return 2.0 * pi * frequency_hz / C0


def wavelength(frequency_hz):
    """Free-space wavelength in m."""
    return C0 / frequency_hz
