"""Parameter sets and source terms used by the studies and the test suite."""

# source terms of the convergence studies
F1 = "sin(x1)*cos(2*x2)"
F2 = "sin(x1)*cos(2*x2) + sin(5*x1)*cos(2*x2) + i*sin(5*x1)*cos(4*x2)"
F3 = "0.5*exp(-2*(x1^2 + x2^2))"
F4 = "-5*exp(-3*((x1 + 0.9)^2 + (x2 + 0.8)^2) + i*(2*x1 + x2))"
FORCINGS = {"f1": F1, "f2": F2, "f3": F3, "f4": F4}

# forcing of the attractor picture, sampled as written on [-pi, pi)^2 (so periodized)
ATTRACTOR_FORCING = "-5*(-(x1^2 + x2^2) + i*(2*x1 + x2))"
# the same data read as a centred Gaussian
CENTRED_GAUSSIAN = "-5*exp(-(x1^2 + x2^2) + i*(2*x1 + x2))"

BETA_COS = "cos(x1)"
BETA_MIXED = "cos(x1) + sin(x2)"
BETA_OBLIQUE = "cos(x1 - 2*x2) + sin(2*x2)"

# (r, beta) of the three spectral tests; omega0 = 0 throughout
TESTS = {
    1: (0.5, BETA_COS),
    2: (0.45, BETA_OBLIQUE),
    3: (0.55, BETA_OBLIQUE),
}
# viscosity ranges (high, low) and number of eigenvalues per test
SWEEP_RANGES = {1: (9.3e-3, 2.3e-3), 2: (1e-2, 3e-4), 3: (1e-2, 3e-4)}
SWEEP_M = {1: 8, 2: 7, 3: 7}


def named_forcing(text: str) -> str:
    """Map ``f1``..``f4`` to their expressions; anything else is returned unchanged."""
    return FORCINGS.get(text.strip(), text)
