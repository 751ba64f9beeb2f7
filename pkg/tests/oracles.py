"""Independent oracles used across the test suite.

Everything here deliberately re-derives results through a different route
than the library code: brute-force eigendecompositions, literal index
summations, numeric integration and differentiation, Monte-Carlo moments.
"""

import numpy as np

trapezoid = getattr(np, "trapezoid", None) or np.trapz


def eigengap_2x2(h: np.ndarray) -> float:
    """Numerical eigenvalue gap of a Hermitian 2x2 matrix."""
    vals = np.linalg.eigvalsh(h)
    return float(vals[1] - vals[0])


def rotate_index_sum(eps: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Literal 9-term tensor rotation eps'_kl = sum_ij R_ki R_lj eps_ij."""
    out = np.zeros((3, 3))
    for k in range(3):
        for l in range(3):
            acc = 0.0
            for i in range(3):
                for j in range(3):
                    acc += r[k, i] * r[l, j] * eps[i, j]
            out[k, l] = acc
    return out


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniform-ish random proper rotation via QR decomposition."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0.0:
        q[:, 0] = -q[:, 0]
    return q


def random_symmetric(rng: np.random.Generator, scale: float) -> np.ndarray:
    m = rng.uniform(-scale, scale, size=(3, 3))
    return 0.5 * (m + m.T)


def second_derivative(fn, x: float, h: float) -> float:
    """Central finite-difference second derivative."""
    return (fn(x + h) - 2.0 * fn(x) + fn(x - h)) / (h * h)


def fisher_center_sigma(detunings, center_ghz, fwhm_mhz, peak_rate, bg_rate,
                        dwell_s) -> float:
    """Cramer-Rao bound for the fitted line center of a Poisson-counted scan.

    I(c) = sum_i (d mu_i / d c)^2 / mu_i with mu_i the expected counts per
    point; the derivative is taken numerically.
    """
    x = np.asarray(detunings, dtype=float)
    w = fwhm_mhz / 1000.0

    def mu(c):
        return dwell_s * (peak_rate / (1.0 + (2.0 * (x - c) / w) ** 2) + bg_rate)

    h = w / 1000.0
    dmu = (mu(center_ghz + h) - mu(center_ghz - h)) / (2.0 * h)
    info = np.sum(dmu ** 2 / mu(center_ghz))
    return float(1.0 / np.sqrt(info))


def ou_jump_mc_std(tau_s, sigma_ghz, jump_rate_hz, jump_sigma_ghz, dt_s,
                   n_steps, seed) -> float:
    """Monte-Carlo stationary std of the OU-plus-jumps recurrence.

    Independent implementation: vectorized over a batch of walkers instead
    of stepping one chain through library code.
    """
    rng = np.random.default_rng(seed)
    decay = np.exp(-dt_s / tau_s)
    kick = sigma_ghz * np.sqrt(1.0 - decay * decay)
    x = 0.0
    burn = int(10 * tau_s / dt_s)
    samples = np.empty(n_steps)
    for i in range(burn + n_steps):
        x = x * decay + rng.normal(0.0, kick)
        n_j = rng.poisson(jump_rate_hz * dt_s)
        if n_j:
            x += np.sum(rng.normal(0.0, jump_sigma_ghz, n_j))
        if i >= burn:
            samples[i - burn] = x
    return float(np.std(samples))


def geometric_heat_steady_state(pulse, cooldown, tau) -> float:
    """Partial-sum evaluation of the heat recurrence (no closed form used).

    Iterates T <- (T + pulse) * exp(-(pulse+cooldown)/tau) until converged.
    """
    alpha = np.exp(-(pulse + cooldown) / tau)
    t = 0.0
    for _ in range(10000):
        t_next = (t + pulse) * alpha
        if abs(t_next - t) < 1e-15 * max(1.0, abs(t_next)):
            return t_next
        t = t_next
    return t
