import numpy as np
import pytest
from scipy.integrate import solve_ivp


def obe_g2(taus, gamma, rabi):
    """g2 of a resonantly driven two-level atom from the master equation.

    Independent of the closed form: integrate the Lindblad equation for the
    density matrix starting in the ground state (the state right after a
    detection) and divide the excited population by its steady-state value.
    """
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |g><e| in basis (g, e)
    sp = sm.conj().T
    H = 0.5 * rabi * (sm + sp)
    LdL = sp @ sm

    def rhs(_t, y):
        rho = (y[:4] + 1j * y[4:]).reshape(2, 2)
        d = -1j * (H @ rho - rho @ H) + gamma * (sm @ rho @ sp - 0.5 * (LdL @ rho + rho @ LdL))
        d = d.ravel()
        return np.concatenate([d.real, d.imag])

    y0 = np.zeros(8)
    y0[0] = 1.0
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    sol = solve_ivp(rhs, (0.0, taus.max()), y0, t_eval=taus, rtol=1e-11, atol=1e-13, method="DOP853")
    p_e = sol.y[3]
    p_ss = rabi**2 / (2 * rabi**2 + gamma**2)
    return p_e / p_ss


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def poisson_tags(rate, duration, rng):
    """Sorted unique homogeneous Poisson stamps in integer ps."""
    n = rng.poisson(rate * duration)
    t = np.sort(rng.integers(0, int(duration * 1e12), size=n, dtype=np.int64))
    return np.unique(t)


# acceptance lines, printed at the end of the session
ACCEPTANCE: list[tuple[str, bool, str]] = []


def report(label: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE.append((label, bool(ok), detail))
    return bool(ok)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {label}: {detail}")
