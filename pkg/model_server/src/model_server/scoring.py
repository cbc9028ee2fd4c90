"""Bundled scoring functions.

``trig3`` is the analytic worked example shared with the client side: a
real-valued landscape on Z_4^3 built from three complex amplitudes plus
their conjugate partners, so integration tests know every coefficient in
closed form.  ``linear`` is the simplest possible wrapped model, handy for
loopback checks.

To wrap a real model, supply any callable ``seq -> float`` (with matching
q and n) to :class:`model_server.server.ServerConfig` instead.
"""

import cmath

TRIG3_Q = 4
TRIG3_N = 3

# frequency vector -> complex amplitude; conjugate partners included so the
# landscape is real
_TRIG3_COEFFS = {
    (0, 1, 0): 5 + 2j,
    (0, 3, 0): 5 - 2j,
    (1, 2, 0): -3 - 1j,
    (3, 2, 0): -3 + 1j,
    (1, 0, 3): 1 + 1j,
    (3, 0, 1): 1 - 1j,
}


def trig3(seq) -> float:
    """Six-term trigonometric landscape on Z_4^3."""
    total = 0j
    for freq, amp in _TRIG3_COEFFS.items():
        phase = sum(a * b for a, b in zip(seq, freq)) % TRIG3_Q
        total += amp * cmath.exp(2j * cmath.pi * phase / TRIG3_Q)
    return total.real


LINEAR_Q = 4
LINEAR_N = 8
_LINEAR_WEIGHTS = [0.25 * i - 1.0 for i in range(LINEAR_N)]


def linear(seq) -> float:
    """Weighted sum of the symbols; weights are 0.25*i - 1."""
    return sum(w * s for w, s in zip(_LINEAR_WEIGHTS, seq))


FIXTURES = {
    "trig3": (trig3, TRIG3_Q, TRIG3_N),
    "linear": (linear, LINEAR_Q, LINEAR_N),
}
