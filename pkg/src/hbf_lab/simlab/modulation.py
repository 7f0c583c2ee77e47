"""Gray-mapped unit-energy QPSK."""

import numpy as np

from ..errors import HbfError

_SCALE = 1.0 / np.sqrt(2.0)


def qpsk_modulate(bits):
    """Map bit pairs to symbols: 00 -> (1+j)/sqrt2, 01 -> (1-j)/sqrt2,
    10 -> (-1+j)/sqrt2, 11 -> (-1-j)/sqrt2."""
    bits = np.asarray(bits, dtype=np.int8).ravel()
    if bits.size % 2:
        raise HbfError(f"got {bits.size} bits", code="odd-bits")
    pairs = bits.reshape(-1, 2)
    return _SCALE * ((1 - 2 * pairs[:, 0]) + 1j * (1 - 2 * pairs[:, 1]))


def qpsk_demodulate(symbols):
    """Hard decision per quadrant; a component exactly on an axis decides 0."""
    symbols = np.asarray(symbols).ravel()
    bits = np.empty((symbols.size, 2), dtype=np.int8)
    bits[:, 0] = symbols.real < 0
    bits[:, 1] = symbols.imag < 0
    return bits.ravel()
