"""Binary dumps of sampled fields and phase screens ("OAMF" format).

Layout (little-endian, no padding): magic ``OAMF``, version u16, n u32,
window f64, wavelength f64, z f64, then the n*n row-major payload.  A
complex payload stores interleaved (re, im) f64 pairs; setting the
real-payload flag in the version word switches to plain f64 samples,
which is how phase screens are stored (wavelength then holds the screen's
reference wavelength and z the slab thickness).
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"OAMF"
VERSION = 1
REAL_PAYLOAD_FLAG = 0x0100

_HEADER = struct.Struct("<4sHIddd")


def _write(path, n, window, wavelength, z, payload, real_payload):
    version = VERSION | (REAL_PAYLOAD_FLAG if real_payload else 0)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, version, n, window, wavelength, z))
        fh.write(payload.astype("<f8").tobytes())


def _read(path):
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        magic, version, n, window, wavelength, z = _HEADER.unpack(header)
        if magic != MAGIC:
            raise ValueError(f"not an OAMF file: bad magic {magic!r}")
        if (version & 0xFF) != VERSION:
            raise ValueError(f"unsupported OAMF version {version & 0xFF}")
        real_payload = bool(version & REAL_PAYLOAD_FLAG)
        count = n * n * (1 if real_payload else 2)
        raw = np.frombuffer(fh.read(count * 8), dtype="<f8")
        if raw.size != count:
            raise ValueError("truncated OAMF payload")
    return n, window, wavelength, z, raw, real_payload


def write_field(path, field):
    """Dump a SampledField as a complex-payload OAMF file."""
    n = field.grid.n
    payload = np.empty((n, n, 2))
    payload[..., 0] = field.amplitude.real
    payload[..., 1] = field.amplitude.imag
    _write(path, n, field.grid.window, field.wavelength, field.z, payload, False)


def read_field(path):
    from .fields import GridSpec, SampledField

    n, window, wavelength, z, raw, real_payload = _read(path)
    if real_payload:
        raise ValueError("OAMF file holds a real payload, not a field")
    amp = raw.reshape(n, n, 2)
    return SampledField(
        grid=GridSpec(n=n, window=window),
        wavelength=wavelength,
        amplitude=amp[..., 0] + 1j * amp[..., 1],
        z=z,
    )


def write_screen(path, screen, reference_wavelength):
    """Dump a PhaseScreenBase as a real-payload OAMF file."""
    _write(
        path,
        screen.grid.n,
        screen.grid.window,
        reference_wavelength,
        screen.dz_slab,
        screen.values,
        True,
    )


def read_screen(path):
    from .fields import GridSpec
    from .turbulence import PhaseScreenBase

    n, window, wavelength, dz, raw, real_payload = _read(path)
    if not real_payload:
        raise ValueError("OAMF file holds a complex payload, not a screen")
    screen = PhaseScreenBase(
        grid=GridSpec(n=n, window=window),
        values=raw.reshape(n, n),
        dz_slab=dz,
    )
    return screen, wavelength


def complex_to_pairs(array):
    """Nest a complex array as [re, im] leaf pairs for JSON payloads."""
    array = np.asarray(array)
    stacked = np.stack([array.real, array.imag], axis=-1)
    return stacked.tolist()


def pairs_to_complex(data):
    """Inverse of `complex_to_pairs`."""
    arr = np.asarray(data, dtype=np.float64)
    return arr[..., 0] + 1j * arr[..., 1]
