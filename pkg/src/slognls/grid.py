"""Periodic lattice geometry, lattice fields and the spectral transform.

Transform convention (fixed repo-wide)
--------------------------------------
The box is ``[-L/2, L/2)^d`` sampled at ``x_j = -L/2 + j h`` with ``h = L/N``.
The forward transform approximates the continuum Fourier integral::

    f_hat(k) = h^d * sum_j f(x_j) exp(-i k . (x_j - x_0))

and the inverse is the matching Fourier series::

    f(x_j) = L^-d * sum_k f_hat(k) exp(i k . (x_j - x_0))

so that Parseval reads ``sum |f|^2 h^d == L^-d sum |f_hat|^2``. The phase
reference ``x_0`` is the first lattice point; every operator used in the
package is a Fourier multiplier, so this phase never enters a result.
Arrays are stored with shape ``(N,)*d`` in C (row-major) order, the
frequency axis in numpy FFT ordering.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ParameterError, StructuralError

_WORKERS = 1


def set_threads(n: int) -> None:
    """Set the FFT worker count used by all transforms."""
    global _WORKERS
    if n < 1:
        raise ParameterError("thread count must be >= 1")
    _WORKERS = int(n)


@dataclass(frozen=True)
class GridSpec:
    d: int
    N: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ParameterError(f"dimension d must be 1 or 2, got {self.d}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ParameterError(f"N must be a power of two >= 8, got {self.N}")
        if not self.L > 0:
            raise ParameterError(f"box length L must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def cell(self) -> float:
        """Lattice cell volume h^d."""
        return self.h**self.d

    @property
    def volume(self) -> float:
        return self.L**self.d

    @property
    def k_unit(self) -> float:
        """Box frequency unit 2 pi / L."""
        return 2 * np.pi / self.L

    @property
    def nyquist(self) -> float:
        return np.pi / self.h

    def axis(self) -> np.ndarray:
        return -self.L / 2 + self.h * np.arange(self.N)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays, one per axis."""
        x = self.axis()
        return [x.reshape([-1 if i == j else 1 for j in range(self.d)]) for i in range(self.d)]

    def radius2(self) -> np.ndarray:
        return sum(c**2 for c in self.coords()) * np.ones(self.shape)

    def k_axis(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.N, d=self.h)

    def wavenumbers(self) -> list[np.ndarray]:
        k = self.k_axis()
        return [k.reshape([-1 if i == j else 1 for j in range(self.d)]) for i in range(self.d)]

    def derivative_wavenumbers(self) -> list[np.ndarray]:
        """Wavenumbers for first derivatives, Nyquist entry zeroed so real fields stay real."""
        k = self.k_axis().copy()
        k[self.N // 2] = 0.0
        return [k.reshape([-1 if i == j else 1 for j in range(self.d)]) for i in range(self.d)]

    def k2(self) -> np.ndarray:
        return sum(k**2 for k in self.wavenumbers()) * np.ones(self.shape)

    def to_dict(self) -> dict:
        return {"d": self.d, "N": self.N, "L": self.L}


@dataclass(frozen=True)
class Field:
    """Values of a lattice function together with its grid and domain tag."""

    spec: GridSpec
    values: np.ndarray = field(repr=False)
    tag: str = "physical"

    def __post_init__(self):
        if self.tag not in ("physical", "spectral"):
            raise StructuralError(f"unknown domain tag {self.tag!r}")
        arr = np.asarray(self.values)
        if arr.size != self.spec.size:
            raise StructuralError(
                f"field has {arr.size} values, grid {self.spec.shape} needs {self.spec.size}"
            )
        if arr.shape != self.spec.shape:
            arr = arr.reshape(self.spec.shape)
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.float64, copy=False)
        else:
            arr = arr.astype(np.complex128, copy=False)
        arr = arr.view()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def require(self, tag: str) -> "Field":
        if self.tag != tag:
            raise StructuralError(f"expected a {tag} field, got {self.tag}")
        return self

    def real(self, rtol: float = 1e-12) -> "Field":
        """Real-tagged copy; raises if the imaginary part is not negligible."""
        if self.is_real:
            return self
        scale = np.max(np.abs(self.values)) if self.values.size else 0.0
        if np.max(np.abs(self.values.imag)) > rtol * max(scale, 1e-300):
            raise StructuralError("field has a non-negligible imaginary part")
        return Field(self.spec, self.values.real.copy(), self.tag)


def forward(spec: GridSpec, a: np.ndarray) -> np.ndarray:
    return sfft.fftn(a, workers=_WORKERS) * spec.cell


def inverse(spec: GridSpec, a: np.ndarray) -> np.ndarray:
    return sfft.ifftn(a, workers=_WORKERS) / spec.cell


def multiply(spec: GridSpec, a: np.ndarray, symbol, real_output: bool | None = None) -> np.ndarray:
    """Apply the Fourier multiplier ``symbol(k)`` to a physical-space array."""
    out = sfft.ifftn(sfft.fftn(a, workers=_WORKERS) * symbol, workers=_WORKERS)
    if real_output is None:
        real_output = not np.iscomplexobj(a) and not np.iscomplexobj(symbol)
    return out.real if real_output else out


def to_spectral(f: Field) -> Field:
    f.require("physical")
    return Field(f.spec, forward(f.spec, f.values), "spectral")


def to_physical(F: Field, real: bool = False) -> Field:
    F.require("spectral")
    out = inverse(F.spec, F.values)
    return Field(F.spec, out, "physical").real(1e-10) if real else Field(F.spec, out, "physical")


def gradient(f: Field) -> list[Field]:
    """Spectral gradient; component j is F^-1(i k_j F f)."""
    f.require("physical")
    spec = f.spec
    fh = sfft.fftn(f.values, workers=_WORKERS)
    out = []
    for kj in spec.derivative_wavenumbers():
        g = sfft.ifftn(1j * kj * fh, workers=_WORKERS)
        out.append(Field(spec, g.real if f.is_real else g))
    return out


def laplacian(f: Field) -> Field:
    f.require("physical")
    return Field(f.spec, multiply(f.spec, f.values, -f.spec.k2()))


def weight_samples(spec: GridSpec, mu: float) -> Field:
    """Lattice samples of <x>^mu = (1 + |x|^2)^(mu/2)."""
    return Field(spec, (1.0 + spec.radius2()) ** (mu / 2))


def integrate(spec: GridSpec, a) -> float:
    """Riemann sum of a lattice density."""
    return float(np.sum(a) * spec.cell)


def restrict(values: np.ndarray, fine: GridSpec, coarse: GridSpec) -> np.ndarray:
    """Spectral restriction of a real fine-grid array onto a coarser grid of the same box.

    Fourier coefficients are matched in the continuum normalization, so the
    coarse field is the band-limited projection of the fine one.
    """
    if fine.d != coarse.d or fine.L != coarse.L or coarse.N > fine.N:
        raise ParameterError("restriction needs the same box and a coarser or equal N")
    fh = forward(fine, values)
    idx = np.fft.fftfreq(coarse.N, d=1.0 / coarse.N).astype(int)
    sel = np.ix_(*([idx % fine.N] * fine.d))
    ch = fh[sel]
    out = inverse(coarse, ch)
    return out.real if not np.iscomplexobj(values) else out


# -- binary dumps ------------------------------------------------------------


def save_field(path, f: Field, description: str = "", seed=None) -> list[Path]:
    """Write ``path`` (raw little-endian c128, row-major) and ``path.json`` sidecar."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.ascontiguousarray(f.values, dtype="<c16")
    path.write_bytes(data.tobytes(order="C"))
    meta = {
        "d": f.spec.d,
        "N": f.spec.N,
        "L": f.spec.L,
        "tag": f.tag,
        "dtype": "c128",
        "description": description,
    }
    if seed is not None:
        meta["seed"] = int(seed)
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return [path, side]


def load_field(path) -> Field:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    if meta.get("dtype") != "c128":
        raise StructuralError(f"unsupported dtype {meta.get('dtype')!r}")
    spec = GridSpec(meta["d"], meta["N"], float(meta["L"]))
    raw = np.frombuffer(path.read_bytes(), dtype="<c16")
    if raw.size != spec.size:
        raise StructuralError(f"{path} holds {raw.size} values, sidecar says {spec.size}")
    return Field(spec, raw.reshape(spec.shape).astype(np.complex128), meta["tag"])
