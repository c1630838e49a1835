"""Deformation modes ``u = B x + C [x^2, xy, y^2]`` used as boundary data."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SAMPLING_HALF_WIDTH = 0.05
GENERATOR = "numpy.random.default_rng (PCG64)"


@dataclass(frozen=True, eq=False)
class DeformationMode:
    """Affine plus quadratic displacement mode.

    ``B`` is 2x2 (dimensionless), ``C`` is 2x3 (1/mm) acting on the monomials
    ``[x^2, x y, y^2]``.
    """

    B: np.ndarray
    C: np.ndarray = field(default_factory=lambda: np.zeros((2, 3)))
    label: str = ""
    seed: int | None = None

    def __post_init__(self):
        B = np.array(self.B, dtype=float).reshape(2, 2)
        C = np.array(self.C, dtype=float).reshape(2, 3)
        B.flags.writeable = False
        C.flags.writeable = False
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        if np.linalg.norm(B) + np.linalg.norm(C) == 0:
            raise ValueError("deformation mode is identically zero")

    @property
    def is_affine(self) -> bool:
        return not np.any(self.C)

    def scaled(self, s: float) -> "DeformationMode":
        return DeformationMode(s * self.B, s * self.C, self.label, self.seed)

    def to_dict(self) -> dict:
        return {"label": self.label, "seed": self.seed,
                "B": self.B.tolist(), "C": self.C.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "DeformationMode":
        return cls(d["B"], d.get("C", np.zeros((2, 3))), d.get("label", ""), d.get("seed"))

    def __eq__(self, other):
        if not isinstance(other, DeformationMode):
            return NotImplemented
        return np.array_equal(self.B, other.B) and np.array_equal(self.C, other.C)

    def __hash__(self):
        return hash((self.B.tobytes(), self.C.tobytes()))


def eval_mode(mode: DeformationMode, x) -> np.ndarray:
    """Displacement ``(npts, 2)`` (or ``(2,)`` for a single point)."""
    x = np.asarray(x, dtype=float)
    mono = np.stack([x[..., 0] ** 2, x[..., 0] * x[..., 1], x[..., 1] ** 2], axis=-1)
    return x @ mode.B.T + mono @ mode.C.T


def eval_mode_grad(mode: DeformationMode, x) -> np.ndarray:
    """Displacement gradient ``(npts, 2, 2)`` with ``[..., i, j] = du_i/dx_j``."""
    x = np.asarray(x, dtype=float)
    X, Y = x[..., 0], x[..., 1]
    # d[x^2, xy, y^2]/dx and /dy
    dmx = np.stack([2 * X, Y, np.zeros_like(X)], axis=-1)
    dmy = np.stack([np.zeros_like(X), X, 2 * Y], axis=-1)
    g = np.stack([dmx @ mode.C.T, dmy @ mode.C.T], axis=-1)
    return g + mode.B


def random_modes(count: int, seed: int, half_width: float = SAMPLING_HALF_WIDTH,
                 affine_only: bool = False) -> list[DeformationMode]:
    """``count`` modes with entries i.i.d. uniform on ``[-half_width, half_width]``.

    Per mode the stream yields B11, B12, B21, B22 and then C row-major
    (C11, C12, C13, C21, C22, C23). ``affine_only`` draws the same stream but
    zeroes C, so affine and quadratic sets share their B.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    draws = rng.uniform(-half_width, half_width, size=(count, 10))
    modes = []
    for k, row in enumerate(draws):
        C = np.zeros((2, 3)) if affine_only else row[4:]
        modes.append(DeformationMode(row[:4], C, f"random-{seed}-{k}", seed))
    return modes


CANONICAL_STRAINS = {
    "eps1": [[-0.02, 0.03], [0.03, 0.01]],
    "eps2": [[0.03, -0.01], [-0.01, 0.05]],
    "eps3": [[0.01, 0.01], [0.01, -0.01]],
    "eps4": [[0.01, 0.0], [0.0, 0.02]],
}


def canonical_modes() -> dict[str, DeformationMode]:
    """The four affine mean strains and four one-term validation modes."""
    modes = {k: DeformationMode(v, label=k) for k, v in CANONICAL_STRAINS.items()}
    a = 0.05
    modes["stretch_x"] = DeformationMode([[a, 0], [0, 0]], label="stretch_x")          # (0.05x, 0)
    modes["shear_y"] = DeformationMode([[0, a], [0, 0]], label="shear_y")              # (0.05y, 0)
    modes["bend_xy"] = DeformationMode(np.zeros((2, 2)), [[0, a, 0], [0, 0, 0]], label="bend_xy")
    modes["bend_xx"] = DeformationMode(np.zeros((2, 2)), [[0, 0, 0], [a, 0, 0]], label="bend_xx")
    return modes


def affine_canonical() -> list[DeformationMode]:
    m = canonical_modes()
    return [m[k] for k in CANONICAL_STRAINS]


def save_modes(modes, path: str | Path) -> None:
    payload = {"generator": GENERATOR, "modes": [m.to_dict() for m in modes]}
    Path(path).write_text(json.dumps(payload, indent=1))


def load_modes(path: str | Path) -> list[DeformationMode]:
    payload = json.loads(Path(path).read_text())
    return [DeformationMode.from_dict(d) for d in payload["modes"]]
