"""Energy densities and parameter sets of the continuum models.

Every density is a quadratic form ``W = 1/2 s^T H s`` in the pointwise state
vector ``s`` of the model's layout (see :mod:`rmmfit.fem.assembly`). Each
model therefore provides two independent descriptions: the Hessian ``H`` used
for assembly, and an explicit componentwise ``density`` used to integrate
the energy of a solution. Tests compare the two.

Index conventions: ``grad_u`` and ``P`` are flattened row-major as
``[11, 12, 21, 22]``; ``grad_P`` as ``[P11,1, P11,2, P12,1, P12,2, P21,1, ...]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import ClassVar

import numpy as np

from .geometry import INCLUSION, MATRIX, Mesh, UnitCellGeometry
from .materials import ConstraintError, CubicModuli, equivalent_shear, reuss_ce

A_TR = np.array([1.0, 0.0, 0.0, 1.0])
A_SH = np.array([0.0, 1.0, 1.0, 0.0])
A_SK = np.array([0.0, 1.0, -1.0, 0.0])
_DIAG = np.diag(A_TR)


class ParameterError(ValueError):
    """A model parameter is outside its admissible range."""


def cubic_hessian(c: CubicModuli) -> np.ndarray:
    """4x4 ``H`` with ``1/2 g^T H g = mu (g11^2 + g22^2) + mu*/2 (g12 + g21)^2 + lam/2 (g11 + g22)^2``."""
    return 2.0 * c.mu * _DIAG + c.mu_star * np.outer(A_SH, A_SH) + c.lam * np.outer(A_TR, A_TR)


def curvature_scale(mu_lc_sq: float, n_cells: float) -> float:
    return mu_lc_sq / float(n_cells) ** 2


# ---------------------------------------------------------------------------
# field states


@dataclass
class FieldState:
    """Pointwise fields, any leading batch shape.

    ``curl_P[..., r]`` is ``(Curl P)_{r3} = P_{r2,1} - P_{r1,2}``. For the
    Cosserat model ``A`` holds the scalar ``A12`` and ``grad_A`` its gradient.
    """

    grad_u: np.ndarray
    P: np.ndarray | None = None
    curl_P: np.ndarray | None = None
    grad_P: np.ndarray | None = None
    A: np.ndarray | None = None
    grad_A: np.ndarray | None = None

    @classmethod
    def from_vector(cls, layout: str, s: np.ndarray) -> "FieldState":
        s = np.asarray(s, dtype=float)
        lead = s.shape[:-1]
        g = s[..., :4].reshape(lead + (2, 2))
        if layout == "grad_u":
            return cls(g)
        if layout == "rmm":
            return cls(g, s[..., 4:8].reshape(lead + (2, 2)), s[..., 8:10])
        if layout == "cosserat":
            return cls(g, A=s[..., 4], grad_A=s[..., 5:7])
        if layout == "mm":
            P = s[..., 4:8].reshape(lead + (2, 2))
            gP = s[..., 8:16].reshape(lead + (2, 2, 2))
            curl = np.stack([gP[..., 0, 1, 0] - gP[..., 0, 0, 1],
                             gP[..., 1, 1, 0] - gP[..., 1, 0, 1]], axis=-1)
            return cls(g, P, curl, gP)
        raise ValueError(f"unknown layout {layout!r}")


def le_energy_terms(state_or_grad) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Parameter-free integrands ``(eps11^2 + eps22^2, 2 eps12^2, (eps11 + eps22)^2 / 2)``."""
    g = state_or_grad.grad_u if isinstance(state_or_grad, FieldState) else np.asarray(state_or_grad)
    e11, e22 = g[..., 0, 0], g[..., 1, 1]
    e12 = 0.5 * (g[..., 0, 1] + g[..., 1, 0])
    return e11 ** 2 + e22 ** 2, 2.0 * e12 ** 2, 0.5 * (e11 + e22) ** 2


def cubic_energy(c: CubicModuli, M: np.ndarray) -> np.ndarray:
    """``1/2 sym M : C : sym M`` for a cubic ``C``."""
    t1, t2, t3 = le_energy_terms(M)
    return c.mu * t1 + c.mu_star * t2 + c.lam * t3


def _skew12(M):
    return M[..., 0, 1] - M[..., 1, 0]


# ---------------------------------------------------------------------------
# parameter sets


class _Params:
    unknowns: ClassVar[tuple[str, ...]] = ()

    def vector(self) -> np.ndarray:
        return np.array([self._get(k) for k in self.unknowns], dtype=float)

    def with_vector(self, v, names=None):
        names = self.unknowns if names is None else names
        out = self
        for k, x in zip(names, np.asarray(v, dtype=float)):
            out = out._set(k, float(x))
        return out

    def _get(self, name):
        return getattr(self, name)

    def _set(self, name, value):
        return replace(self, **{name: value})

    def linear_constraints(self) -> list[tuple[str, np.ndarray, float]]:
        """Strict bounds ``a . theta > b`` in the space of ``unknowns``."""
        return []

    def violated(self) -> list[str]:
        th = self.vector()
        return [name for name, a, b in self.linear_constraints() if not a @ th > b]

    def is_admissible(self) -> bool:
        return not self.violated()

    def check(self):
        bad = self.violated()
        if bad:
            raise ConstraintError(f"inadmissible parameters: {bad}")
        return self


class _MicroMixin:
    """Unknowns ``mu_micro, mu_star_micro, lam_micro`` mapped onto ``micro``."""

    _MICRO = {"mu_micro": "mu", "mu_star_micro": "mu_star", "lam_micro": "lam"}

    def _get(self, name):
        if name in self._MICRO:
            return getattr(self.micro, self._MICRO[name])
        return getattr(self, name)

    def _set(self, name, value):
        if name in self._MICRO:
            return replace(self, micro=replace(self.micro, **{self._MICRO[name]: value}))
        return replace(self, **{name: value})

    def _micro_constraints(self):
        idx = {k: i for i, k in enumerate(self.unknowns)}
        n = len(self.unknowns)
        out = []

        def row(**coef):
            a = np.zeros(n)
            for k, c in coef.items():
                if k in idx:
                    a[idx[k]] = c
            return a

        m = self.macro
        out.append(("mu_micro > mu_macro", row(mu_micro=1.0), m.mu))
        out.append(("mu_star_micro > mu_star_macro", row(mu_star_micro=1.0), m.mu_star))
        out.append(("(lam+mu)_micro > (lam+mu)_macro", row(mu_micro=1.0, lam_micro=1.0), m.bulk_like))
        return out, row

    @property
    def c_e(self) -> CubicModuli:
        return reuss_ce(self.micro, self.macro)


@dataclass(frozen=True)
class LinearElasticParams(_Params):
    c: CubicModuli
    unknowns: ClassVar = ("mu", "mu_star", "lam")
    _MAP: ClassVar = {"mu": "mu", "mu_star": "mu_star", "lam": "lam"}

    def _get(self, name):
        return getattr(self.c, self._MAP[name])

    def _set(self, name, value):
        return replace(self, c=replace(self.c, **{self._MAP[name]: value}))

    def linear_constraints(self):
        return [("mu > 0", np.array([1.0, 0, 0]), 0.0),
                ("mu_star > 0", np.array([0, 1.0, 0]), 0.0),
                ("lam + mu > 0", np.array([1.0, 0, 1.0]), 0.0)]


@dataclass(frozen=True)
class HeterogeneousParams(_Params):
    geom: UnitCellGeometry


@dataclass(frozen=True)
class RMMParams(_MicroMixin, _Params):
    """Relaxed micromorphic parameters.

    ``mu_c`` is a rotational coupling on ``skew(grad u - P)``; it is zero for
    the relaxed model proper and only used to build the Cosserat proxy.
    """

    micro: CubicModuli
    macro: CubicModuli
    mu_lc_sq: float
    mu_c: float = 0.0
    unknowns: ClassVar = ("mu_micro", "mu_star_micro", "lam_micro", "mu_lc_sq")

    def linear_constraints(self):
        out, row = self._micro_constraints()
        out.append(("mu_lc_sq > 0", row(mu_lc_sq=1.0), 0.0))
        return out

    def length_scale(self) -> float:
        return float(np.sqrt(self.mu_lc_sq / equivalent_shear(self.macro)))


@dataclass(frozen=True)
class CosseratParams(_Params):
    macro: CubicModuli
    mu_c: float
    mu_lc_sq: float
    unknowns: ClassVar = ("mu_c", "mu_lc_sq")

    def linear_constraints(self):
        return [("mu_c > 0", np.array([1.0, 0.0]), 0.0),
                ("mu_lc_sq > 0", np.array([0.0, 1.0]), 0.0)]

    def length_scale(self) -> float:
        return float(np.sqrt(self.mu_lc_sq / equivalent_shear(self.macro)))


@dataclass(frozen=True)
class MicromorphicSimpleParams(_MicroMixin, _Params):
    micro: CubicModuli
    macro: CubicModuli
    mu_c: float
    mu_lc_sq: float
    unknowns: ClassVar = ("mu_micro", "mu_star_micro", "lam_micro", "mu_c", "mu_lc_sq")

    def linear_constraints(self):
        out, row = self._micro_constraints()
        out.append(("mu_c > 0", row(mu_c=1.0), 0.0))
        out.append(("mu_lc_sq > 0", row(mu_lc_sq=1.0), 0.0))
        return out

    def length_scale(self) -> float:
        return float(np.sqrt(self.mu_lc_sq / equivalent_shear(self.macro)))


@dataclass(frozen=True)
class MicromorphicIsoParams(_MicroMixin, _Params):
    """Isotropic-curvature micromorphic parameters; ``mu_lc_sq`` is frozen."""

    micro: CubicModuli
    macro: CubicModuli
    mu_c: float
    alpha1: float
    alpha2: float
    alpha3: float
    mu_lc_sq: float = field(default=None)
    unknowns: ClassVar = ("mu_micro", "mu_star_micro", "lam_micro", "mu_c", "alpha1", "alpha2", "alpha3")

    def __post_init__(self):
        if self.mu_lc_sq is None:
            # L_c = 1 mm
            object.__setattr__(self, "mu_lc_sq", equivalent_shear(self.macro))

    def linear_constraints(self):
        out, row = self._micro_constraints()
        out.append(("mu_c > 0", row(mu_c=1.0), 0.0))
        for k in ("alpha1", "alpha2", "alpha3"):
            out.append((f"{k} > 0", row(**{k: 1.0}), 0.0))
        return out

    def length_scale(self) -> float:
        return float(np.sqrt(self.mu_lc_sq / equivalent_shear(self.macro)))


# ---------------------------------------------------------------------------
# models


class ModelEnergy:
    """Base class: ``hessian`` for assembly, ``density`` for evaluation."""

    name: ClassVar[str] = ""
    layout: ClassVar[str] = "grad_u"
    p_kinds: ClassVar[tuple] = (None,)
    mesh_family: ClassVar[str] = "Q2"
    params_type: ClassVar[type] = _Params

    def validate(self, params) -> None:
        if not isinstance(params, self.params_type):
            raise ParameterError(f"{self.name} expects {self.params_type.__name__}")
        params.check()

    def hessian(self, params, n_cells: float) -> np.ndarray:
        raise NotImplementedError

    def element_hessians(self, params, n_cells: float, mesh: Mesh) -> np.ndarray:
        return self.hessian(params, n_cells)

    def density(self, params, state: FieldState, n_cells: float) -> np.ndarray:
        raise NotImplementedError

    def element_density(self, params, state: FieldState, n_cells: float, mesh: Mesh) -> np.ndarray:
        return self.density(params, state, n_cells)


class LinearElasticModel(ModelEnergy):
    name = "le"
    params_type = LinearElasticParams

    def validate(self, params):
        super().validate(params)
        if not params.c.is_positive_definite():
            raise ParameterError(f"stiffness not positive definite: {params.c}")

    def hessian(self, params, n_cells=1):
        return cubic_hessian(params.c)

    def density(self, params, state, n_cells=1):
        return cubic_energy(params.c, state.grad_u)


class HeterogeneousModel(ModelEnergy):
    """Isotropic linear elasticity with per-element matrix/inclusion moduli."""

    name = "het"
    mesh_family = "T2"
    params_type = HeterogeneousParams

    def _moduli(self, params, mesh):
        g = params.geom
        table = {MATRIX: g.matrix.as_cubic(), INCLUSION: g.inclusion.as_cubic()}
        return [table[int(m)] for m in mesh.material]

    def element_hessians(self, params, n_cells, mesh):
        H = {k: cubic_hessian(c) for k, c in
             ((MATRIX, params.geom.matrix.as_cubic()), (INCLUSION, params.geom.inclusion.as_cubic()))}
        return np.stack([H[int(m)] for m in mesh.material])

    def element_density(self, params, state, n_cells, mesh):
        t1, t2, t3 = le_energy_terms(state.grad_u)
        cs = self._moduli(params, mesh)
        mu = np.array([c.mu for c in cs])[:, None]
        ms = np.array([c.mu_star for c in cs])[:, None]
        lam = np.array([c.lam for c in cs])[:, None]
        return mu * t1 + ms * t2 + lam * t3


class RMMModel(ModelEnergy):
    name = "rmm"
    layout = "rmm"
    p_kinds = ("nedelec", "lagrange")
    params_type = RMMParams

    def validate(self, params):
        super().validate(params)
        if params.mu_c < 0:
            raise ParameterError("mu_c must be nonnegative")

    def hessian(self, params, n_cells):
        He = cubic_hessian(params.c_e)
        Hm = cubic_hessian(params.micro)
        H = np.zeros((10, 10))
        H[:4, :4] = He
        H[:4, 4:8] = -He
        H[4:8, :4] = -He
        H[4:8, 4:8] = He + Hm
        if params.mu_c:
            w = np.concatenate([A_SK, -A_SK])
            H[:8, :8] += params.mu_c * np.outer(w, w)
        H[8:, 8:] = curvature_scale(params.mu_lc_sq, n_cells) * np.eye(2)
        return H

    def density(self, params, state, n_cells):
        """Gap, micro and curvature groups of the relaxed energy (``C_c = 0``)."""
        g, P = state.grad_u, state.P
        ce, mi = params.c_e, params.micro
        gap = g - P
        W = (ce.mu * (gap[..., 0, 0] ** 2 + gap[..., 1, 1] ** 2)
             + 0.5 * ce.mu_star * (gap[..., 0, 1] + gap[..., 1, 0]) ** 2
             + 0.5 * ce.lam * (gap[..., 0, 0] + gap[..., 1, 1]) ** 2)
        W = W + (mi.mu * (P[..., 0, 0] ** 2 + P[..., 1, 1] ** 2)
                 + 0.5 * mi.mu_star * (P[..., 0, 1] + P[..., 1, 0]) ** 2
                 + 0.5 * mi.lam * (P[..., 0, 0] + P[..., 1, 1]) ** 2)
        if params.mu_c:
            W = W + 0.5 * params.mu_c * _skew12(gap) ** 2
        c = curvature_scale(params.mu_lc_sq, n_cells)
        return W + 0.5 * c * (state.curl_P[..., 0] ** 2 + state.curl_P[..., 1] ** 2)


class CosseratModel(ModelEnergy):
    """Cosserat limit with the single skew unknown ``A12``."""

    name = "cosserat"
    layout = "cosserat"
    p_kinds = ("scalar",)
    params_type = CosseratParams

    def hessian(self, params, n_cells):
        H = np.zeros((7, 7))
        H[:4, :4] = cubic_hessian(params.macro)
        w = np.array([0.0, 1.0, -1.0, 0.0, -2.0, 0.0, 0.0])
        H += params.mu_c * np.outer(w, w)
        H[5:, 5:] += curvature_scale(params.mu_lc_sq, n_cells) * np.eye(2)
        return H

    def density(self, params, state, n_cells):
        g = state.grad_u
        W = cubic_energy(params.macro, g)
        W = W + 0.5 * params.mu_c * (g[..., 0, 1] - g[..., 1, 0] - 2.0 * state.A) ** 2
        # (Curl A)_13 = A12,1 and (Curl A)_23 = A12,2 for skew A
        c = curvature_scale(params.mu_lc_sq, n_cells)
        return W + 0.5 * c * (state.grad_A[..., 0] ** 2 + state.grad_A[..., 1] ** 2)


def _mm_local_hessian(params) -> np.ndarray:
    He = cubic_hessian(params.c_e)
    H = np.zeros((16, 16))
    H[:4, :4] = He
    H[:4, 4:8] = -He
    H[4:8, :4] = -He
    H[4:8, 4:8] = He + cubic_hessian(params.micro)
    w = np.concatenate([A_SK, -A_SK])
    H[:8, :8] += params.mu_c * np.outer(w, w)
    return H


def _mm_local_density(params, state) -> np.ndarray:
    g, P = state.grad_u, state.P
    ce, mi = params.c_e, params.micro
    gap = g - P
    return (cubic_energy(ce, gap) + cubic_energy(mi, P)
            + 0.5 * params.mu_c * _skew12(gap) ** 2)


class MicromorphicSimpleModel(ModelEnergy):
    """Eringen-Mindlin micromorphic model with curvature ``mu L_c^2 |grad P|^2``."""

    name = "mm-simple"
    layout = "mm"
    p_kinds = ("lagrange",)
    params_type = MicromorphicSimpleParams

    def hessian(self, params, n_cells):
        H = _mm_local_hessian(params)
        H[8:, 8:] = curvature_scale(params.mu_lc_sq, n_cells) * np.eye(8)
        return H

    def density(self, params, state, n_cells):
        c = curvature_scale(params.mu_lc_sq, n_cells)
        gP = state.grad_P
        return _mm_local_density(params, state) + 0.5 * c * np.sum(gP ** 2, axis=(-3, -2, -1))


def iso_curvature_matrix(alpha1: float, alpha2: float, alpha3: float) -> np.ndarray:
    """4x4 ``Q`` with ``m^T Q m = a1 |dev sym M|^2 + a2 |skew M|^2 + 2/9 a3 tr^2 M``.

    ``M`` is a 2x2 block embedded in 3x3, so ``dev`` removes ``tr M / 3``
    from all three diagonal entries.
    """
    dev_sym = _DIAG + 0.5 * np.outer(A_SH, A_SH) - np.outer(A_TR, A_TR) / 3.0
    skew = 0.5 * np.outer(A_SK, A_SK)
    return alpha1 * dev_sym + alpha2 * skew + (2.0 / 9.0) * alpha3 * np.outer(A_TR, A_TR)


def micromorphic_iso_curvature(alpha1, alpha2, alpha3, grad_P) -> np.ndarray:
    """``sum_i a1 |dev sym P,i|^2 + a2 |skew P,i|^2 + 2/9 a3 tr^2(P,i)``.

    ``grad_P[..., a, b, i] = P_ab,i``.
    """
    gP = np.asarray(grad_P, dtype=float)
    out = 0.0
    eye3 = np.eye(3)
    for i in range(2):
        M = np.zeros(gP.shape[:-3] + (3, 3))
        M[..., :2, :2] = gP[..., :, :, i]
        tr = np.trace(M, axis1=-2, axis2=-1)
        sym = 0.5 * (M + np.swapaxes(M, -1, -2))
        dev = sym - tr[..., None, None] / 3.0 * eye3
        skw = 0.5 * (M - np.swapaxes(M, -1, -2))
        out = out + (alpha1 * np.sum(dev ** 2, axis=(-2, -1))
                     + alpha2 * np.sum(skw ** 2, axis=(-2, -1))
                     + (2.0 / 9.0) * alpha3 * tr ** 2)
    return out


class MicromorphicIsoModel(ModelEnergy):
    name = "mm-iso"
    layout = "mm"
    p_kinds = ("lagrange",)
    params_type = MicromorphicIsoParams

    def hessian(self, params, n_cells):
        H = _mm_local_hessian(params)
        Q = iso_curvature_matrix(params.alpha1, params.alpha2, params.alpha3)
        c = curvature_scale(params.mu_lc_sq, n_cells)
        # grad_P slot of P_ab,i is 8 + 2 * (2a + b) + i
        for i in range(2):
            idx = 8 + 2 * np.arange(4) + i
            H[np.ix_(idx, idx)] = c * Q
        return H

    def density(self, params, state, n_cells):
        c = curvature_scale(params.mu_lc_sq, n_cells)
        curv = micromorphic_iso_curvature(params.alpha1, params.alpha2, params.alpha3, state.grad_P)
        return _mm_local_density(params, state) + 0.5 * c * curv


MODELS = {m.name: m() for m in (LinearElasticModel, HeterogeneousModel, RMMModel, CosseratModel,
                                MicromorphicSimpleModel, MicromorphicIsoModel)}


def get_model(name: str) -> ModelEnergy:
    try:
        return MODELS[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def rmm_density(params: RMMParams, state: FieldState, n_cells: float) -> np.ndarray:
    return MODELS["rmm"].density(params, state, n_cells)


def cosserat_density(params: CosseratParams, state: FieldState, n_cells: float) -> np.ndarray:
    if not params.mu_c > 0:
        raise ParameterError("mu_c must be strictly positive for the Cosserat coupling")
    return MODELS["cosserat"].density(params, state, n_cells)


def micromorphic_simple_density(params: MicromorphicSimpleParams, state: FieldState,
                                n_cells: float) -> np.ndarray:
    return MODELS["mm-simple"].density(params, state, n_cells)


def micromorphic_iso_density(params: MicromorphicIsoParams, state: FieldState,
                             n_cells: float) -> np.ndarray:
    return MODELS["mm-iso"].density(params, state, n_cells)


PARAMS = {"le": LinearElasticParams, "rmm": RMMParams, "cosserat": CosseratParams,
          "mm-simple": MicromorphicSimpleParams, "mm-iso": MicromorphicIsoParams}
_TENSORS = ("c", "micro", "macro")


def params_to_dict(model: str, params) -> dict:
    """Flat description of a parameter set; moduli tensors as ``{mu, mu_star, lam}``."""
    if model not in PARAMS or not isinstance(params, PARAMS[model]):
        raise ParameterError(f"parameters do not belong to model {model!r}")
    out = {"model": model}
    for f in fields(params):
        v = getattr(params, f.name)
        out[f.name] = ({"mu": v.mu, "mu_star": v.mu_star, "lam": v.lam} if f.name in _TENSORS
                       else float(v))
    return out


def params_from_dict(d: dict):
    """Inverse of :func:`params_to_dict`; returns ``(model, params)``."""
    model = d["model"]
    if model not in PARAMS:
        raise ParameterError(f"no parameter set for model {model!r}")
    kw = {}
    for f in fields(PARAMS[model]):
        if f.name not in d:
            continue
        v = d[f.name]
        kw[f.name] = CubicModuli(float(v["mu"]), float(v["mu_star"]), float(v["lam"])) if f.name in _TENSORS \
            else float(v)
    return model, PARAMS[model](**kw)
