"""Builders for the idealized driven cavity QED models.

Every builder returns a LindbladModel whose `meta` dict records the embedded
annihilation operator of the monitored cavity mode (`a`), its field decay
rate (`kappa`), and handy observables.  Factor ordering is atoms first, then
the system cavity; the capture stage appends its own factor last.

Frequencies are rad/us; the figure presets quote their parameters in
2*pi*MHz and convert on construction.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DimensionError
from .lindblad import LindbladModel
from .qcore import HilbertSpace, embed, fock_ops, mhz, spin_ops

DEFAULT_N_MAX = 15
DEFAULT_N_CAPTURE = 12
MAX_TC_ATOMS = 4


@dataclass(frozen=True)
class IdealModelParams:
    """Rates and strengths for the idealized models, all in rad/us.

    kappa is the monitored field decay rate; kappa_l an optional parasitic
    channel (total cavity decay kappa_T = kappa + kappa_l).
    """

    g: float = 0.0
    kappa: float = 0.0
    kappa_l: float = 0.0
    gamma: float = 0.0
    Delta: float = 0.0
    E_drive: float = 0.0
    Omega: float = 0.0
    lambda_minus: float = 0.0
    lambda_plus: float = 0.0
    omega0: float = 0.0
    tau: float = 0.0

    def __post_init__(self):
        for name in ("g", "kappa", "kappa_l", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @property
    def kappa_total(self):
        return self.kappa + self.kappa_l

    def cooperativity(self):
        if self.g > 0 and self.kappa_total > 0 and self.gamma > 0:
            return 2 * self.g**2 / (self.kappa_total * self.gamma)
        return np.inf


def _cavity_collapse(model_space, a_emb, p):
    cols = [np.sqrt(2 * p.kappa) * a_emb]
    if p.kappa_l > 0:
        cols.append(np.sqrt(2 * p.kappa_l) * a_emb)
    return cols


def jaynes_cummings(p, drive_target="cavity", n_max=DEFAULT_N_MAX):
    """Single two-level atom + driven cavity.

    H = Delta (a^dag a + sz) + g (a^dag sm + sp a) + drive, with the drive on
    the cavity (E (a + a^dag)) or the atom ((Omega/2)(sp + sm)).
    """
    if p.E_drive != 0 and p.Omega != 0:
        raise ConfigError("set exactly one of E_drive / Omega, not both")
    ops = spin_ops(0.5, "atom")
    a1, _ = fock_ops(n_max, "cavity")
    space = HilbertSpace((("atom", 2), ("cavity", n_max + 1)))
    a = embed(a1, space, "cavity")
    sz = embed(ops["Sz"], space, "atom")
    sm = embed(ops["Sm"], space, "atom")
    sp = embed(ops["Sp"], space, "atom")
    ad = a.dag()
    h = p.Delta * (ad @ a + sz) + p.g * (ad @ sm + sp @ a)
    if drive_target == "cavity":
        h = h + p.E_drive * (a + ad)
    elif drive_target == "atom":
        h = h + (p.Omega / 2.0) * (sp + sm)
    else:
        raise ConfigError(f"unknown drive_target {drive_target!r}")
    collapse = _cavity_collapse(space, a, p)
    if p.gamma > 0:
        collapse.append(np.sqrt(p.gamma) * sm)
    model = LindbladModel(space, h, collapse)
    model.meta.update(
        a=a, kappa=p.kappa, params=p, atom_excited=sp @ sm, kind="jaynes_cummings"
    )
    return model


def tavis_cummings_atoms(N, p, n_max=DEFAULT_N_MAX, max_atoms=MAX_TC_ATOMS):
    """N two-level atoms with identical coupling g/sqrt(N), cavity drive,
    independent-atom spontaneous emission."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N > max_atoms:
        raise DimensionError(f"N = {N} exceeds the configured atom budget {max_atoms}")
    factors = tuple((f"atom{i+1}", 2) for i in range(N)) + (("cavity", n_max + 1),)
    space = HilbertSpace(factors)
    a1, _ = fock_ops(n_max, "cavity")
    a = embed(a1, space, "cavity")
    ad = a.dag()
    half = spin_ops(0.5, "atom")
    sm_list, sp_list = [], []
    for i in range(N):
        lbl = f"atom{i+1}"
        sm_i = embed(spin_ops(0.5, lbl)["Sm"], space, lbl)
        sm_list.append(sm_i)
        sp_list.append(sm_i.dag())
    h = p.E_drive * (a + ad)
    for sm_i, sp_i in zip(sm_list, sp_list):
        h = h + (p.g / np.sqrt(N)) * (a @ sp_i + sm_i @ ad)
    collapse = _cavity_collapse(space, a, p)
    if p.gamma > 0:
        collapse.extend(np.sqrt(p.gamma) * sm_i for sm_i in sm_list)
    model = LindbladModel(space, h, collapse)
    model.meta.update(a=a, kappa=p.kappa, params=p, N=N, kind="tavis_cummings",
                      sm_list=sm_list)
    return model


def _spin_cavity_space(F, n_max):
    ops = spin_ops(F, "atom")
    dim = int(round(2 * F)) + 1
    space = HilbertSpace((("atom", dim), ("cavity", n_max + 1)))
    a1, _ = fock_ops(n_max, "cavity")
    a = embed(a1, space, "cavity")
    emb = {k: embed(v, space, "atom") for k, v in ops.items()}
    return space, a, emb


def driven_tcm_spin(F, p, n_max=DEFAULT_N_MAX):
    """Collective spin-F Tavis-Cummings model with coherent cavity driving:
    H = lambda_- (S+ a + a^dag S-) + E (a + a^dag); cavity decay only."""
    space, a, s = _spin_cavity_space(F, n_max)
    ad = a.dag()
    h = p.lambda_minus * (s["Sp"] @ a + ad @ s["Sm"]) + p.E_drive * (a + ad)
    model = LindbladModel(space, h, _cavity_collapse(space, a, p))
    model.meta.update(a=a, kappa=p.kappa, params=p, F=F, kind="driven_tcm")
    return model


def dicke(F, p, n_max=DEFAULT_N_MAX):
    """Imbalanced Dicke model:
    H = omega0 Sz + lambda_-(S+ a + a^dag S-) + lambda_+(a S- + S+ a^dag)."""
    if not (p.lambda_minus > p.lambda_plus >= 0):
        warnings.warn(
            "Dicke builder outside the photon-pair regime "
            "(expected lambda_- > lambda_+ >= 0)",
            stacklevel=2,
        )
    space, a, s = _spin_cavity_space(F, n_max)
    ad = a.dag()
    h = (
        p.omega0 * s["Sz"]
        + p.lambda_minus * (s["Sp"] @ a + ad @ s["Sm"])
        + p.lambda_plus * (a @ s["Sm"] + s["Sp"] @ ad)
    )
    model = LindbladModel(space, h, _cavity_collapse(space, a, p))
    model.meta.update(a=a, kappa=p.kappa, params=p, F=F, kind="dicke")
    return model


def two_step(F, p, n_max=DEFAULT_N_MAX):
    """Quadratic collective driving:
    H = lambda_-(S+ a + a^dag S-) + tau (S+^2 + S-^2)."""
    space, a, s = _spin_cavity_space(F, n_max)
    ad = a.dag()
    h = p.lambda_minus * (s["Sp"] @ a + ad @ s["Sm"]) + p.tau * (
        s["Sp"] @ s["Sp"] + s["Sm"] @ s["Sm"]
    )
    model = LindbladModel(space, h, _cavity_collapse(space, a, p))
    model.meta.update(a=a, kappa=p.kappa, params=p, F=F, kind="two_step")
    return model


def hamiltonian_fingerprint(model):
    """Deterministic digest of the static Hamiltonian terms and collapse
    operators; guards against silent formula edits in the builders."""
    h = hashlib.sha256()
    for op, fn in model.h_terms:
        if fn is not None:
            h.update(b"time-dependent-term")
            continue
        mat = np.round(op.dense(), 9)
        h.update(mat.tobytes())
    for terms in model.collapse_terms:
        for op, fn in terms:
            h.update(b"c")
            if fn is None:
                h.update(np.round(op.dense(), 9).tobytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# figure presets (caption parameters)
# ---------------------------------------------------------------------------

FIG5_GAMMA_RATIOS = (1 / 2500, 1 / 1000, 1 / 250, 1 / 10)


def _fig2a():
    g = mhz(100)
    p = IdealModelParams(g=g, kappa=mhz(200), gamma=mhz(6), Omega=0.75 * g)
    return dict(kind="jaynes_cummings", params=p, drive_target="atom")


def _fig2b():
    g = mhz(100)
    p = IdealModelParams(g=g, kappa=mhz(40), gamma=mhz(6), Omega=0.4 * g, Delta=g)
    return dict(kind="jaynes_cummings", params=p, drive_target="atom")


def _ideal_tla(kappa_l_fraction=0.0, gamma_ratio=0.0):
    # quasi-bad-cavity two-level endpoint: kappa_T = 2g, E = 0.75g
    g = mhz(100)
    kappa_T = 2 * g
    p = IdealModelParams(
        g=g,
        kappa=kappa_T * (1 - kappa_l_fraction),
        kappa_l=kappa_T * kappa_l_fraction,
        gamma=gamma_ratio * g,
        E_drive=0.75 * g,
    )
    return dict(kind="jaynes_cummings", params=p, drive_target="cavity")


def _fig5(N, gamma_idx):
    g = mhz(100)
    p = IdealModelParams(
        g=g,
        kappa=2 * g,
        gamma=FIG5_GAMMA_RATIOS[gamma_idx - 1] * g,
        E_drive=0.75 * N**0.25 * g,
    )
    return dict(kind="tavis_cummings", params=p, N=N)


def _fig6(F):
    lam = mhz(1)
    p = IdealModelParams(
        lambda_minus=lam,
        kappa=2 * np.sqrt(2 * F) * lam,
        E_drive=0.75 * (2 * F) ** 0.75 * lam,
    )
    return dict(kind="driven_tcm", params=p, F=F)


def _fig7(F):
    lam = mhz(1)
    p = IdealModelParams(
        lambda_minus=lam,
        lambda_plus=0.5 * lam,
        kappa=2 * np.sqrt(2 * F) * lam,
        omega0=0.4 * (2 * F) ** -0.5 * lam,
    )
    return dict(kind="dicke", params=p, F=F)


def _twostep(F):
    lam = mhz(1)
    p = IdealModelParams(
        lambda_minus=lam,
        kappa=2 * np.sqrt(2 * F) * lam,
        tau=0.15 * (2 * F) ** -0.5 * lam,
    )
    return dict(kind="two_step", params=p, F=F)


def _f_label(F):
    return str(F).replace(".5", "p5").replace(".0", "")


PRESETS = {}
PRESETS["fig2a"] = _fig2a
PRESETS["fig2b"] = _fig2b
PRESETS["ideal_tla"] = _ideal_tla
for _n in (1, 2, 4):
    for _k in range(1, 5):
        PRESETS[f"fig5_N{_n}_{_k}"] = (lambda n=_n, k=_k: _fig5(n, k))
for _f2 in range(2, 10):  # F = 1 ... 4.5 in steps of 1/2
    _F = _f2 / 2.0
    PRESETS[f"fig6_F{_f_label(_F)}"] = (lambda F=_F: _fig6(F))
for _Fi in (1, 2, 3, 4):
    PRESETS[f"fig7_F{_Fi}"] = (lambda F=_Fi: _fig7(F))
    PRESETS[f"twostep_F{_Fi}"] = (lambda F=_Fi: _twostep(F))


_BUILDERS = {
    "jaynes_cummings": lambda spec, n_max: jaynes_cummings(
        spec["params"], spec.get("drive_target", "cavity"), n_max=n_max
    ),
    "tavis_cummings": lambda spec, n_max: tavis_cummings_atoms(
        spec["N"], spec["params"], n_max=n_max
    ),
    "driven_tcm": lambda spec, n_max: driven_tcm_spin(
        spec["F"], spec["params"], n_max=n_max
    ),
    "dicke": lambda spec, n_max: dicke(spec["F"], spec["params"], n_max=n_max),
    "two_step": lambda spec, n_max: two_step(spec["F"], spec["params"], n_max=n_max),
}


def build_preset(name, n_max=None, **overrides):
    """Instantiate a named preset; overrides replace IdealModelParams fields."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}")
    spec = PRESETS[name]()
    if overrides:
        spec = dict(spec, params=replace(spec["params"], **overrides))
    n_max = DEFAULT_N_MAX if n_max is None else n_max
    model = _BUILDERS[spec["kind"]](spec, n_max)
    model.meta["preset"] = name
    return model
