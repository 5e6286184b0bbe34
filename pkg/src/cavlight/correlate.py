"""Output-field correlation functions and the temporal-mode envelope.

The temporal mode is matched to the steady-state amplitude correlation of
the cavity field: f(t) is proportional to <a^dag(0) a(t)>_ss minus the
coherent background <a^dag><a>, truncated once its magnitude stays below a
relative threshold, and normalized so the mode obeys the bosonic
commutation relation (unit L2 norm on the grid).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, DegenerateEnvelopeError
from .lindblad import expect, make_engine, propagate_matrix
from .models import hamiltonian_fingerprint

DEFAULT_CUTOFF = 1e-3
SUSTAIN_SAMPLES = 5
CHUNK = 256
MAX_CHUNKS = 200


@dataclass
class TemporalEnvelope:
    """Sampled complex envelope f(t) on a uniform grid starting at 0."""

    t_grid: np.ndarray
    values: np.ndarray
    cutoff_threshold: float
    norm_check: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.t_grid.ndim != 1 or self.t_grid.shape != self.values.shape:
            raise ValueError("t_grid and values must be matching 1-d arrays")
        if np.any(np.diff(self.t_grid) <= 0):
            raise ValueError("t_grid must be strictly increasing")

    @property
    def dt(self):
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def duration(self):
        return float(self.t_grid[-1])

    def l2_norm(self):
        return float(np.trapezoid(np.abs(self.values) ** 2, self.t_grid))

    def cumulative_norm(self):
        """Running integral of |f|^2 from 0 to each grid point."""
        mag2 = np.abs(self.values) ** 2
        dt = np.diff(self.t_grid)
        out = np.zeros_like(self.t_grid)
        out[1:] = np.cumsum(0.5 * (mag2[1:] + mag2[:-1]) * dt)
        return out

    def content_hash(self):
        import hashlib

        h = hashlib.sha256()
        h.update(self.t_grid.tobytes())
        h.update(self.values.tobytes())
        return h.hexdigest()


def g1_correlation(model, rho_ss, a, t_grid, rtol=1e-8, atol=None,
                   method="adaptive", engine=None, h=None):
    """<a^dag(0) a(t)>_ss by the quantum regression theorem.

    Propagates the operator-weighted state rho_ss a^dag under the generator
    and traces against a at each requested time.
    """
    rho = rho_ss.matrix if hasattr(rho_ss, "matrix") else np.asarray(rho_ss)
    a_dense = a.dense() if hasattr(a, "dense") else np.asarray(a)
    x0 = rho @ a_dense.conj().T
    mats = propagate_matrix(model, x0, t_grid, rtol=rtol, atol=atol,
                            method=method, engine=engine, h=h)
    return np.array([expect(a, m) for m in mats])


def _default_dt(model):
    p = model.meta.get("params")
    rates = []
    if p is not None:
        rates = [abs(getattr(p, name, 0.0)) for name in
                 ("g", "kappa", "kappa_l", "gamma", "Delta", "E_drive",
                  "Omega", "lambda_minus", "lambda_plus", "omega0", "tau")]
    rates = [r for r in rates if r > 0]
    if not rates:
        raise ValueError("cannot infer dt for this model; pass dt explicitly")
    return 1.0 / (20.0 * max(rates))


def _find_cutoff(mag, threshold, sustain):
    """First index at which |f| stays below threshold*max for `sustain`
    consecutive samples (only past the global peak)."""
    peak = float(np.max(mag))
    if peak <= 0:
        return None
    below = mag < threshold * peak
    start = int(np.argmax(mag))
    run = 0
    for i in range(start, len(mag)):
        run = run + 1 if below[i] else 0
        if run >= sustain:
            return i - sustain + 1
    return None


def build_envelope(model, rho_ss, a, cutoff_threshold=DEFAULT_CUTOFF, dt=None,
                   t_max=None, rtol=1e-8, atol=None, method="adaptive",
                   h=None, sustain=SUSTAIN_SAMPLES):
    """Temporal-mode envelope from the incoherent part of the field
    correlation, cut off once it has decayed, and L2-normalized."""
    if not (0 < cutoff_threshold <= 0.1):
        raise ValueError("cutoff_threshold must lie in (0, 0.1]")
    if dt is None:
        dt = _default_dt(model)
    mean_a = expect(a, rho_ss)
    coherent_bg = abs(mean_a) ** 2

    engine = make_engine(model)
    rho = rho_ss.matrix if hasattr(rho_ss, "matrix") else np.asarray(rho_ss)
    a_dense = a.dense() if hasattr(a, "dense") else np.asarray(a)
    n_incoh = (expect(a.dag() @ a, rho_ss) - coherent_bg).real
    scale = max(abs(expect(a.dag() @ a, rho_ss).real), 1.0)
    if n_incoh < 1e-12 * scale:
        raise DegenerateEnvelopeError(
            "incoherent field correlation is numerically zero; "
            "no temporal mode can be extracted"
        )

    x = rho @ a_dense.conj().T
    samples = [complex(expect(a, x)) - coherent_bg]
    t_done = 0.0
    max_chunks = MAX_CHUNKS
    if t_max is not None:
        max_chunks = int(np.ceil(t_max / (CHUNK * dt)))
    cut = None
    for _chunk in range(max_chunks):
        seg = t_done + dt * np.arange(0, CHUNK + 1)
        mats = propagate_matrix(model, x, seg - t_done, rtol=rtol, atol=atol,
                                method=method, engine=engine, h=h)
        x = mats[-1]
        samples.extend(complex(expect(a, m)) - coherent_bg for m in mats[1:])
        t_done = seg[-1]
        mag = np.abs(np.array(samples))
        cut = _find_cutoff(mag, cutoff_threshold, sustain)
        if cut is not None:
            break
    if cut is None:
        raise ConvergenceError(
            f"correlation did not decay below {cutoff_threshold} x peak "
            f"within t = {t_done:.3g} us; raise t_max or the threshold"
        )

    values = np.array(samples[: cut + 1])
    t_grid = dt * np.arange(cut + 1)
    # global phase convention: f(0) real positive (it equals the incoherent
    # photon number, so this is automatic up to roundoff)
    phase = values[0] / abs(values[0])
    values = values / phase
    norm = np.trapezoid(np.abs(values) ** 2, t_grid)
    values = values / np.sqrt(norm)

    env = TemporalEnvelope(
        t_grid, values, cutoff_threshold,
        meta={
            "model_fingerprint": hamiltonian_fingerprint(model),
            "dt": dt,
            "cutoff_threshold": cutoff_threshold,
            "coherent_mean": complex(mean_a),
        },
    )
    env.norm_check = env.l2_norm()
    if abs(env.norm_check - 1.0) > 1e-6:
        raise ConvergenceError(
            f"envelope normalization check failed: {env.norm_check}"
        )
    return env
