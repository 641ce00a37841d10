"""Updating laws and the closed-loop iteration engine.

Five laws share the pattern "observe, correct the input, repeat":

* ``p_type``            - plain error feedback ``U + K E``
* ``eso_full_state``    - observer estimates only, ``U + K E^ + H D^``
* ``eso_mixed``         - measured error plus disturbance estimate,
                          ``U + K E + H D^``
* ``eso_robust``        - nominal-model observer of the aggregated
                          disturbance, ``U + K (E + Hbar D^)``
* ``eso_model_free``    - the same loop driven by a constructed
                          full-row-rank surrogate instead of any model

The engine owns the true plant only to generate data and ground-truth
diagnostics; the controllers see nothing beyond what their law allows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matanalysis import as_matrix
from .observer import ObserverGain, ObserverState, build_extended, eso_step
from .plant import DiffStats, TransferPlant, UncertaintyModel, generate_N

__all__ = [
    "LAW_MODES",
    "GainSet",
    "LearningLaw",
    "SimulationConfig",
    "IterationTrace",
    "StabilityProfile",
    "synth_H_pseudo",
    "synth_Hbar",
    "run",
    "estimate_stability_profile",
    "trace_to_csv",
    "write_trace_csv",
    "read_trace_csv",
    "TRACE_CSV_HEADER",
]

LAW_MODES = ("p_type", "eso_full_state", "eso_mixed", "eso_robust", "eso_model_free")

#: Input magnitude beyond which a run is declared divergent.
DIVERGENCE_CAP = 1e12

TRACE_CSV_HEADER = "k,err_inf,err_2,u_norm,ubar_norm,obs_err_norm,diverged"


def synth_H_pseudo(P) -> np.ndarray:
    """Right pseudo-inverse compensation gain ``P^T (P P^T)^-1``.

    Requires full row rank; the result satisfies ``P @ H = I`` so the
    disturbance estimate is cancelled exactly in the error recursion.
    """
    P = as_matrix(P, "P")
    sv = np.linalg.svd(P, compute_uv=False)
    if sv.size < P.shape[0] or sv[P.shape[0] - 1] <= 1e-10 * sv[0]:
        raise ValueError("P must have full row rank for the pseudo-inverse gain")
    return np.linalg.solve(P @ P.T, P).T


def synth_Hbar(P_used, K) -> np.ndarray:
    """Compensation gain ``(P_used @ K)^-1`` for the aggregated laws."""
    P_used = as_matrix(P_used, "P_used")
    K = as_matrix(K, "K")
    M = P_used @ K
    if M.shape[0] != M.shape[1]:
        raise ValueError("P_used @ K must be square")
    sv = np.linalg.svd(M, compute_uv=False)
    if sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise ValueError("P_used @ K is singular; cannot form its inverse")
    return np.linalg.inv(M)


@dataclass
class GainSet:
    """Learning gain plus optional compensation and observer gains.

    When both ``H`` and ``Hbar`` are supplied they must be consistent,
    ``H = K @ Hbar``, since the aggregated laws only ever apply ``H``
    through that factorization.
    """

    K: np.ndarray
    H: np.ndarray | None = None
    Hbar: np.ndarray | None = None
    observer: ObserverGain | None = None

    def __post_init__(self):
        self.K = as_matrix(self.K, "K")
        if self.H is not None:
            self.H = as_matrix(self.H, "H")
            if self.H.shape != (self.K.shape[0], self.K.shape[1]):
                raise ValueError("H must have the same shape as K")
        if self.Hbar is not None:
            self.Hbar = as_matrix(self.Hbar, "Hbar")
            p = self.K.shape[1]
            if self.Hbar.shape != (p, p):
                raise ValueError("Hbar must be square with the error dimension")
        if self.H is not None and self.Hbar is not None:
            resid = np.abs(self.H - self.K @ self.Hbar).max()
            scale = max(1.0, np.abs(self.H).max())
            if resid > 1e-10 * scale:
                raise ValueError("inconsistent gains: H must equal K @ Hbar")


@dataclass
class LearningLaw:
    """Updating-law selector; ``eso_model_free`` carries its surrogate map."""

    mode: str
    surrogate: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in LAW_MODES:
            raise ValueError(f"unknown law mode {self.mode!r}; expected one of {LAW_MODES}")
        if self.mode == "eso_model_free":
            if self.surrogate is None:
                raise ValueError("eso_model_free requires a surrogate map")
            self.surrogate = as_matrix(self.surrogate, "surrogate")
            sv = np.linalg.svd(self.surrogate, compute_uv=False)
            rows = self.surrogate.shape[0]
            if sv.size < rows or sv[rows - 1] <= 1e-10 * max(1.0, sv[0]):
                raise ValueError("surrogate must have full row rank")
        elif self.surrogate is not None:
            raise ValueError("surrogate is only meaningful for eso_model_free")


@dataclass
class SimulationConfig:
    """Everything one closed-loop run needs, fixed up front."""

    plant: TransferPlant
    target: np.ndarray
    uncertainty: UncertaintyModel
    gains: GainSet
    law: LearningLaw
    iterations: int
    u0: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        p, m = self.plant.shape
        self.target = np.asarray(self.target, dtype=float).reshape(-1)
        if self.target.shape != (p,):
            raise ValueError(f"target must have length {p}")
        if self.uncertainty.dimension != p:
            raise ValueError("uncertainty dimension must match the plant output")
        if self.iterations < 1:
            raise ValueError("iterations must be at least 1")
        if self.gains.K.shape != (m, p):
            raise ValueError(f"K must be {m}x{p} for this plant")
        if self.u0 is not None:
            self.u0 = np.asarray(self.u0, dtype=float).reshape(-1)
            if self.u0.shape != (m,):
                raise ValueError(f"u0 must have length {m}")
        mode = self.law.mode
        if mode != "p_type" and self.gains.observer is None:
            raise ValueError(f"{mode} requires observer gains")
        if mode in ("eso_full_state", "eso_mixed") and self.gains.H is None:
            raise ValueError(f"{mode} requires the compensation gain H")
        if mode in ("eso_robust", "eso_model_free") and self.gains.Hbar is None:
            raise ValueError(f"{mode} requires the compensation gain Hbar")
        if mode == "eso_model_free" and self.law.surrogate.shape != (p, m):
            raise ValueError("surrogate shape must match the plant")


@dataclass
class IterationTrace:
    """Per-iteration record of a closed-loop run.

    ``y = P u + N`` and ``e = target - y`` hold exactly at every recorded
    iteration, and ``ubar_k = -(u_{k+1} - u_k)`` for consecutive rows.
    ``d_true`` is the harness-side ground truth of whatever disturbance
    aggregate the law's observer estimates (absent for ``p_type``), used
    for diagnostics only.
    """

    mode: str
    u: np.ndarray
    y: np.ndarray
    e: np.ndarray
    ubar: np.ndarray
    e_hat: np.ndarray | None
    d_hat: np.ndarray | None
    d_true: np.ndarray | None
    err_inf: np.ndarray
    err_2: np.ndarray
    u_norm: np.ndarray
    ubar_norm: np.ndarray
    obs_err_norm: np.ndarray
    diverged: bool
    diverged_at: int | None

    def __len__(self) -> int:
        return self.err_inf.shape[0]


def _inf_norm(v: np.ndarray) -> float:
    return float(np.abs(v).max()) if v.size else 0.0


def run(config: SimulationConfig) -> IterationTrace:
    """Iterate the closed loop and record the trace.

    Each iteration observes ``Y_k = P U_k + N_k``, forms the tracking
    error, computes the law's input correction from the current observer
    state, then advances the observer with that correction and the
    measured error.  A run is truncated and flagged once the input leaves
    the divergence cap.
    """
    plant = config.plant
    P = plant.full()
    p, m = P.shape
    mode = config.law.mode
    gains = config.gains
    model = config.uncertainty.with_seed(config.seed)

    uses_observer = mode != "p_type"
    if uses_observer:
        if mode in ("eso_full_state", "eso_mixed"):
            P_used = P
            delta_for_truth = None
        elif mode == "eso_robust":
            P_used = plant.nominal
            delta_for_truth = plant.delta
        else:  # eso_model_free
            P_used = config.law.surrogate
            delta_for_truth = P - config.law.surrogate
        es = build_extended(p, P_used)
        state = ObserverState.zero(p)

    U = np.zeros(m) if config.u0 is None else config.u0.copy()

    u_rows, y_rows, e_rows, ubar_rows = [], [], [], []
    eh_rows, dh_rows, dt_rows = [], [], []
    diverged = False
    diverged_at = None

    N_next = generate_N(model, 0)
    for k in range(config.iterations):
        N_k = N_next
        N_next = generate_N(model, k + 1)
        Y = P @ U + N_k
        E = config.target - Y

        if mode == "p_type":
            ubar = -gains.K @ E
        elif mode == "eso_full_state":
            ubar = -gains.K @ state.e_hat - gains.H @ state.d_hat
        elif mode == "eso_mixed":
            ubar = -gains.K @ E - gains.H @ state.d_hat
        else:  # eso_robust, eso_model_free
            ubar = -gains.K @ (E + gains.Hbar @ state.d_hat)

        # ground-truth disturbance aggregate seen by this law's observer
        D_k = N_k - N_next
        if uses_observer:
            d_true = D_k if delta_for_truth is None else D_k + delta_for_truth @ ubar
            eh_rows.append(state.e_hat.copy())
            dh_rows.append(state.d_hat.copy())
            dt_rows.append(d_true)

        u_rows.append(U.copy())
        y_rows.append(Y)
        e_rows.append(E)
        ubar_rows.append(ubar)

        if uses_observer:
            state = eso_step(es, gains.observer, state, ubar, E)
        U = U - ubar

        if not np.all(np.isfinite(U)) or _inf_norm(U) > DIVERGENCE_CAP:
            diverged = True
            diverged_at = k
            break

    u = np.array(u_rows)
    y = np.array(y_rows)
    e = np.array(e_rows)
    ubar = np.array(ubar_rows)
    n = u.shape[0]
    if uses_observer:
        e_hat = np.array(eh_rows)
        d_hat = np.array(dh_rows)
        d_true = np.array(dt_rows)
        obs_err = np.maximum(
            np.abs(e - e_hat).max(axis=1), np.abs(d_true - d_hat).max(axis=1)
        )
    else:
        e_hat = d_hat = d_true = None
        obs_err = np.full(n, np.nan)

    return IterationTrace(
        mode=mode,
        u=u,
        y=y,
        e=e,
        ubar=ubar,
        e_hat=e_hat,
        d_hat=d_hat,
        d_true=d_true,
        err_inf=np.abs(e).max(axis=1),
        err_2=np.linalg.norm(e, axis=1),
        u_norm=np.abs(u).max(axis=1),
        ubar_norm=np.abs(ubar).max(axis=1),
        obs_err_norm=obs_err,
        diverged=diverged,
        diverged_at=diverged_at,
    )


@dataclass
class StabilityProfile:
    """Empirical boundedness/attractiveness summary of one trace.

    The tail error is compared against the tail bounds of the uncertainty
    variation (order 1) and variation rate (order 2); ratios are omitted
    when the respective bound is numerically zero.  The trace is called
    superattractive-consistent when its tail error is explained by the
    variation-rate tail: below ``atol`` if that tail vanishes, otherwise
    within ``ratio_cap`` times it.
    """

    sup_err: float
    tail_err: float
    tail_window: int
    ratio_variation: float | None
    ratio_variation_rate: float | None
    superattractive_consistent: bool


def estimate_stability_profile(
    trace: IterationTrace,
    variation_stats: DiffStats,
    variation_rate_stats: DiffStats,
    tail_window: int,
    atol: float = 1e-8,
    ratio_cap: float = 1e6,
) -> StabilityProfile:
    """Empirical stability estimates from a recorded trace."""
    if variation_stats.order != 1 or variation_rate_stats.order != 2:
        raise ValueError("expected difference statistics of orders 1 and 2")
    n = len(trace)
    if n <= tail_window:
        raise ValueError("trace must be longer than the tail window")
    sup_err = float(trace.err_inf.max())
    tail_err = float(trace.err_inf[n - tail_window :].max())

    def ratio(bound: float) -> float | None:
        return None if bound < 1e-14 else tail_err / bound

    d2 = variation_rate_stats.tail_bound
    consistent = tail_err < atol if d2 < 1e-14 else tail_err <= ratio_cap * d2
    return StabilityProfile(
        sup_err=sup_err,
        tail_err=tail_err,
        tail_window=tail_window,
        ratio_variation=ratio(variation_stats.tail_bound),
        ratio_variation_rate=ratio(d2),
        superattractive_consistent=consistent,
    )


# ---------------------------------------------------------------------------
# Trace CSV: one row per iteration, floats at 17 significant digits.  The
# diverged column is 0 except on the final recorded row of a run that hit
# the divergence cap.
# ---------------------------------------------------------------------------

def trace_to_csv(trace: IterationTrace) -> str:
    lines = [TRACE_CSV_HEADER]
    n = len(trace)
    for k in range(n):
        flag = 1 if (trace.diverged and k == n - 1) else 0
        vals = (
            trace.err_inf[k],
            trace.err_2[k],
            trace.u_norm[k],
            trace.ubar_norm[k],
            trace.obs_err_norm[k],
        )
        lines.append(f"{k}," + ",".join(f"{v:.17g}" for v in vals) + f",{flag}")
    return "\n".join(lines) + "\n"


def write_trace_csv(path, trace: IterationTrace) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(trace_to_csv(trace))


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Parse a trace CSV back into column arrays (for plotting/reports)."""
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != TRACE_CSV_HEADER:
        raise ValueError(f"unexpected trace CSV header in {path}")
    if len(lines) == 1:
        raise ValueError(f"trace CSV {path} has no data rows")
    cols = TRACE_CSV_HEADER.split(",")
    data = {c: [] for c in cols}
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(cols):
            raise ValueError(f"malformed trace CSV row: {ln!r}")
        for c, val in zip(cols, parts):
            data[c].append(float(val))
    return {c: np.array(v) for c, v in data.items()}
