"""Reference benchmark: third-order time-domain plant, lifted over a
20-step horizon, controlled model-free through a banded surrogate.

The true plant is never shown to the controller: each benchmark seed
perturbs every matrix element by up to 30 percent, the lifted map is
treated as fully unknown, and the updating law works from a constructed
banded surrogate with learning gain ``0.5 * inv(surrogate)``,
compensation gain ``2 I``, and diagonal observer gains ``0.9 I / 0.1 I``.
The uncertainty has identical entries following slowly damped cumulative
sine partial sums.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .learner import GainSet, LearningLaw, SimulationConfig, synth_Hbar
from .observer import ObserverGain
from .plant import (
    LiftedIlcSystem,
    TransferPlant,
    UncertaintyModel,
    lift_ilc,
    perturb_system,
)

__all__ = [
    "REFERENCE_HORIZON",
    "reference_system",
    "perturbed_reference_system",
    "reference_target",
    "banded_surrogate",
    "reference_gains",
    "reference_uncertainty",
    "reference_plant",
    "reference_config",
    "closed_loop_amplification",
    "reference_seeds",
    "write_reference_experiment",
]

REFERENCE_HORIZON = 20

#: Third-order benchmark plant: one slow real mode and a lightly damped
#: oscillatory pair, single input, single output.
REFERENCE_A = np.array(
    [
        [0.72, 0.0, 0.0],
        [1.0, -1.04, -0.81],
        [0.0, 0.81, 0.0],
    ]
)
REFERENCE_B = np.array([[1.0], [0.0], [0.0]])
REFERENCE_C = np.array([[1.0, -0.98, -1.09]])

#: Elementwise relative uncertainty level of the benchmark draws.
REFERENCE_UNCERTAINTY_LEVEL = 0.3


def reference_system(horizon: int = REFERENCE_HORIZON) -> LiftedIlcSystem:
    """The unperturbed benchmark system."""
    return LiftedIlcSystem(
        A=REFERENCE_A, B=REFERENCE_B, C=REFERENCE_C, horizon=horizon
    )


def perturbed_reference_system(
    seed: int,
    level: float = REFERENCE_UNCERTAINTY_LEVEL,
    horizon: int = REFERENCE_HORIZON,
) -> LiftedIlcSystem:
    """A benchmark draw with up to ``level`` relative error per element."""
    return perturb_system(reference_system(horizon), level, seed)


def reference_target(horizon: int = REFERENCE_HORIZON) -> np.ndarray:
    """Stacked sine reference ``sin(8 t / T)`` sampled at ``t = 1..T``."""
    t = np.arange(1, horizon + 1)
    return np.sin(8.0 * t / horizon)


def banded_surrogate(
    n: int, diagonals: tuple[float, ...] = (1.0, -0.5, -0.25)
) -> np.ndarray:
    """Lower-triangular banded Toeplitz surrogate map."""
    M = np.zeros((n, n))
    for offset, value in enumerate(diagonals):
        M += value * np.eye(n, k=-offset)
    return M


def reference_uncertainty(dimension: int) -> UncertaintyModel:
    return UncertaintyModel.cumulative_sine(dimension)


def reference_gains(surrogate: np.ndarray) -> GainSet:
    """Benchmark gain set: ``K = 0.5 inv(surrogate)``, ``Hbar = (surrogate K)^-1``."""
    K = 0.5 * np.linalg.inv(surrogate)
    Hbar = synth_Hbar(surrogate, K)
    p = surrogate.shape[0]
    return GainSet(K=K, Hbar=Hbar, observer=ObserverGain.diagonal(p, 0.9, 0.1))


def reference_plant(seed: int, horizon: int = REFERENCE_HORIZON) -> TransferPlant:
    """Model-free plant for one benchmark draw: the lifted true map is
    entirely unknown (zero nominal part)."""
    P, _, _ = lift_ilc(perturbed_reference_system(seed, horizon=horizon))
    return TransferPlant(nominal=np.zeros_like(P), delta=P)


def reference_config(
    seed: int,
    law_mode: str = "eso_model_free",
    iterations: int = 500,
    horizon: int = REFERENCE_HORIZON,
) -> SimulationConfig:
    """Closed-loop benchmark configuration for one seed and law."""
    plant = reference_plant(seed, horizon=horizon)
    surrogate = banded_surrogate(horizon)
    gains = reference_gains(surrogate)
    law = (
        LearningLaw(mode="eso_model_free", surrogate=surrogate)
        if law_mode == "eso_model_free"
        else LearningLaw(mode=law_mode)
    )
    return SimulationConfig(
        plant=plant,
        target=reference_target(horizon),
        uncertainty=reference_uncertainty(horizon),
        gains=gains,
        law=law,
        iterations=iterations,
        seed=seed,
    )


def closed_loop_amplification(
    P: np.ndarray, surrogate: np.ndarray, gains: GainSet
) -> float:
    """Steady-state amplification of the model-free loop.

    Infinity norm of ``(I - Mcal)^-1`` for the input-boundedness loop
    matrix; draws with huge amplification are spectrally stable yet reach
    useless steady-state accuracy.
    """
    p = P.shape[0]
    og = gains.observer
    I = np.eye(p)
    A_lc = np.block([[I - og.L1, I], [-og.L2, I]])
    F = np.hstack([np.zeros((p, p)), I])
    M = np.block(
        [
            [I - P @ gains.K, gains.Hbar @ F],
            [og.stacked @ (surrogate - P) @ gains.K, A_lc],
        ]
    )
    return float(
        np.linalg.norm(np.linalg.inv(np.eye(3 * p) - M), np.inf)
    )


def write_reference_experiment(
    directory,
    seeds: list[int] | None = None,
    iterations: int = 500,
    horizon: int = REFERENCE_HORIZON,
) -> Path:
    """Emit the benchmark as a CLI experiment (system file plus config).

    Returns the config path; the config compares the model-free law
    against plain error feedback with the benchmark gains.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    from .plant import save_ilc_system

    system_file = directory / "reference_system.json"
    save_ilc_system(system_file, reference_system(horizon))
    config = {
        "format_version": 1,
        "plant": {
            "kind": "ilc_lift",
            "system": {"file": system_file.name},
            "element_uncertainty": REFERENCE_UNCERTAINTY_LEVEL,
            "role": "model_free",
        },
        "target": reference_target(horizon).tolist(),
        "uncertainty": {"kind": "cumulative_sine"},
        "surrogate": {
            "banded": {"size": horizon, "diagonals": [1.0, -0.5, -0.25]}
        },
        "gains": {
            "K": {"directive": "scaled_surrogate_inverse", "scale": 0.5},
            "Hbar": {"directive": "hbar_from_surrogate"},
            "L1": {"scaled_identity": 0.9},
            "L2": {"scaled_identity": 0.1},
        },
        "laws": ["eso_model_free", "p_type"],
        "iterations": iterations,
        "seeds": seeds if seeds is not None else [1, 2, 3],
    }
    config_file = directory / "reference_config.json"
    with open(config_file, "w", encoding="ascii") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return config_file


def reference_seeds(
    count: int = 10,
    start: int = 1,
    amplification_cap: float = 1e3,
    horizon: int = REFERENCE_HORIZON,
) -> list[int]:
    """First ``count`` benchmark seeds whose draw is numerically sane.

    A 30-percent draw can produce a lifted map whose closed loop, while
    spectrally stable, amplifies the uncertainty by four or more orders
    of magnitude (a nearly singular instantaneous gain); such draws are
    excluded by the documented amplification cap so the benchmark
    exercises the regime the design targets.
    """
    surrogate = banded_surrogate(horizon)
    gains = reference_gains(surrogate)
    seeds = []
    seed = start
    while len(seeds) < count:
        P, _, _ = lift_ilc(perturbed_reference_system(seed, horizon=horizon))
        if closed_loop_amplification(P, surrogate, gains) <= amplification_cap:
            seeds.append(seed)
        seed += 1
        if seed - start > 100 * count:
            raise RuntimeError("could not find enough sane benchmark seeds")
    return seeds
