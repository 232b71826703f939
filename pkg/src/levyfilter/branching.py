"""Branching particle system: evolve, branch, estimate.

Particles move as independent copies of the signal between observation
epochs (exact stable increments, one per segment) and are independently
replaced by offspring at each epoch according to the centered likelihood
ratio at their own site.  The empirical measure assigns mass
``mass_factor / initial_count`` to every alive particle; ``mass_factor``
stays 1 unless population control is switched on.

Branching decisions consume one uniform per particle per epoch, compared
against the residual with the half-open convention (the event fires iff
U < threshold).  All randomness flows through explicit numpy Generators;
identical (parameters, stream state) gives bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .observation import ObservationModel, ObservationRecord, weight
from .stable import SignalModel, sample_increment

__all__ = [
    "ExtinctionError",
    "ParticleEnsemble",
    "PopulationControl",
    "FilterStep",
    "FilterRun",
    "init_ensemble",
    "evolve_segment",
    "branch_step",
    "run_filter",
    "estimate",
    "empirical_fourier",
    "multinomial_baseline_step",
    "run_baseline",
    "population_control",
]


class ExtinctionError(RuntimeError):
    """All particles died; normalized estimates are undefined."""

    def __init__(self, epoch: int):
        super().__init__(f"particle system extinct at observation epoch {epoch}")
        self.epoch = epoch


# splitmix64 finalizer, vectorized over uint64 arrays
_MIX_M1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_M2 = np.uint64(0x94D049BB133111EB)
_MIX_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def _mix64(x: np.ndarray) -> np.ndarray:
    z = x + _MIX_GAMMA
    z = (z ^ (z >> np.uint64(30))) * _MIX_M1
    z = (z ^ (z >> np.uint64(27))) * _MIX_M2
    return z ^ (z >> np.uint64(31))


def _child_ids(parent_ids: np.ndarray, child_index: np.ndarray, epoch: int) -> np.ndarray:
    """Deterministic child identifiers from (parent id, child index, epoch); collision-checked."""
    with np.errstate(over="ignore"):  # uint64 wraparound is the point of the mix
        base = parent_ids + _MIX_M2 * (child_index.astype(np.uint64) + np.uint64(1))
        salt = np.uint64(0)
        while True:
            ids = _mix64(base ^ _mix64(np.asarray(np.uint64(epoch) * _MIX_M1 + salt)))
            if np.unique(ids).size == ids.size:
                return ids
            salt += np.uint64(1)


@dataclass
class ParticleEnsemble:
    """Alive particles: positions (count, d), distinct lineage ids, mass factor, time stamp."""

    positions: np.ndarray
    lineage_ids: np.ndarray
    initial_count: int
    mass_factor: float = 1.0
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=float))
        if self.positions.size == 0:
            self.positions = self.positions.reshape(0, max(1, self.positions.shape[-1]))
        self.lineage_ids = np.asarray(self.lineage_ids, dtype=np.uint64)
        if self.positions.shape[0] != self.lineage_ids.shape[0]:
            raise ValueError("positions and lineage_ids must have equal length")
        if self.mass_factor <= 0.0:
            raise ValueError("mass_factor must be positive")

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dimension(self) -> int:
        return self.positions.shape[1]

    @property
    def total_mass(self) -> float:
        """<mu, 1> = mass_factor * count / initial_count."""
        return self.mass_factor * self.count / self.initial_count


@dataclass(frozen=True)
class PopulationControl:
    """Unbiased birth/death control keeping the count near a target band."""

    target: int
    low_ratio: float = 0.5
    high_ratio: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.low_ratio < 1.0 < self.high_ratio:
            raise ValueError("bounds must satisfy 0 < low_ratio < 1 < high_ratio")


def init_ensemble(n: int, signal: SignalModel, rng: np.random.Generator) -> ParticleEnsemble:
    """n iid particles from the initial law; total mass exactly 1."""
    if n < 1:
        raise ValueError("initial particle count must be at least 1")
    positions = signal.initial_law.sample(n, rng)
    ids = _mix64(np.arange(n, dtype=np.uint64))
    return ParticleEnsemble(positions, ids, initial_count=n)


def evolve_segment(
    ensemble: ParticleEnsemble,
    signal: SignalModel,
    dt: float,
    rng: np.random.Generator,
) -> ParticleEnsemble:
    """Displace every particle by an independent exact stable increment of duration dt."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if ensemble.count == 0:
        return replace(ensemble, time=ensemble.time + dt)
    steps = sample_increment(signal, dt, rng, size=ensemble.count)
    return replace(
        ensemble,
        positions=ensemble.positions + steps,
        lineage_ids=ensemble.lineage_ids.copy(),
        time=ensemble.time + dt,
    )


def _offspring_counts(rho: np.ndarray, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-particle offspring counts from one uniform each, plus the branch/death events.

    rho >= 0: floor(rho)+1 copies, one more iff U < frac(rho);
    rho <  0: killed iff U < |rho|.  An event is a death or a branch
    (U < |residual| or rho >= 1)."""
    neg = rho < 0.0
    frac = np.where(neg, 0.0, rho - np.floor(rho))
    counts = np.where(
        neg,
        (u >= -rho).astype(np.int64),
        (np.floor(rho) + 1.0).astype(np.int64) + (u < frac),
    )
    residual = np.where(neg, rho, frac)
    events = (rho >= 1.0) | (u < np.abs(residual))
    return counts, events


def branch_step(
    ensemble: ParticleEnsemble,
    dy,
    obs: ObservationModel,
    rng: np.random.Generator,
    *,
    epoch: int | None = None,
) -> ParticleEnsemble:
    """Replace each particle by its offspring at the same site, one uniform per particle.

    Offspring inherit the parent position exactly; lineage ids are derived
    deterministically from (parent id, child index, epoch).  The conditional
    expected contribution of a particle to any estimate is (1 + rho) times
    its own, so the step is unbiased.  An empty result (extinction) is legal.
    """
    if ensemble.count == 0:
        return ensemble
    if epoch is None:
        epoch = int(round(ensemble.time / obs.epsilon))
    rho = np.atleast_1d(weight(ensemble.positions, dy, obs))
    u = rng.uniform(size=ensemble.count)
    counts, _ = _offspring_counts(rho, u)
    return _apply_offspring(ensemble, counts, epoch)


def _apply_offspring(ensemble: ParticleEnsemble, counts: np.ndarray, epoch: int) -> ParticleEnsemble:
    total = int(counts.sum())
    if total == 0:
        return replace(
            ensemble,
            positions=np.empty((0, ensemble.dimension)),
            lineage_ids=np.empty(0, dtype=np.uint64),
        )
    parent_index = np.repeat(np.arange(ensemble.count), counts)
    starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
    child_index = np.arange(total) - starts[parent_index]
    ids = _child_ids(ensemble.lineage_ids[parent_index], child_index, epoch)
    return replace(
        ensemble,
        positions=ensemble.positions[parent_index],
        lineage_ids=ids,
    )


@dataclass
class FilterStep:
    """One observation epoch: the ensemble just before and just after branching."""

    epoch: int
    time: float
    pre: ParticleEnsemble
    post: ParticleEnsemble
    branch_events: int


@dataclass
class FilterRun:
    """Full filter trajectory; ``extinct_epoch`` reports termination by extinction."""

    initial: ParticleEnsemble
    steps: list
    extinct_epoch: int | None = None

    @property
    def final(self) -> ParticleEnsemble:
        return self.steps[-1].post if self.steps else self.initial

    @property
    def extinct(self) -> bool:
        return self.extinct_epoch is not None


def run_filter(
    signal: SignalModel,
    obs: ObservationModel,
    record: ObservationRecord,
    n: int,
    rng: np.random.Generator,
    *,
    control: PopulationControl | None = None,
) -> FilterRun:
    """Alternate evolve and branch over the record; keep pre/post snapshots per epoch.

    Terminates early with an extinction report if every particle dies.
    """
    if record.count == 0:
        return FilterRun(initial=init_ensemble(n, signal, rng), steps=[])
    eps = record.epsilon
    ensemble = init_ensemble(n, signal, rng)
    initial = ensemble
    steps: list[FilterStep] = []
    for k in range(1, record.count + 1):
        ensemble = evolve_segment(ensemble, signal, eps, rng)
        pre = ensemble
        rho = np.atleast_1d(weight(pre.positions, record.increments[k - 1], obs))
        u = rng.uniform(size=pre.count)
        counts, events = _offspring_counts(rho, u)
        ensemble = _apply_offspring(pre, counts, epoch=k)
        if control is not None and ensemble.count > 0:
            ensemble = population_control(
                ensemble,
                control.target,
                (control.low_ratio, control.high_ratio),
                rng,
                epoch=k,
            )
        steps.append(
            FilterStep(
                epoch=k,
                time=k * eps,
                pre=pre,
                post=ensemble,
                branch_events=int(events.sum()),
            )
        )
        if ensemble.count == 0:
            return FilterRun(initial=initial, steps=steps, extinct_epoch=k)
    return FilterRun(initial=initial, steps=steps)


def estimate(ensemble: ParticleEnsemble, phi) -> tuple:
    """(unnormalized, normalized) estimates of a test function.

    ``phi`` maps a (count, d) position array to per-particle values (real or
    complex).  Unnormalized is mass_factor * sum / initial_count; normalized
    is the plain average over alive particles and requires a nonempty ensemble.
    """
    if ensemble.count == 0:
        raise ExtinctionError(int(round(ensemble.time)))
    values = np.asarray(phi(ensemble.positions))
    total = values.sum()
    unnormalized = ensemble.mass_factor * total / ensemble.initial_count
    normalized = total / ensemble.count
    return unnormalized, normalized


def empirical_fourier(ensemble: ParticleEnsemble, thetas, chunk: int = 256) -> np.ndarray:
    """Fourier transform of the empirical measure on a frequency list.

    Returns mass_factor * (1/n) * sum_i exp(-i theta' X_i) per node; an empty
    ensemble transforms to zero everywhere.
    """
    th = np.asarray(thetas, dtype=float)
    if th.ndim == 1 and ensemble.dimension == 1:
        th = th.reshape(-1, 1)
    th = np.atleast_2d(th)
    out = np.zeros(th.shape[0], dtype=complex)
    if ensemble.count == 0:
        return out
    scale = ensemble.mass_factor / ensemble.initial_count
    for lo in range(0, th.shape[0], chunk):
        block = th[lo : lo + chunk]
        out[lo : lo + block.shape[0]] = np.exp(
            -1j * (ensemble.positions @ block.T)
        ).sum(axis=0)
    return scale * out


def multinomial_baseline_step(
    ensemble: ParticleEnsemble,
    dy,
    obs: ObservationModel,
    rng: np.random.Generator,
    *,
    epoch: int | None = None,
) -> tuple[ParticleEnsemble, int]:
    """Constant-population multinomial resampling with weights 1 + rho.

    Every particle independently picks a parent site with probability
    proportional to the parent weight.  Returns the new ensemble and the
    relocation count (particles whose site differs from their own old one).
    """
    if ensemble.count == 0:
        raise ValueError("multinomial step requires a nonempty ensemble")
    if epoch is None:
        epoch = int(round(ensemble.time / obs.epsilon))
    w = 1.0 + np.atleast_1d(weight(ensemble.positions, dy, obs))
    parents = rng.choice(ensemble.count, size=ensemble.count, p=w / w.sum())
    relocations = int(np.sum(parents != np.arange(ensemble.count)))
    ids = _child_ids(
        ensemble.lineage_ids[parents], np.arange(ensemble.count), epoch
    )
    new = replace(ensemble, positions=ensemble.positions[parents], lineage_ids=ids)
    return new, relocations


@dataclass
class BaselineStep:
    epoch: int
    time: float
    post: ParticleEnsemble
    relocations: int


def run_baseline(
    signal: SignalModel,
    obs: ObservationModel,
    record: ObservationRecord,
    n: int,
    rng: np.random.Generator,
) -> list:
    """Multinomial-resampling filter on the same record; population stays n."""
    eps = record.epsilon
    ensemble = init_ensemble(n, signal, rng)
    steps: list[BaselineStep] = []
    for k in range(1, record.count + 1):
        ensemble = evolve_segment(ensemble, signal, eps, rng)
        ensemble, moved = multinomial_baseline_step(
            ensemble, record.increments[k - 1], obs, rng, epoch=k
        )
        steps.append(BaselineStep(epoch=k, time=k * eps, post=ensemble, relocations=moved))
    return steps


def population_control(
    ensemble: ParticleEnsemble,
    n_target: int,
    bounds: tuple,
    rng: np.random.Generator,
    *,
    epoch: int = 0,
) -> ParticleEnsemble:
    """Halve or double the population outside the band, preserving estimates exactly.

    Above high_ratio * n_target each particle survives with probability 1/2
    and the mass factor doubles; below low_ratio * n_target every particle is
    duplicated and the mass factor halves.  Conditional expectations of all
    estimates are unchanged.
    """
    lo_ratio, hi_ratio = bounds
    if not 0.0 < lo_ratio < 1.0 < hi_ratio:
        raise ValueError("bounds must satisfy 0 < lo_ratio < 1 < hi_ratio")
    count = ensemble.count
    if count > hi_ratio * n_target:
        keep = rng.uniform(size=count) < 0.5
        return replace(
            ensemble,
            positions=ensemble.positions[keep],
            lineage_ids=ensemble.lineage_ids[keep],
            mass_factor=ensemble.mass_factor * 2.0,
        )
    if count < lo_ratio * n_target and count > 0:
        counts = np.full(count, 2, dtype=np.int64)
        doubled = _apply_offspring(ensemble, counts, epoch=epoch)
        return replace(doubled, mass_factor=ensemble.mass_factor * 0.5)
    return ensemble
