"""Force statistics over a run and staggered-vs-simultaneous comparison."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SAMPLE_INTERVAL = 0.1


@dataclass(frozen=True)
class Sample:
    time: float
    active: int
    avg_force: float
    peak_force: float
    evacuated: int
    inert: int = 0
    empty: bool = False  # no active agents at this sample


@dataclass
class ForceTrace:
    sample_interval: float = SAMPLE_INTERVAL
    spawned: int = 0
    samples: list[Sample] = field(default_factory=list)

    def append(self, sample: Sample):
        self.samples.append(sample)

    def __len__(self):
        return len(self.samples)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.samples])


@dataclass(frozen=True)
class RunSummary:
    total_evacuation_time: float
    peak_avg_force: float
    time_of_peak: float
    completed: bool
    anomaly_counts: dict = field(default_factory=dict)


def force_magnitudes(forces: np.ndarray, active: np.ndarray) -> np.ndarray:
    f = forces[active]
    return np.hypot(f[:, 0], f[:, 1])


def sample_from(time: float, forces: np.ndarray, active: np.ndarray, evacuated: int, inert: int = 0) -> Sample:
    """Mean and max force magnitude over the active agents."""
    mags = force_magnitudes(forces, active)
    if len(mags) == 0:
        return Sample(float(time), 0, 0.0, 0.0, int(evacuated), int(inert), True)
    return Sample(float(time), len(mags), float(mags.mean()), float(mags.max()), int(evacuated), int(inert))


def record_sample(world, forces=None, include_driving: bool = False) -> Sample:
    """Sample ``world`` at its current time from the forces evaluated on this state.

    By default the tracked force is each agent's summed agent and wall
    repulsion; ``include_driving`` adds the self-driving term.
    """
    active, inert, evacuated = world.counts()
    if forces is None:
        tracked = np.zeros((world.spawned, 2))
        mask = np.zeros(world.spawned, dtype=bool)
    else:
        tracked = forces.repulsive + forces.driving if include_driving else forces.repulsive
        mask = forces.active
    return sample_from(world.sim_time, tracked, mask, evacuated, inert)


def summarize(trace: ForceTrace, anomaly_counts: dict | None = None) -> RunSummary:
    if not trace.samples:
        raise ValueError("cannot summarize an empty trace")
    avg = trace.column("avg_force")
    k = int(np.argmax(avg))  # first maximum
    done = [s for s in trace.samples if s.evacuated == trace.spawned]
    completed = bool(done)
    total = done[0].time if completed else trace.samples[-1].time
    return RunSummary(float(total), float(avg[k]), trace.samples[k].time, completed, dict(anomaly_counts or {}))


@dataclass(frozen=True)
class Comparison:
    delta_time: float  # staggered - simultaneous, s
    delta_peak_force: float  # staggered - simultaneous, N
    force_reduction_ratio: float  # 1 - staggered/simultaneous peak
    status: str  # "holds", "partial" or "not_held"

    @property
    def pattern_holds(self) -> bool:
        return self.status == "holds"


class IncompleteRunError(ValueError):
    pass


def compare_runs(staggered: RunSummary, simultaneous: RunSummary) -> Comparison:
    """Check the expected pattern: staggering takes longer but lowers the peak force."""
    for name, s in (("staggered", staggered), ("simultaneous", simultaneous)):
        if not s.completed:
            raise IncompleteRunError(f"{name} run did not complete; comparison refused")
    dt = staggered.total_evacuation_time - simultaneous.total_evacuation_time
    df = staggered.peak_avg_force - simultaneous.peak_avg_force
    ratio = 0.0 if simultaneous.peak_avg_force == 0 else 1.0 - staggered.peak_avg_force / simultaneous.peak_avg_force
    longer, weaker = dt > 0, df < 0
    status = "holds" if (longer and weaker) else ("partial" if (longer or weaker) else "not_held")
    return Comparison(dt, df, ratio, status)
