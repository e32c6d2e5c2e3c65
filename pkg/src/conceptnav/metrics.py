"""Navigation and grounding metrics: TL, OSR, SR, SPL, RGS, RGSPL."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .env import Episode, NavEnvironment, Trajectory, bfs_distances

CSV_COLUMNS = ("TL", "OSR", "SR", "SPL", "RGS", "RGSPL")


class CountMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    TL: float
    OSR: float
    SR: float
    SPL: float
    RGS: float
    RGSPL: float
    episodes: int

    def to_json(self) -> str:
        return json.dumps(
            {
                "episodes": self.episodes,
                **{c: getattr(self, c) for c in CSV_COLUMNS},
            },
            sort_keys=True,
        )

    def csv_row(self) -> str:
        return ",".join(f"{getattr(self, c):.6f}" for c in CSV_COLUMNS)

    @staticmethod
    def csv_header() -> str:
        return ",".join(CSV_COLUMNS)


def _path_ratio(shortest: int, actual: int) -> float:
    denom = max(shortest, actual)
    return 1.0 if denom == 0 else shortest / denom


def compute_metrics(
    trajectories,
    episodes,
    env: NavEnvironment | list[NavEnvironment],
    success_radius: int = 0,
) -> MetricsReport:
    """Aggregate metrics over matched (trajectory, episode) pairs.

    `env` is a single environment or one per episode. Success means
    stopping within `success_radius` hops of the goal (0 = exact node);
    oracle success means the path ever came that close. SPL/RGSPL weight
    success by shortest/max(shortest, actual) path length.
    """
    trajectories = list(trajectories)
    episodes = list(episodes)
    if len(trajectories) != len(episodes):
        raise CountMismatchError(
            f"{len(trajectories)} trajectories vs {len(episodes)} episodes"
        )
    if not trajectories:
        raise CountMismatchError("empty batch")
    envs = env if isinstance(env, (list, tuple)) else [env] * len(episodes)
    if len(envs) != len(episodes):
        raise CountMismatchError(f"{len(envs)} environments vs {len(episodes)} episodes")

    tl = osr = sr = spl = rgs = rgspl = 0.0
    for traj, ep, e in zip(trajectories, episodes, envs):
        dist = bfs_distances(e, ep.goal)
        if traj.nodes[0] != ep.start:
            raise CountMismatchError(
                f"trajectory starts at {traj.nodes[0]}, episode at {ep.start}"
            )
        shortest = int(dist[ep.start])
        actual = traj.length
        success = dist[traj.nodes[-1]] >= 0 and dist[traj.nodes[-1]] <= success_radius
        oracle = any(0 <= dist[v] <= success_radius for v in traj.nodes)
        ratio = _path_ratio(shortest, actual)
        grounded = success and traj.predicted_object == ep.target_object
        tl += actual
        osr += oracle
        sr += success
        spl += success * ratio
        rgs += grounded
        rgspl += grounded * ratio
    n = len(episodes)
    return MetricsReport(
        TL=tl / n,
        OSR=osr / n,
        SR=sr / n,
        SPL=spl / n,
        RGS=rgs / n,
        RGSPL=rgspl / n,
        episodes=n,
    )


def write_csv(path, report: MetricsReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MetricsReport.csv_header() + "\n")
        fh.write(report.csv_row() + "\n")
