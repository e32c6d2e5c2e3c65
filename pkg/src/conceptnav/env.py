"""Synthetic connectivity-graph environments with object-annotated
viewpoints, templated instructions, a shortest-path demonstrator, and the
rollout loop.

Environments look like small floor plans: rooms partition the nodes, a
hallway acts as the hub, and each node's objects come from its room's
pool, so facts like (bed, AtLocation, bedroom) actually carry signal.
A candidate view toward a neighbor shows the neighbor's objects near the
view center at the horizon, plus the current node's own objects at their
panorama bearings below the horizon.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from importlib import resources

import numpy as np

STOP = -1  # demonstrator/rollout sentinel action

ROOM_TYPES = (
    "hallway",
    "living room",
    "kitchen",
    "bedroom",
    "bathroom",
    "office",
    "dining room",
    "laundry room",
)

INSTRUCTION_TEMPLATES = (
    "go to the {room} and find the {target}",
    "head to the {room} and stop next to the {target}",
    "walk to the {room} then look for the {target} near the {landmark}",
    "find the {target} in the {room}",
    "reach the {room} and check the {target} beside the {landmark}",
)

CLS_TOKEN, SEP_TOKEN, UNK_TOKEN = "[cls]", "[sep]", "[unk]"


class InvalidParamsError(ValueError):
    pass


class NoValidGoalError(RuntimeError):
    pass


class UnreachableGoalError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# data files
# ---------------------------------------------------------------------------
def _data_text(name: str) -> str:
    return resources.files("conceptnav.data").joinpath(name).read_text("utf-8")


def load_room_pools() -> dict[str, list[str]]:
    return json.loads(_data_text("room_pools.json"))["rooms"]


def load_object_vocabulary() -> list[str]:
    return _data_text("object_vocabulary.txt").splitlines()


def default_snapshot_path() -> str:
    return str(resources.files("conceptnav.data").joinpath("knowledge_snapshot.tsv"))


# ---------------------------------------------------------------------------
# instruction vocabulary
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Vocabulary:
    token_to_id: dict[str, int]

    def __len__(self):
        return len(self.token_to_id)

    @property
    def cls_id(self):
        return self.token_to_id[CLS_TOKEN]

    @property
    def sep_id(self):
        return self.token_to_id[SEP_TOKEN]

    @property
    def unk_id(self):
        return self.token_to_id[UNK_TOKEN]

    def encode(self, text: str) -> tuple[int, ...]:
        ids = [self.cls_id]
        for word in text.lower().split():
            ids.append(self.token_to_id.get(word, self.unk_id))
        ids.append(self.sep_id)
        return tuple(ids)


def build_vocabulary() -> Vocabulary:
    """Fixed instruction vocabulary: template words, room labels, and
    every room-pool object word. Out-of-vocabulary words map to [unk]."""
    words: set[str] = set()
    for template in INSTRUCTION_TEMPLATES:
        words.update(
            w for w in template.split() if not (w.startswith("{") and w.endswith("}"))
        )
    for room, pool in load_room_pools().items():
        words.update(room.split())
        for obj in pool:
            words.update(obj.split())
    ordered = [CLS_TOKEN, SEP_TOKEN, UNK_TOKEN] + sorted(words)
    return Vocabulary({tok: i for i, tok in enumerate(ordered)})


# ---------------------------------------------------------------------------
# environment
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CandidateView:
    """What the agent sees from a node looking toward one neighbor."""

    to_node: int
    view_id: str
    theta: float  # view center heading
    psi: float  # view center elevation
    objects: tuple[tuple[str, float, float], ...]  # (label, d_theta, d_psi)
    room_ahead: str  # room of the neighbor this view looks into


@dataclass(frozen=True)
class Viewpoint:
    node: int
    room: str
    objects: tuple[tuple[str, float, float], ...]  # (label, theta, psi) panorama
    candidates: tuple[CandidateView, ...]  # sorted by to_node

    def object_labels(self) -> tuple[str, ...]:
        return tuple(o[0] for o in self.objects)


@dataclass(frozen=True)
class NavEnvironment:
    seed: int
    n_nodes: int
    n_rooms: int
    object_density: float
    rooms: tuple[str, ...]  # per node
    edges: frozenset[tuple[int, int]]  # (u, v) with u < v
    coords: tuple[tuple[float, float], ...]
    viewpoints: tuple[Viewpoint, ...]

    @property
    def env_id(self) -> str:
        return f"env{self.seed}"

    def neighbors(self, node: int) -> tuple[int, ...]:
        return tuple(c.to_node for c in self.viewpoints[node].candidates)

    def to_json(self) -> str:
        doc = {
            "schema_version": 1,
            "seed": self.seed,
            "n_nodes": self.n_nodes,
            "n_rooms": self.n_rooms,
            "object_density": self.object_density,
            "rooms": list(self.rooms),
            "edges": sorted([list(e) for e in self.edges]),
            "coords": [[float(x), float(y)] for x, y in self.coords],
            "viewpoints": [
                {
                    "node": vp.node,
                    "room": vp.room,
                    "objects": [[o, float(t), float(p)] for o, t, p in vp.objects],
                    "candidates": [
                        {
                            "to": c.to_node,
                            "view_id": c.view_id,
                            "theta": float(c.theta),
                            "psi": float(c.psi),
                            "room_ahead": c.room_ahead,
                            "objects": [
                                [o, float(t), float(p)] for o, t, p in c.objects
                            ],
                        }
                        for c in vp.candidates
                    ],
                }
                for vp in self.viewpoints
            ],
        }
        return json.dumps(doc, sort_keys=True)


def _wrap_angle(a: float) -> float:
    return float((a + np.pi) % (2.0 * np.pi) - np.pi)


def generate_environment(
    seed: int,
    n_nodes: int = 12,
    n_rooms: int = 5,
    object_density: float = 3.0,
) -> NavEnvironment:
    """Deterministic floor-plan-style connectivity graph.

    Rooms partition the nodes; room 0 is always the hallway hub, every
    other room links to it, and a few extra room-to-room doors exist.
    """
    if n_nodes < 2:
        raise InvalidParamsError(f"need at least 2 nodes, got {n_nodes}")
    if not 1 <= n_rooms <= n_nodes:
        raise InvalidParamsError(f"n_rooms {n_rooms} must be in [1, {n_nodes}]")
    if object_density <= 0:
        raise InvalidParamsError("object_density must be positive")

    rng = np.random.default_rng(seed)
    pools = load_room_pools()
    room_labels = [ROOM_TYPES[i % len(ROOM_TYPES)] for i in range(n_rooms)]

    # distribute nodes over rooms, one each, remainder at random
    counts = np.ones(n_rooms, dtype=int)
    for _ in range(n_nodes - n_rooms):
        counts[rng.integers(n_rooms)] += 1
    room_of: list[int] = []
    for r, c in enumerate(counts):
        room_of.extend([r] * int(c))

    # planted coordinates: hallway near the origin, rooms on a ring
    coords = np.zeros((n_nodes, 2))
    for r in range(n_rooms):
        if r == 0:
            center = np.zeros(2)
        else:
            angle = 2.0 * np.pi * (r - 1) / max(1, n_rooms - 1)
            center = 10.0 * np.array([np.cos(angle), np.sin(angle)])
        members = [i for i, rr in enumerate(room_of) if rr == r]
        for i in members:
            coords[i] = center + rng.normal(0.0, 1.5, size=2)

    edges: set[tuple[int, int]] = set()

    def connect(u, v):
        if u != v:
            edges.add((min(u, v), max(u, v)))

    # intra-room chains (+ an occasional shortcut)
    for r in range(n_rooms):
        members = [i for i, rr in enumerate(room_of) if rr == r]
        order = list(rng.permutation(members))
        for a, b in zip(order, order[1:]):
            connect(a, b)
        if len(order) >= 3 and rng.random() < 0.3:
            connect(order[0], order[-1])

    # every room gets a door to the hallway; some rooms connect directly
    hallway_members = [i for i, rr in enumerate(room_of) if rr == 0]
    for r in range(1, n_rooms):
        members = [i for i, rr in enumerate(room_of) if rr == r]
        connect(int(rng.choice(members)), int(rng.choice(hallway_members)))
    for r in range(1, n_rooms):
        for s in range(r + 1, n_rooms):
            if rng.random() < 0.15:
                a = [i for i, rr in enumerate(room_of) if rr == r]
                b = [i for i, rr in enumerate(room_of) if rr == s]
                connect(int(rng.choice(a)), int(rng.choice(b)))

    # panorama object annotations per node
    node_objects: list[tuple[tuple[str, float, float], ...]] = []
    for i in range(n_nodes):
        pool = pools[room_labels[room_of[i]]]
        count = int(np.clip(rng.poisson(object_density), 2, len(pool)))
        labels = sorted(rng.choice(pool, size=count, replace=False).tolist())
        objs = tuple(
            (
                label,
                float(rng.uniform(-np.pi, np.pi)),
                float(np.clip(rng.normal(-0.45, 0.08), -1.2, -0.1)),
            )
            for label in labels
        )
        node_objects.append(objs)

    neighbors: dict[int, list[int]] = {i: [] for i in range(n_nodes)}
    for u, v in edges:
        neighbors[u].append(v)
        neighbors[v].append(u)

    viewpoints = []
    for u in range(n_nodes):
        candidates = []
        for v in sorted(neighbors[u]):
            dx, dy = coords[v] - coords[u]
            theta = _wrap_angle(float(np.arctan2(dy, dx)))
            ahead = tuple(
                (
                    label,
                    float(rng.uniform(-0.15, 0.15)),
                    float(rng.uniform(-0.08, 0.08)),
                )
                for label, _, _ in node_objects[v]
            )
            around = tuple(
                (label, _wrap_angle(g_theta - theta), g_psi)
                for label, g_theta, g_psi in node_objects[u]
            )
            candidates.append(
                CandidateView(
                    to_node=v,
                    view_id=f"env{seed}:{u}->{v}",
                    theta=theta,
                    psi=0.0,
                    objects=ahead + around,
                    room_ahead=room_labels[room_of[v]],
                )
            )
        viewpoints.append(
            Viewpoint(
                node=u,
                room=room_labels[room_of[u]],
                objects=node_objects[u],
                candidates=tuple(candidates),
            )
        )

    return NavEnvironment(
        seed=seed,
        n_nodes=n_nodes,
        n_rooms=n_rooms,
        object_density=object_density,
        rooms=tuple(room_labels[r] for r in room_of),
        edges=frozenset(edges),
        coords=tuple((float(x), float(y)) for x, y in coords),
        viewpoints=tuple(viewpoints),
    )


# ---------------------------------------------------------------------------
# shortest paths and the demonstrator
# ---------------------------------------------------------------------------
def bfs_distances(env: NavEnvironment, source: int) -> np.ndarray:
    dist = np.full(env.n_nodes, -1, dtype=np.int64)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in env.neighbors(u):
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def _dist_to(env: NavEnvironment, goal: int) -> np.ndarray:
    # per-environment memo (frozen dataclass, so hang it off __dict__)
    cache = env.__dict__.setdefault("_dist_cache", {})
    if goal not in cache:
        cache[goal] = bfs_distances(env, goal)
    return cache[goal]


def demonstrator_action(env: NavEnvironment, current: int, goal: int):
    """Neighbor with the smallest remaining distance to `goal` (ties break
    on the smaller node id); STOP when already there."""
    if current == goal:
        return STOP
    dist = _dist_to(env, goal)
    if dist[current] < 0:
        raise UnreachableGoalError(f"no path from {current} to {goal}")
    best, best_d = None, None
    for v in env.neighbors(current):
        d = dist[v]
        if d >= 0 and (best_d is None or d < best_d):
            best, best_d = v, d
    return best


# ---------------------------------------------------------------------------
# episodes
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Episode:
    instruction: str
    tokens: tuple[int, ...]
    start: int
    goal: int
    target_object: str
    max_steps: int = 15
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "schema_version": 1,
                "instruction": self.instruction,
                "tokens": list(self.tokens),
                "start": self.start,
                "goal": self.goal,
                "target_object": self.target_object,
                "max_steps": self.max_steps,
                "seed": self.seed,
            },
            sort_keys=True,
        )


def generate_episode(
    env: NavEnvironment,
    seed: int,
    vocab: Vocabulary | None = None,
    min_hops: int = 1,
    max_hops: int = 4,
    max_steps: int = 15,
) -> Episode:
    """Templated goal-directed episode: reach a node in another room and
    ground the target object found there."""
    vocab = vocab or build_vocabulary()
    rng = np.random.default_rng(seed)
    starts = list(rng.permutation(env.n_nodes))
    for start in starts:
        dist = bfs_distances(env, int(start))
        goals = [
            v
            for v in range(env.n_nodes)
            if v != start
            and env.rooms[v] != env.rooms[int(start)]
            and min_hops <= dist[v] <= max_hops
            and env.viewpoints[v].objects
        ]
        if not goals:
            continue
        goal = int(rng.choice(goals))
        goal_objects = env.viewpoints[goal].object_labels()
        target = str(rng.choice(goal_objects))
        others = [o for o in goal_objects if o != target]
        landmark = str(rng.choice(others)) if others else target
        template = INSTRUCTION_TEMPLATES[int(rng.integers(len(INSTRUCTION_TEMPLATES)))]
        instruction = template.format(
            room=env.rooms[goal], target=target, landmark=landmark
        )
        return Episode(
            instruction=instruction,
            tokens=vocab.encode(instruction),
            start=int(start),
            goal=goal,
            target_object=target,
            max_steps=max_steps,
            seed=seed,
        )
    raise NoValidGoalError(
        f"no (start, goal) pair with {min_hops}..{max_hops} hops in env {env.seed}"
    )


# ---------------------------------------------------------------------------
# rollout
# ---------------------------------------------------------------------------
@dataclass
class Trajectory:
    nodes: tuple[int, ...]
    predicted_object: str | None
    step_scores: list = None  # per-step StepScores (model policies)
    demo_indices: list = None  # demonstrator action index per step
    actions: list = None

    @property
    def length(self) -> int:
        return len(self.nodes) - 1


def _demo_index(env, node, goal, candidates):
    action = demonstrator_action(env, node, goal)
    if action == STOP:
        return len(candidates)  # STOP logit sits after the candidates
    return candidates.index(action)


def rollout(env: NavEnvironment, episode: Episode, policy, mode: str = "argmax", rng=None) -> Trajectory:
    """Run `policy` from the episode start until STOP or the step budget.

    modes: "teacher" executes the demonstrator's action at every step
    (scores still recorded for loss computation), "argmax" follows the
    policy greedily, "sample" draws from the policy distribution.
    """
    if mode not in ("teacher", "argmax", "sample"):
        raise ValueError(f"unknown rollout mode: {mode}")
    if mode == "sample" and rng is None:
        rng = np.random.default_rng(0)

    policy.reset(env, episode)
    node = episode.start
    nodes = [node]
    step_scores, demo_indices, actions = [], [], []
    predicted = None
    for t in range(episode.max_steps + 1):
        result = policy.act(node)
        candidates = list(result.candidates)
        stop_index = len(candidates)
        if result.step_scores is not None:
            step_scores.append(result.step_scores)
        demo_indices.append(_demo_index(env, node, episode.goal, candidates))

        if mode == "teacher":
            action = demo_indices[-1]
        elif mode == "argmax":
            action = int(np.argmax(result.distribution))
        else:
            probs = np.asarray(result.distribution, dtype=float)
            action = int(rng.choice(len(probs), p=probs / probs.sum()))
        forced_stop = t == episode.max_steps
        if action == stop_index or forced_stop:
            actions.append(stop_index)
            predicted = result.predicted_object
            break
        actions.append(action)
        node = candidates[action]
        nodes.append(node)
    return Trajectory(
        nodes=tuple(nodes),
        predicted_object=predicted,
        step_scores=step_scores,
        demo_indices=demo_indices,
        actions=actions,
    )
