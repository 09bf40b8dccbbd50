"""Two-gripper block placement on a unit table (external disturbance).

The protagonist gripper starts on the right, the adversary gripper on the
left. Either gripper can grasp, carry or push the block; grippers cannot
pass through each other, and a block pushed off the table stays there.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import Env, EnvSpec, Mode, RewardKind

MOVE_SCALE = 0.1
CONTACT_RADIUS = 0.05
SUCCESS_RADIUS = 0.05
HORIZON = 50
PROTAGONIST_START = (0.85, 0.5)
ADVERSARY_START = (0.15, 0.5)
BLOCK_LOW, BLOCK_HIGH = 0.2, 0.8


@dataclass(frozen=True)
class PickLiteState:
    p: np.ndarray
    q_adv: np.ndarray
    b: np.ndarray
    grasp_p: bool
    grasp_a: bool
    goal: np.ndarray
    frozen: bool = False

    def vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.q_adv, self.b, [float(self.grasp_p), float(self.grasp_a)]])

    @classmethod
    def from_vector(cls, vec: np.ndarray, goal: np.ndarray) -> "PickLiteState":
        vec = np.asarray(vec, dtype=np.float64)
        b = vec[4:6].copy()
        return cls(vec[0:2].copy(), vec[2:4].copy(), b, bool(vec[6] > 0.5), bool(vec[7] > 0.5),
                   np.asarray(goal, dtype=np.float64), frozen=not on_table(b))


def on_table(b: np.ndarray) -> bool:
    return bool(np.all(b >= 0.0) and np.all(b <= 1.0))


def _contact_fraction(p0: np.ndarray, p1: np.ndarray, q0: np.ndarray, q1: np.ndarray) -> float:
    """Largest t in [0, 1] such that both grippers may travel the fraction t
    of their moves without their centres coming closer than the contact
    radius."""
    r0 = p0 - q0
    v = (p1 - p0) - (q1 - q0)
    a = float(v @ v)
    b = 2.0 * float(r0 @ v)
    if a == 0.0 or b >= 0.0:
        return 1.0
    c = max(float(r0 @ r0) - CONTACT_RADIUS**2, 0.0)
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return 1.0
    t = (-b - math.sqrt(disc)) / (2.0 * a)
    return min(max(t, 0.0), 1.0)


def _first_contact(block: np.ndarray, start: np.ndarray, end: np.ndarray) -> Optional[float]:
    """Fraction of the move ``start -> end`` at which the gripper first comes
    within the contact radius of ``block`` (0 if it starts there), or None."""
    d = end - start
    rel = block - start
    c = float(rel @ rel) - CONTACT_RADIUS**2
    if c <= 0.0:
        return 0.0
    a = float(d @ d)
    b = -2.0 * float(rel @ d)
    if a == 0.0 or b >= 0.0:
        return None
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return None
    t = (-b - math.sqrt(disc)) / (2.0 * a)
    return t if t <= 1.0 else None


def _push(block: np.ndarray, start: np.ndarray, end: np.ndarray) -> np.ndarray:
    """Block position after an open gripper sweeps from ``start`` to ``end``.

    The contact is found along the whole move, so a step longer than the
    contact radius cannot tunnel through the block. From first contact on,
    the block takes the remaining displacement projected on the contact
    normal; a final overlap resolution keeps it at the contact radius.
    """
    d = end - start
    t = _first_contact(block, start, end)
    if t is None or not d.any():
        return block
    unit = d / math.sqrt(float(d @ d))
    normal = block - (start + t * d)
    dist = float(np.linalg.norm(normal))
    normal = normal / dist if dist > 0.0 else unit
    along = float((1.0 - t) * (d @ normal))
    if along > 0.0:
        block = block + along * normal
    offset = block - end
    dist = float(np.linalg.norm(offset))
    if dist < CONTACT_RADIUS:
        block = end + CONTACT_RADIUS * (offset / dist if dist > 0.0 else unit)
    return block


def picklite_dynamics(state: PickLiteState, executed: np.ndarray) -> PickLiteState:
    """Advance the table by one kinematic step.

    ``executed`` is ``[dx_p, dy_p, grip_p, dx_a, dy_a, grip_a]``. Order of
    resolution: release, joint move with contact truncation, carry, then
    for each gripper in turn (protagonist first) grasp-on-contact when
    gripping or push when open, then the off-table freeze. A gripper that
    grasps mid-move carries the block for the rest of that move.
    """
    executed = np.asarray(executed, dtype=np.float64)
    grip_p, grip_a = executed[2] > 0.0, executed[5] > 0.0
    grasp_p = state.grasp_p and grip_p
    grasp_a = state.grasp_a and grip_a

    p_target = np.clip(state.p + MOVE_SCALE * executed[0:2], 0.0, 1.0)
    q_target = np.clip(state.q_adv + MOVE_SCALE * executed[3:5], 0.0, 1.0)
    t = _contact_fraction(state.p, p_target, state.q_adv, q_target)
    p = state.p + t * (p_target - state.p)
    q = state.q_adv + t * (q_target - state.q_adv)

    b = state.b.copy()
    if not state.frozen:
        if grasp_p:
            b = b + (p - state.p)
        elif grasp_a:
            b = b + (q - state.q_adv)
        else:
            for start, end, grip, who in ((state.p, p, grip_p, "p"), (state.q_adv, q, grip_a, "a")):
                contact = _first_contact(b, start, end) if grip else None
                if contact is not None:
                    b = b + (1.0 - contact) * (end - start)
                    grasp_p, grasp_a = who == "p", who == "a"
                    break
                b = _push(b, start, end)

    frozen = state.frozen or not on_table(b)
    if frozen:
        grasp_p = grasp_a = False
    return PickLiteState(p, q, b, grasp_p, grasp_a, state.goal, frozen)


def picklite_reward(block: np.ndarray, goal: np.ndarray) -> float:
    """Sparse reward: 0 when the block is within the success radius, else -1."""
    return 0.0 if np.linalg.norm(np.asarray(block) - np.asarray(goal)) < SUCCESS_RADIUS else -1.0


class PickLite2D(Env):
    env_id = "picklite2d"
    mode = Mode.EXTERNAL
    spec = EnvSpec(
        state_dim=8,
        protagonist_action_dim=3,
        adversary_action_dim=3,
        horizon=HORIZON,
        gamma=0.98,
        goal_conditioned=True,
        reward_kind=RewardKind.SPARSE,
        goal_dim=2,
    )

    def __init__(self) -> None:
        super().__init__()
        self.state: PickLiteState | None = None

    def _reset(self, rng: np.random.Generator) -> None:
        block = rng.uniform(BLOCK_LOW, BLOCK_HIGH, size=2)
        goal = rng.uniform(0.0, 1.0, size=2)
        self.state = PickLiteState(
            np.array(PROTAGONIST_START), np.array(ADVERSARY_START), block, False, False, goal
        )
        self.goal = goal

    def set_state(self, state: PickLiteState) -> None:
        """Place the table in an arbitrary configuration (fixtures, tests)."""
        self.state = state
        self.goal = state.goal
        self.t = 0
        self.done = False
        self.terminated = False
        self.success = False

    def _advance(self, executed: np.ndarray) -> tuple[float, bool, bool]:
        self.state = picklite_dynamics(self.state, executed)
        reward = picklite_reward(self.state.b, self.state.goal)
        return reward, reward == 0.0, False

    def observe(self) -> np.ndarray:
        return self.state.vector()

    def achieved_goal(self, state: np.ndarray) -> np.ndarray:
        return np.asarray(state, dtype=np.float64)[4:6].copy()

    def compute_reward(self, state: np.ndarray, goal: np.ndarray) -> float:
        return picklite_reward(self.achieved_goal(state), goal)
