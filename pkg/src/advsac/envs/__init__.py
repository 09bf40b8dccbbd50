"""Environment registry."""

from __future__ import annotations

from ..core import Env
from ..errors import ConfigError
from .bandit import BilinearBandit
from .picklite import PickLite2D
from .pointgoal import PointGoal
from .turnlite import TurnLite

REGISTRY: dict[str, type[Env]] = {
    TurnLite.env_id: TurnLite,
    PickLite2D.env_id: PickLite2D,
    PointGoal.env_id: PointGoal,
    BilinearBandit.env_id: BilinearBandit,
}


def make_env(env_id: str) -> Env:
    try:
        return REGISTRY[env_id]()
    except KeyError:
        raise ConfigError(f"unknown env_id {env_id!r}; known: {sorted(REGISTRY)}") from None


__all__ = ["REGISTRY", "make_env", "TurnLite", "PickLite2D", "PointGoal", "BilinearBandit"]
