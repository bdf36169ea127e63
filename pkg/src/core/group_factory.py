"""Factory for creating group instances by mode name."""

import logging
from functools import lru_cache
from typing import Dict, List, Type

from src.core.base_group import BaseGroup
from src.core.points import GroupMode, GroupPoint

logger = logging.getLogger(__name__)


class GroupFactory:
    """Factory class for creating group instances.

    Groups are registered by mode name; instances are cached per (mode, n)
    because they are stateless and shared by every module.
    """

    _registry: Dict[str, Type[BaseGroup]] = {}

    @classmethod
    def _ensure_builtin(cls) -> None:
        if not cls._registry:
            from src.groups.abelian import AbelianGroup
            from src.groups.heisenberg import HeisenbergGroup

            cls._registry[GroupMode.HEISENBERG.value] = HeisenbergGroup
            cls._registry[GroupMode.ABELIAN.value] = AbelianGroup
            logger.debug("Registered built-in groups: heisenberg, abelian")

    @classmethod
    def register_group(cls, mode: str, group_class: Type[BaseGroup]) -> None:
        """Register a group class under a mode name.

        Args:
            mode: Mode name (lowercase)
            group_class: BaseGroup subclass
        """
        cls._ensure_builtin()
        if mode in cls._registry:
            logger.warning(f"Group '{mode}' already registered, overwriting")
        cls._registry[mode] = group_class
        _cached_group.cache_clear()

    @classmethod
    def create_group(cls, mode: str, n: int) -> BaseGroup:
        """Return the group instance for a mode and dimension.

        Args:
            mode: "heisenberg" or "abelian" (case-insensitive)
            n: Dimension parameter

        Returns:
            Cached group instance

        Raises:
            ValueError: If the mode is not supported or n < 1
        """
        cls._ensure_builtin()
        key = str(getattr(mode, "value", mode)).lower()
        if key not in cls._registry:
            supported = ", ".join(cls.get_supported_modes())
            raise ValueError(f"Unsupported group mode: '{mode}'. Supported modes: {supported}")
        return _cached_group(key, int(n))

    @classmethod
    def for_point(cls, g: GroupPoint) -> BaseGroup:
        """Group instance a point belongs to."""
        return cls.create_group(g.mode.value, g.n)

    @classmethod
    def get_supported_modes(cls) -> List[str]:
        cls._ensure_builtin()
        return sorted(cls._registry)

    @classmethod
    def is_supported(cls, mode: str) -> bool:
        cls._ensure_builtin()
        return str(mode).lower() in cls._registry


@lru_cache(maxsize=None)
def _cached_group(mode: str, n: int) -> BaseGroup:
    group = GroupFactory._registry[mode](n)
    logger.info(f"Created group: {group}")
    return group
