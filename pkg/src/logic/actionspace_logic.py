"""
Action Space Logic

Rules, validation and pose semantics for the eight action spaces.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import AbstractSet, Optional, Union

from src.logic.geometry_logic import GeometryLogic
from src.logic.grid_logic import GridLogic
from src.models.action_model import (
    Action,
    ActionSpaceKind,
    ActionSpaceRules,
    ContinuousPoint,
    Rejection,
    RejectionReason,
    Valid,
    VertexTarget,
)
from src.models.geometry_model import Pose, Vec3
from src.models.grid_model import GridDimensionality, GridSpec, VertexIndex
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

# kind -> (movement, continuous, rot_x, rot_y, annotated, home_obs, dimensionality)
_RULES_TABLE = {
    ActionSpaceKind.NAP: (False, False, False, False, True, True, GridDimensionality.THREE_D),
    ActionSpaceKind.TWO_D_NA: (True, False, False, False, False, True, GridDimensionality.TWO_D),
    ActionSpaceKind.TWO_D_A: (True, False, False, False, True, True, GridDimensionality.TWO_D),
    ActionSpaceKind.THREE_D_D: (True, False, False, False, True, True, GridDimensionality.THREE_D),
    ActionSpaceKind.THREE_D_C: (True, True, False, False, True, True, GridDimensionality.THREE_D),
    ActionSpaceKind.THREE_D_X: (True, True, True, False, True, True, GridDimensionality.THREE_D),
    ActionSpaceKind.THREE_D_X_N: (True, True, True, False, True, False, GridDimensionality.THREE_D),
    ActionSpaceKind.THREE_D_XY: (True, True, True, True, True, True, GridDimensionality.THREE_D),
}


class ActionSpaceLogic:
    """Business logic for action spaces."""

    @staticmethod
    def parse_kind(name: str) -> ActionSpaceKind:
        """Resolve an action space name such as "3Dx".

        Raises:
            ConfigError: For unknown names
        """
        try:
            return ActionSpaceKind(name)
        except ValueError:
            valid = ', '.join(k.value for k in ActionSpaceKind)
            raise ConfigError(f"Unknown action space '{name}' (expected one of: {valid})") from None

    @staticmethod
    def rules_for(kind: ActionSpaceKind, grid: Optional[GridSpec] = None) -> ActionSpaceRules:
        """Rules of an action space.

        Args:
            kind (ActionSpaceKind): The action space
            grid (GridSpec): Scene grid; its dimensionality and annotation are
                overridden by the kind. Defaults to the standard cube.

        Returns:
            ActionSpaceRules: The rules
        """
        movement, continuous, rot_x, rot_y, annotated, home_obs, dims = _RULES_TABLE[kind]
        base = grid if grid is not None else GridLogic.default_spec()
        spec = dataclasses.replace(base, dimensionality=dims, annotated=annotated)
        return ActionSpaceRules(
            kind=kind,
            grid=spec,
            allows_movement=movement,
            allows_continuous=continuous,
            allows_rot_x=rot_x,
            allows_rot_y=rot_y,
            annotated=annotated,
            include_home_obs=home_obs,
        )

    @staticmethod
    def target_position(rules: ActionSpaceRules, action: Action) -> Optional[Vec3]:
        if isinstance(action.target, VertexTarget):
            vertex = GridLogic.vertex_at(rules.grid, action.target.index)
            return vertex.position if vertex is not None else None
        return action.target.point

    @staticmethod
    def validate(rules: ActionSpaceRules, a: Action,
                 visited: AbstractSet[VertexIndex]) -> Union[Valid, Rejection]:
        """Check an action against the rules and the visited set.

        Args:
            rules (ActionSpaceRules): Active rules
            a (Action): Proposed action
            visited (set): Snapped vertices already visited

        Returns:
            Valid | Rejection: Valid carries the snapped vertex
        """
        if not rules.allows_movement:
            return Rejection(RejectionReason.WRONG_TARGET_TYPE, f"{rules.kind.value} admits no actions")

        position = ActionSpaceLogic.target_position(rules, a)
        if position is None:
            return Rejection(RejectionReason.OUT_OF_BOUNDS, f"Vertex {tuple(a.target.index)} is not on the grid")
        if isinstance(a.target, ContinuousPoint) and not GridLogic.contains(rules.grid, position):
            return Rejection(RejectionReason.OUT_OF_BOUNDS, f"Point {position.to_list()} is outside the grid cube")

        if isinstance(a.target, ContinuousPoint) != rules.allows_continuous:
            expected = 'continuous points' if rules.allows_continuous else 'grid vertices'
            return Rejection(RejectionReason.WRONG_TARGET_TYPE, f"{rules.kind.value} expects {expected}")

        if (a.rot_x_deg != 0 and not rules.allows_rot_x) or (a.rot_y_deg != 0 and not rules.allows_rot_y):
            return Rejection(RejectionReason.ROTATION_NOT_ALLOWED,
                             f"Rotation ({a.rot_x_deg}, {a.rot_y_deg}) not allowed in {rules.kind.value}")

        vertex = GridLogic.nearest_vertex(rules.grid, position)
        if vertex.index in visited:
            return Rejection(RejectionReason.REVISIT, f"Vertex {vertex.label or tuple(vertex.index)} was already visited")
        return Valid(vertex.index)

    @staticmethod
    def action_to_pose(rules: ActionSpaceRules, a: Action) -> Pose:
        """Camera pose commanded by a validated action.

        Args:
            rules (ActionSpaceRules): Active rules
            a (Action): A validated action

        Returns:
            Pose: Target position with the top-down orientation rotated about base x then y
        """
        position = ActionSpaceLogic.target_position(rules, a)
        if position is None:
            raise ValueError("Action target is not on the grid")
        return Pose(position, GeometryLogic.rotation_about_base(a.rot_x_deg, a.rot_y_deg))
