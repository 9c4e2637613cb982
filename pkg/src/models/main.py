"""
Main Models Module

Imports all value types for easy access.
"""

from src.models.geometry_model import CameraIntrinsics, HomogeneousTransform, Pose, UnitQuaternion, Vec3
from src.models.grid_model import GridDimensionality, GridSpec, GridVertex, OverlayPrimitiveSet, VertexIndex
from src.models.scene_model import HiddenAttribute, Marker, ObjectSpec, ObservationFacts, SceneSpec
from src.models.action_model import Action, ActionSpaceKind, ActionSpaceRules, Rejection, Valid
from src.models.agent_model import Answer, EnhancedObservation, Knowledge, Query
from src.models.episode_model import EpisodeConfig, EpisodeLog, EpisodeResult, StepRecord, TerminationReason
from src.models.metrics_model import CellMetrics, ComparisonRow, ExperimentConfig, MetricsRow, TrialOutcome
from src.models.vlm_model import EndpointConfig, ParsedReply, PromptBundle

__all__ = [
    'Action', 'ActionSpaceKind', 'ActionSpaceRules', 'Answer', 'CameraIntrinsics', 'CellMetrics',
    'ComparisonRow', 'EndpointConfig', 'EnhancedObservation', 'EpisodeConfig', 'EpisodeLog', 'EpisodeResult',
    'ExperimentConfig', 'GridDimensionality', 'GridSpec', 'GridVertex', 'HiddenAttribute', 'HomogeneousTransform',
    'Knowledge', 'Marker', 'MetricsRow', 'ObjectSpec', 'ObservationFacts', 'OverlayPrimitiveSet', 'ParsedReply',
    'Pose', 'PromptBundle', 'Query', 'Rejection', 'SceneSpec', 'StepRecord', 'TerminationReason', 'TrialOutcome',
    'UnitQuaternion', 'Valid', 'Vec3', 'VertexIndex',
]
