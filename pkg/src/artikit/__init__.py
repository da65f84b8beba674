"""Articulated 3D assets as kinematic trees embedded in part-labelled voxel grids."""

from .asset import ArticulatedAsset, load_asset, save_asset
from .codec import decode_joint, encode_joint
from .embedding import ArticulatedVoxelGrid, embed, recover
from .fusion import AttentionWeights, flow_matching_loss, integrate_flow, partwise_attention, vae_loss
from .kinematic_graph import (
    Joint,
    JointAxis,
    JointLimits,
    JointType,
    KinematicTree,
    Link,
    topological_order,
    validate_tree,
)
from .kinematics import ArticulationState, forward_kinematics, fraction_state, pose_asset, sample_states
from .mesh import TriMesh, read_obj, write_obj
from .metrics import EvalReport, chamfer, eval_protocol, psnr, sample_surface_points
from .retrieval import PartProposal, PartRepository, RetrievalMiss, assemble, retrieve_part
from .urdf import parse_urdf, write_urdf
from .voxel import SparseVoxelGrid, voxelize

__version__ = "0.1.0"

__all__ = [
    "ArticulatedAsset", "ArticulatedVoxelGrid", "ArticulationState", "AttentionWeights",
    "EvalReport", "Joint", "JointAxis", "JointLimits", "JointType", "KinematicTree", "Link",
    "PartProposal", "PartRepository", "RetrievalMiss", "SparseVoxelGrid", "TriMesh",
    "assemble", "chamfer", "decode_joint", "embed", "encode_joint", "eval_protocol",
    "flow_matching_loss", "forward_kinematics", "fraction_state", "integrate_flow", "load_asset",
    "parse_urdf", "partwise_attention", "pose_asset", "psnr", "read_obj", "recover",
    "retrieve_part", "sample_states", "sample_surface_points", "save_asset", "topological_order",
    "vae_loss", "validate_tree", "voxelize", "write_obj", "write_urdf",
]
