"""Simulation toolkit for Lipschitz bandits with a known symmetry group."""
from .geometry import ArmSpace, DeltaNet, build_grid_net, covering_check, distance, proposition1_bounds
from .group_action import (
    FiniteGroup,
    Isometry,
    apply,
    canonicalize,
    dirichlet_domain,
    domain_membership,
    find_free_point,
    make_group,
    orbit,
    stabilizer,
    verify_group,
)
from .orbit_graph import build_graph, clique_cover, neighborhood_of_orbit, vertices_covering_closure
from .mesh_index import approx_neighborhood, build_tree, locate
from .environments import (
    make_bump_instance,
    make_constant_f0,
    make_smooth_invariant_instance,
    sample_reward,
    strict_packing_of_domain,
    verify_instance,
)
from .policies import UCBN, InvariantUCB1, UniformMesh, UniformMeshN, choose_delta
from .harness import ExperimentConfig, fit_scaling, lemma_checks, run_episode, sweep

__version__ = "0.1.0"
