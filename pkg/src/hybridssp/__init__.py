"""Shortest paths for many sources in a simulated hybrid (local + global) network."""
from .engine import (BandwidthViolation, HybridConfig, HybridEngine, Message, RoundContext, RoundLedger,
                     RoundLimitExceeded, adversary_drop, RandomizedDropPolicy)
from .graph import (INF, DistanceVector, GraphError, GraphSpec, WeightedGraph, dijkstra_oracle, generate_graph,
                    graph_diameter, hop_distance, hop_limited_distances, load_edgelist, save_edgelist)
from .minor import (MAX, MIN, OR, SUM, AggregationOperator, MinorNetwork, OverlayTree, aggregate, build_overlay_tree,
                    consensus, contract, ma_round)
from .euler import (EulerInstance, NetworkDecomposition, Orientation, euler_orient, extend_cluster,
                    network_decomposition, orient_cluster_cycles, orient_residual, power_graph)
from .skeleton import (HelperFamily, SkeletonGraph, SkeletonParams, build_skeleton, check_path_cover,
                       compute_helper_sets, sample_skeleton)
from .scheduler import (HelperAssignment, SkeletonAlgorithm, assign_algorithms, distribute_inputs, pair_helpers,
                        run_scheduled, standalone_run)
from .kssp import (DistanceTable, ProxyMap, find_proxy, kssp_arbitrary_sources, kssp_random_sources,
                   kssp_skeleton_sources, kssp_small, token_dissemination)
from .harness import ExperimentConfig, ExperimentReport, emit_scaling_table, run_experiment

__version__ = "0.1.0"
