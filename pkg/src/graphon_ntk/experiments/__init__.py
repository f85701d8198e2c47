"""Data generators, ingestion and experiment drivers."""

from .data import (OpinionConfig, load_edge_list, load_node_table, load_split, make_geometric_knn, make_sbm,
                   opinion_dataset, opinion_dynamics, save_edge_list, subsample_nodes)
from .drivers import (BoundInputs, ExperimentConfig, run_convergence_experiment, run_eigen_experiment,
                      run_experiment, run_width_experiment, sampled_bound)
