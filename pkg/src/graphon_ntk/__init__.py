"""Graph neural tangent kernels, their graphon limits and small-to-large transfer."""

from .exceptions import (ConvergenceError, DimensionError, IntegrityError, NumericError, ParseError,
                         ResolutionError, TrainingError, UnsupportedArchitectureError)
from .gntk import (BlockKernel, KernelBlock, assemble_block_kernel, bound_evaluate, gntk, gntk_cross,
                   ntk_jacobian, operator_norm_diff, upsample_block, wntk_reference)
from .graphons import (FunctionGraphon, FunctionSignal, SampleMode, SBMGraphon, StepGraphon, StepSignal,
                       apply_operator, graphon_l2_distance, induce_graphon, induce_signal, sample_graph,
                       sample_signal, signal_l2_distance)
from .graphs import (GnnWeights, Graph, TrainConfig, conv_perceptron_weights, eig_projection, empirical_ntk,
                     gnn_backprop, gnn_forward, gnn_train, graph_convolution, init_weights)
from .regression import (RegressionModel, fit_logistic, fit_ridge, predict, predict_proba,
                         transfer_evaluate)
from .spectral import SpectrumReport, kernel_spectrum, leading_subspace_distance, spectrum_convergence_curve

__version__ = "0.1.0"
