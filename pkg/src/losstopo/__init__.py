"""Topological barcodes and obstruction scores for differentiable loss landscapes."""

from .barcode import (Barcode, PersistenceDiagram, Segment, bottleneck_distance,
                      compute_barcode, ideal_barcode, to_diagram, to_score)
from .landscape import (Dataset, MlpSpec, ScalarField, eval_grad, eval_loss,
                        load_dataset, make_builtin, make_mlp_field, two_moons)
from .morse import (FiltrationComplex, SampledSimplex, SimplexConfig, build_complex,
                    index_r_to_score, make_complex, optimize_simplex, reduce_complex)
from .oracle import (ScalarGrid, brute_bottleneck, grid_sample, load_grid, save_grid,
                     sublevel_persistence)
from .pathopt import (PathConfig, PathState, PathTrace, distance_criterion,
                      loss_criterion, optimize_path, path_max_loss, proj, refine, step)
from .trainer import (Minimum, SchedulerSpec, find_minimum, sample_minima,
                      schedule_lr)

__version__ = "0.1.0"

__all__ = [
    "Barcode", "PersistenceDiagram", "Segment", "bottleneck_distance",
    "compute_barcode", "ideal_barcode", "to_diagram", "to_score",
    "Dataset", "MlpSpec", "ScalarField", "eval_grad", "eval_loss",
    "load_dataset", "make_builtin", "make_mlp_field", "two_moons",
    "FiltrationComplex", "SampledSimplex", "SimplexConfig", "build_complex",
    "index_r_to_score", "make_complex", "optimize_simplex", "reduce_complex",
    "ScalarGrid", "brute_bottleneck", "grid_sample", "load_grid", "save_grid",
    "sublevel_persistence",
    "PathConfig", "PathState", "PathTrace", "distance_criterion",
    "loss_criterion", "optimize_path", "path_max_loss", "proj", "refine", "step",
    "Minimum", "SchedulerSpec", "find_minimum", "sample_minima", "schedule_lr",
]
