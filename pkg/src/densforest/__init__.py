"""densforest: random-partition density forests with candidate selection.

Fit piecewise-constant density estimators on purely random, adaptive, or
oblique partitions; select each tree from k candidates by cross-validated
ANLL; evaluate with MAE / ANLL harnesses against a Gaussian KDE baseline.
"""

from .partition import (
    AXIS_PARALLEL,
    OBLIQUE,
    OUTSIDE,
    AxisSplit,
    BoundingBox,
    Cell,
    ObliqueSplit,
    Partition,
    adaptive_oblique_partition,
    adaptive_partition,
    bounding_box_of,
    locate,
    purely_random_partition,
)
from .volume import (
    DEFAULT_MC_POINTS,
    VolumeTable,
    exact_box_volumes,
    monte_carlo_volumes,
)
from .density_tree import DensityTree, eval_tree, fit_tree, integrate_tree
from .forest import (
    ADAPTIVE_AXIS,
    ADAPTIVE_OBLIQUE,
    MODES,
    PURELY_RANDOM,
    Forest,
    ForestConfig,
    SelectionRecord,
    best_scored_tree,
    eval_forest,
    fit_forest,
    integrate_forest,
    tree_fold_assignment,
)
from .evaluation import (
    EPSILON,
    EvalReport,
    KFoldResult,
    MetricError,
    anll,
    anll_values,
    config_fingerprint,
    kfold_anll,
    mae,
)
from .datasets import (
    FAMILIES,
    TYPE1,
    TYPE2,
    UCI_EXPECTED_SHAPES,
    PreprocessState,
    SyntheticSpec,
    TabularData,
    apply_preprocess,
    fit_preprocess,
    load_csv,
    sample_synthetic,
    true_density,
    validate_uci_shape,
)
from .kde import KdeModel, eval_kde, fit_kde, scott_factor

__version__ = "0.1.0"
