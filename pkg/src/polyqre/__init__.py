"""Approximate Nash equilibria of polymatrix games via entropy-regularized residuals."""

from .algorithms import (
    FixedPointConfig,
    PGDConfig,
    RunTrace,
    run_fixed_point,
    run_pgd,
    stationarity_report,
)
from .consensus import build_graph, disagreement, extend, mix
from .game import (
    PolymatrixGame,
    best_response,
    delta_f,
    epsilon_gap,
    make_game,
    table1_game,
    utility,
    validate_game,
    zero_game,
)
from .projection import project
from .reduced import (
    ReducedGame,
    TruncatedBox,
    grad_residual,
    lift,
    pseudo_gradient,
    residual_l,
    residual_root,
    tau_max,
    total_residual,
    transform,
    truncated_box,
)

__version__ = "0.1.0"
