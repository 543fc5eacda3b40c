"""pdlab: a primal-dual hitting-set laboratory.

Builds weighted hitting-set instances (including vertex-cover and set-cover
reductions), runs the general primal-dual approximation scheme with full
trajectory capture, certifies solutions against an exact branch-and-bound
oracle, replays the algorithm through a bipartite message-passing network
with constructive weights, and exports LP/MST files for external solvers.
"""

from .instances import (
    HittingSetInstance,
    Solution,
    from_set_cover,
    from_vertex_cover,
    is_hitting_set,
    make_instance,
    make_solution,
    solution_weight,
)
from .engine import (
    AlgoConfig,
    Trajectory,
    dual_variables,
    run_cover_msc,
    run_cover_mvc,
    run_general,
    verify_dual_feasibility,
)
from .oracle import OptimalSolution, solve_bruteforce, solve_optimal
from .neural import ModelWeights, analytic_weights, forward_step, rollout, verify_replication
from .bench import export_lp, export_mst, greedy_cleanup, parse_lp, parse_mst, ratio_report

__version__ = "0.1.0"
