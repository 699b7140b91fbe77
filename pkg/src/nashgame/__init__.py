"""Nash equilibria of constant-sum preference games and the solvers that find them.

The package computes regularized (quantal-response) and unregularized
equilibria of pairwise-preference matrix games, runs five logit-space
update rules in exact, noise-injected, and sample-estimated modes, and
ships a reproducible experiment harness with CSV/SVG output. A compiled
kernel accelerates exact-mode runs when available; a numpy fallback is
selected automatically otherwise (see nashgame._kernel.BACKEND).
"""

from ._kernel import BACKEND
from .bounds import (
    dualgap_linear_bound,
    exploitability_schedule,
    kl_linear_bound,
    kl_noise_floor,
    optimizer_to_theory_eta,
    theorem_step_size,
    theory_to_optimizer_eta,
)
from .errors import (
    ConfigError,
    ConvergenceError,
    InfiniteDivergenceError,
    InvalidInputError,
    NashGameError,
    NumericBlowupError,
    PlotError,
)
from .game import (
    EquilibriumCertificate,
    GameSpec,
    PreferenceMatrix,
    TabularPolicy,
    best_response,
    dual_gap,
    equilibrium_residual,
    kl_divergence,
    policy_probs,
    random_preference_matrix,
    random_ref_logits,
    regularized_dual_gap,
    regularized_value,
    solve_equilibrium,
    value,
)
from .harness import ExperimentConfig, load_config, parse_config, run_experiment, run_sweep
from .neural import MlpPolicy, ParamSnapshot, mlp_backward, mlp_forward, mlp_init, neural_step
from .records import CSV_HEADER, MetricRow, RunRecord
from .solvers import (
    ALGORITHMS,
    SigmaOperator,
    SolverRunConfig,
    StepOutcome,
    extragradient_step,
    extragradient_step_via_ipo,
    ipo_gradient,
    nash_md_pg_step,
    nash_md_step,
    omd_step,
    online_ipo2_step,
    product_pair_operator,
    run_solver,
    uniform_pair_operator,
)
from .stochastic import (
    RngStream,
    VectorEstimator,
    estimate_p_pi,
    inf_norm_square_diagnostic,
    preference_sample,
    sampled_ipo_gradient,
)

__version__ = "0.1.0"
