"""Asynchronous ad-investment control over renewal sites."""
from .controller import (DeficitQueue, Decision, consumption_rate, psi_value, revenue_rate,
                         select_action, update_queue, verify_drift_bound)
from .errors import (AdInvestError, ConfigError, DegenerateFrameError, InsufficientHorizonError,
                     InvalidActionError, QualityUndefinedError, SpecValidationError)
from .estimation import (EstimatedModel, EstimationConfig, QualityIndex, error_bounds,
                         perturb_model, scaled_budget, verify_quality)
from .model import (ActionTriple, Bounds, Noise, SiteSpec, SystemSpec, closed_form_site,
                    cross_actions, derive_bounds, eval_F, eval_G, load_spec, reference_system,
                    table_site, validate_spec)
from .oracle import (StationaryPolicy, compute_optimal, evaluate_policy, full_grid_optimal,
                     verify_bounds)
from .simulator import Metrics, Trace, compute_metrics, run, sample_frame, sweep

__version__ = "0.1.0"
