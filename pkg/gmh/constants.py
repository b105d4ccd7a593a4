# Cholesky jitter escalation, relative to mean(diag)
jitter_initial = 1e-10
jitter_maximum = 1e-6
jitter_growth = 10.0

symmetry_tolerance = 1e-12
singular_time_tolerance = 1e-12
square_root_tolerance = 1e-12

# Adaptive Metropolis
optimal_scale_numerator = 2.38**2
covariance_regularization = 1e-8
covariance_warmup = 100
robbins_monro_exponent = 0.6
recommended_acceptance_band = (0.15, 0.5)
hmc_target_acceptance = 0.65

# Slice procedures
stepping_out_cap = 1000
shrink_cap = 1000
recursive_proposal_cap = 10_000

# Pseudo-marginal
log_estimate_variance_band = (0.5**2, 1.5**2)
particle_cap = 1_000_000
minimum_tuning_replicates = 20

# Diagnostics
sokal_window_constant = 5.0
minimum_series_length = 100
moment_z_threshold = 4.0

# Reference dataset
reference_seed = 20170401
reference_length = 100
reference_log_variance = 0.0

trace_fixed_columns = ("iteration",)
trace_metadata_columns = ("log_density", "accepted", "proposals_evaluated")
