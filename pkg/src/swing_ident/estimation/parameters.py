# src/swing_ident/estimation/parameters.py

def define_parameters():
    """
    Defines all default parameters for simulation, estimation and experiments.
    These are the committed defaults the reproduction runs on.
    """
    params = {}

    # --- Simulation ---
    params['simulation_params'] = {
        'duration_s': 27.0,
        'sample_rate_hz': 10.0,
        'max_step_s': 1e-3,
    }

    # --- Measurement Noise ---
    params['noise_params'] = {
        'max_level': 0.05,
    }

    # --- Surrogate Network ---
    params['network_params'] = {
        'hidden_size': 10,
    }

    # --- SINDy ---
    params['sindy_params'] = {
        'nu': 0.0,               # L1 weight; > 0 switches to sequential thresholding
        'max_threshold_iterations': 10,
        'b_check_tolerance': 0.2,
    }

    # --- PINN ---
    params['pinn_params'] = {
        'epochs': 20000,               # joint Adam epochs
        'learning_rate': 1e-2,
        'w_data': 10.0,
        'w_phys': 1.0,
        'lambda_init': (1.0, 1.0),     # (m, d); used when the warm-up fit gives no positive pair
        'hidden_size': 32,
        'warmup_epochs': 10000,        # data-only fit before lambda is initialized by least squares
        'lbfgs_iterations': 5000,      # 0 disables the L-BFGS refinement
        'log_every': 2000,
    }

    # --- BPINN / SVGD ---
    params['bpinn_params'] = {
        'n_particles': 30,
        'iterations': 3000,
        'stepsize': 1e-3,
        'warmup_epochs': 20000,        # per-particle data-only Adam fit before SVGD
        'warmup_learning_rate': 1e-2,
        'decay_every': 1000,
        'decay_factor': 0.5,
        'preconditioner': 'adagrad',   # 'adagrad' or 'plain'
        'adagrad_alpha': 0.9,
        'adagrad_fudge': 1e-6,
        'bandwidth_floor': 1e-6,
        'max_backoffs': 5,
        'log_every': 500,
        'snapshot_every': 0,           # 0 disables ensemble snapshots
    }
    params['prior_params'] = {
        'lambda_mean': 1.0,
        'lambda_scale_numerator': 5.0,   # scale = 5.0 / P_prec, read as a std
        'prec_shape': 1.0,
        'prec_rate': 0.1,
        'noise_prec_shape': 1.0,
        'noise_prec_rate': 0.1,
    }

    # --- Experiments ---
    params['experiment_params'] = {
        'scenarios': ['fd1', 'fd2', 'sd1', 'sd2'],
        'K_grid': [0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
        'T_grid': [27.0],
        'length_K_grid': [0.0, 0.01, 0.02, 0.03, 0.04, 0.05],
        'length_T_grid': [27.0, 24.0, 21.0, 18.0, 15.0, 12.0],
        'n_runs': 10,
        'algorithms': ['sindy', 'pinn', 'bpinn'],
        'base_seed': 0,
    }

    return params
