"""Configuration management for the entropy-manipulation toolkit."""

import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()

TOOL_VERSION = '0.3.0'

# Directory paths
BASE_DIR = Path(__file__).parent
CONFIGS_DIR = BASE_DIR / 'configs'
OUTPUT_DIR = Path(os.getenv('GEM_OUTPUT_DIR', BASE_DIR / 'output'))

# Worker pool size for sweeps (1 = sequential reference run)
DEFAULT_JOBS = int(os.getenv('GEM_JOBS', '1'))

# Base seed used when neither the config file nor --seed provides one
DEFAULT_SEED = 20240601

# Control loop rate shared by the tracker and the conveyor simulator (20 Hz)
CONTROL_DT = 0.05

# MazeNav entropy experiments
MAZE_DEFAULTS = {
    'size': 5,
    'max_steps': 200,
    'smoothing': 1e-3,
    'kl_reference': 'expert',   # 'expert' (point mass) or 'generating'
}

# Named sweep grids for the three maze experiments
MAZE_PRESETS = {
    'nuisance': {'n_m_max': [1, 3, 5], 'eta': [0.0], 'demo_count': [10, 20, 30, 40, 50]},
    'ambiguity': {'n_m_max': [1], 'eta': [0.0, 0.3, 0.6], 'demo_count': [10, 20, 30, 40, 50]},
    'heavy-noise': {'n_m_max': [10], 'eta': [0.9], 'demo_count': [50, 200, 1000]},
}

# Gaussian-process state estimator
GP_DEFAULTS = {
    'length_scale': 0.5,        # s
    'signal_variance': 1.0,     # m^2
    'noise_variance': 1e-4,     # m^2
    'window': 1.0,              # s of centroid history
}

# Kinematic effector and tracking loop
TRACKING_DEFAULTS = {
    'kp': 4.0,                  # 1/s
    'max_speed': 0.3,           # m/s
    'max_accel': 2.0,           # m/s^2
    'angular_rate': 1.5,        # rad/s
    'position_offset': [0.0, 0.0, 0.15],
    'orientation_preset': [0.0, 0.0, 0.0],
    'start_offset': [0.0, 0.05, 0.08],
    'centroid_noise': 0.001,    # m, std of the external centroid
    'stable_tol': 0.005,        # m
    'stable_hold': 1.0,         # s
    'duration': 10.0,           # s
    'search_horizon': 6.0,      # s, used by the stable-speed bisection
    'speed_resolution': 0.01,   # m/s
}

# Gaussian-mixture action heads
GMM_DEFAULTS = {
    'components': 5,
    'variance_floor': 1e-8,
    'max_iters': 200,
    'tol': 1e-9,
    'kmeans_iters': 10,
    'demos_per_episode': 20,
}

# Gated memory cell and the recitation toy
MEMORY_DEFAULTS = {
    'l_m': 8,
    'c': 16,
    'n_digits': 10,
    'init_scale': 0.5,
    'step_size': 0.5,
    'epochs': 5000,
    'grad_clip': 5.0,
}

# Conveyor-belt world
SIM_DEFAULTS = {
    'belt_speed': 0.1,          # m/s (default belt speed)
    'trajectory': 'linear',     # linear | s_curve | random_curve
    'amplitude': 0.05,          # m, S-curve lateral amplitude
    'wavelength': 0.5,          # m, S-curve period along the belt
    'smoothness': 0.3,          # m, random-curve knot spacing
    'lateral_scale': 0.03,      # m, random-curve knot std
    'belt_height': 0.0,
    'start_x': -0.6,
    'workspace_x': 0.9,         # object leaving past this x ends the episode
    'max_time': 40.0,           # s
    'point_noise': 0.0005,      # m, per-point depth noise
    'start_jitter': 0.02,       # m
    'grasp_tol': 0.01,          # m
    'rel_speed_tol': 0.05,      # m/s
    'container_tol': 0.02,      # m
    'insert_tol': 0.002,        # m
    'rotate_tol_deg': 5.0,
    'lift_height': 0.1,         # m
    'lateral_bias': 0.0,        # m, injected into manipulation offsets
    'workspace_radius': 0.3,    # m, bound on script offsets
    'reach_tol': 0.003,         # m
    'settle_steps': 3,
    'occlusions': [],           # list of [t_start, t_end]
    'tracking': True,           # False freezes the tracking term once manipulation starts
}

# Per-subcommand defaults; the keys double as the config-file schema
SUBCOMMAND_DEFAULTS = {
    'maze-sweep': {
        'preset': 'nuisance',
        'n_m_max': None,
        'eta': None,
        'demo_count': None,
        'seeds': 5,
        **MAZE_DEFAULTS,
    },
    'gp-demo': {
        'belt_speed': 0.1,
        'duration': 4.0,
        'noise_std': 0.002,
        'occlusion': [1.5, 2.0],
        **GP_DEFAULTS,
    },
    'tracking-sweep': {
        'speeds': [0.2, 0.6],
        'write_traces': True,
        **TRACKING_DEFAULTS,
    },
    'speed-sweep': {
        'skill': 'pick',
        'speeds': [0.05, 0.10, 0.25, 0.50],
        'episodes': 100,
        **SIM_DEFAULTS,
    },
    'motion-sweep': {
        'skill': 'pick',
        'variants': ['linear', 's_curve', 'random_curve'],
        'episodes': 100,
        **SIM_DEFAULTS,
    },
    'gmm-demo': {
        'separation': 0.2,
        'noise': 0.01,
        'episodes': 200,
        **GMM_DEFAULTS,
    },
    'memory-recite': {
        'length': 20,
        'seeds': 1,
        'memoryless': False,
        **MEMORY_DEFAULTS,
    },
    'episode': {
        'skill': 'pick',
        'write_trace': True,
        **SIM_DEFAULTS,
    },
}

# Logging configuration
LOG_LEVEL = os.getenv('GEM_LOG_LEVEL', 'INFO')
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
