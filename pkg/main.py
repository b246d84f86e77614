#!/usr/bin/env python3
"""
GEM experiment runner

Runs the maze entropy sweeps, the GP and tracking demos, the conveyor-belt
skill sweeps, the two-target mixture demo and the memory recitation toy,
writing a manifest plus CSV results for each run.
"""

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

import config
from conveyor_sim import (
    ScriptError,
    WorldConfig,
    episode_trace_frame,
    run_episode,
    speed_sweep,
    trajectory_generalization,
)
from entropy_maze import DemoConfigError, run_entropy_sweep
from memory_cell import train_recite
from mixture_policy import MixtureError, two_target_demo
from run_config import ConfigError, load_config_file, resolve
from state_estimation import GpHyperparams, gp_demo
from tracking_control import max_stable_speed, tracking_sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED_CELLS = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130


class UsageError(ValueError):
    """Resolved settings that no subcommand can run with."""


@dataclass
class RunManifest:
    subcommand: str
    config: Dict
    seed: int
    output_dir: str
    tool_version: str
    started_at: str

    def write(self, out_dir: Path) -> Path:
        path = out_dir / 'manifest.json'
        with open(path, 'w') as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True, default=str)
        return path


class ExperimentRunner:
    """Dispatches one subcommand and owns its output directory."""

    def __init__(self, subcommand: str, settings: Dict, out_dir: Path, jobs: int = 1,
                 gnuplot: bool = False):
        self.subcommand = subcommand
        self.settings = settings
        self.out_dir = out_dir
        self.jobs = jobs
        self.gnuplot = gnuplot
        self.failures: List[Dict] = []

    @property
    def seed(self) -> int:
        return int(self.settings['seed'])

    def write_table(self, df: pd.DataFrame, name: str) -> Path:
        """Write a CSV (and a whitespace-separated .dat companion when requested)."""
        csv_path = self.out_dir / f"{name}.csv"
        df.to_csv(csv_path, index=False, float_format='%.12g')
        logger.info(f"Saved {len(df)} rows to {csv_path}")
        if self.gnuplot:
            dat_path = self.out_dir / f"{name}.dat"
            with open(dat_path, 'w') as f:
                f.write('# ' + ' '.join(df.columns) + '\n')
                df.to_csv(f, sep=' ', index=False, header=False, float_format='%.12g')
        return csv_path

    def write_json(self, data: Dict, name: str) -> Path:
        path = self.out_dir / f"{name}.json"
        with open(path, 'w') as f:
            json.dump(data, f, indent=2, sort_keys=True, default=float)
        return path

    def run(self) -> int:
        handlers: Dict[str, Callable[[], None]] = {
            'maze-sweep': self.maze_sweep,
            'gp-demo': self.gp_demo,
            'tracking-sweep': self.tracking_sweep,
            'speed-sweep': self.speed_sweep,
            'motion-sweep': self.motion_sweep,
            'gmm-demo': self.gmm_demo,
            'memory-recite': self.memory_recite,
            'episode': self.episode,
        }
        manifest = RunManifest(
            subcommand=self.subcommand, config=self.settings, seed=self.seed,
            output_dir=str(self.out_dir), tool_version=config.TOOL_VERSION,
            started_at=datetime.now().isoformat(timespec='seconds'),
        )
        logger.info(f"Manifest written to {manifest.write(self.out_dir)}")

        handlers[self.subcommand]()

        if self.failures:
            print(f"{len(self.failures)} failed cell(s):", file=sys.stderr)
            for failure in self.failures:
                print(f"  {json.dumps(failure, default=str)}", file=sys.stderr)
            return EXIT_FAILED_CELLS
        return EXIT_OK

    def maze_sweep(self):
        s = self.settings
        if s['preset'] not in config.MAZE_PRESETS:
            raise UsageError(f"unknown maze preset '{s['preset']}'")
        grid = dict(config.MAZE_PRESETS[s['preset']])
        for key in ('n_m_max', 'eta', 'demo_count'):
            if s.get(key) is not None:
                grid[key] = s[key]
        if not all(grid.values()):
            raise UsageError("maze sweep grid has an empty axis")

        result = run_entropy_sweep(
            grid['n_m_max'], grid['eta'], grid['demo_count'], seeds=s['seeds'],
            base_seed=self.seed, jobs=self.jobs, size=s['size'], max_steps=s['max_steps'],
            smoothing=s['smoothing'], kl_reference=s['kl_reference'],
        )
        self.failures.extend(result.failures)
        self.write_table(result.raw, 'maze_raw')
        self.write_table(result.aggregate, 'maze_agg')

    def gp_demo(self):
        s = self.settings
        hyper = GpHyperparams(length_scale=s['length_scale'], signal_variance=s['signal_variance'],
                              noise_variance=s['noise_variance'])
        occlusion = s['occlusion'] or None
        df = gp_demo(belt_speed=s['belt_speed'], duration=s['duration'], noise_std=s['noise_std'],
                     occlusion=occlusion, hyper=hyper, window=s['window'], seed=self.seed)
        self.write_table(df, 'gp_demo')

    def tracking_sweep(self):
        s = self.settings
        if not s['speeds']:
            raise UsageError("tracking sweep needs at least one speed")
        sweep, traces = tracking_sweep(s['speeds'], s, seed=self.seed)
        self.write_table(sweep, 'tracking_sweep')
        if s['write_traces']:
            for speed, trace in traces.items():
                self.write_table(trace, f"tracking_trace_{speed:.2f}")

        best = max_stable_speed(s, seed=self.seed)
        self.write_table(pd.DataFrame([{'max_speed': s['max_speed'], 'max_stable_speed': best}]),
                         'tracking_max_speed')

    def speed_sweep(self):
        s = self.settings
        if not s['speeds']:
            raise UsageError("speed sweep needs at least one speed")
        table, failures = speed_sweep(s['skill'], s['speeds'], episodes=s['episodes'],
                                      seed=self.seed, world=WorldConfig.from_params(s),
                                      jobs=self.jobs)
        self.failures.extend(failures)
        self.write_table(table, 'speed_sweep')

    def motion_sweep(self):
        s = self.settings
        if not s['variants']:
            raise UsageError("motion sweep needs at least one trajectory variant")
        table, failures = trajectory_generalization(s['skill'], s['variants'],
                                                    episodes=s['episodes'], seed=self.seed,
                                                    world=WorldConfig.from_params(s),
                                                    jobs=self.jobs)
        self.failures.extend(failures)
        self.write_table(table, 'motion_sweep')

    def gmm_demo(self):
        s = self.settings
        df = two_target_demo(separation=s['separation'], noise=s['noise'], episodes=s['episodes'],
                             seed=self.seed, demos_per_episode=s['demos_per_episode'])
        self.write_table(df, 'gmm_demo')

    def memory_recite(self):
        s = self.settings
        for index in range(s['seeds']):
            run_seed = int(np.random.SeedSequence([self.seed, index]).generate_state(1)[0])
            result = train_recite(
                length=s['length'], epochs=s['epochs'], step_size=s['step_size'], seed=run_seed,
                l_m=s['l_m'], c=s['c'], n_digits=s['n_digits'], grad_clip=s['grad_clip'],
                init_scale=s['init_scale'], memoryless=s['memoryless'],
            )
            logger.info(f"Seed {index}: final recitation accuracy {result.final_accuracy:.2%}")
            self.write_table(result.curve, f"memory_curve_s{index}")
            self.write_json({'sequence': result.sequence, 'memoryless': result.memoryless,
                             'params': result.params.to_dict()},
                            f"memory_params_s{index}")

    def episode(self):
        s = self.settings
        result = run_episode(s['skill'], WorldConfig.from_params(s), seed=self.seed)
        summary = {
            'skill': result.skill.value,
            'success': result.success,
            'failure_reason': result.failure_reason.value if result.failure_reason else None,
            'stable_time_s': result.stable_time,
            'end_time_s': result.end_time,
            **result.detail,
        }
        self.write_json(summary, 'episode_result')
        if s['write_trace']:
            self.write_table(episode_trace_frame(result), 'episode_trace')
        print(json.dumps(summary, indent=2, default=float))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='GEM entropy and hybrid-control experiments')
    subparsers = parser.add_subparsers(dest='subcommand', required=True)

    for name in config.SUBCOMMAND_DEFAULTS:
        sub = subparsers.add_parser(name)
        sub.add_argument('--config', type=Path, help='JSON config file for this subcommand')
        sub.add_argument('--out', type=Path, help='Output directory (default: output/<subcommand>)')
        sub.add_argument('--seed', type=int, help='Base seed (unsigned 64-bit)')
        sub.add_argument('--jobs', type=int, default=config.DEFAULT_JOBS,
                         help='Worker processes for sweeps (1 = sequential)')
        sub.add_argument('--gnuplot', action='store_true',
                         help='Also write whitespace-separated .dat files')
        if name == 'maze-sweep':
            sub.add_argument('--preset', choices=sorted(config.MAZE_PRESETS))
        if name in ('speed-sweep', 'motion-sweep', 'episode'):
            sub.add_argument('--skill', choices=['pick', 'put', 'rotate', 'insert'])
            sub.add_argument('--no-tracking', dest='tracking', action='store_const', const=False,
                             help='Freeze the tracking term once manipulation starts')
        if name in ('speed-sweep', 'motion-sweep', 'gmm-demo'):
            sub.add_argument('--episodes', type=int)
        if name == 'memory-recite':
            sub.add_argument('--length', type=int)
            sub.add_argument('--memoryless', action='store_const', const=True,
                             help='Clear the memory before every step')
    return parser


def setup_logging(out_dir: Path, subcommand: str):
    logging.basicConfig(
        level=config.LOG_LEVEL,
        format=config.LOG_FORMAT,
        handlers=[
            logging.FileHandler(out_dir / f'{subcommand}.log'),
            logging.StreamHandler()
        ],
        force=True,
    )


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        print(f"error: --seed must be an unsigned 64-bit integer, got {args.seed}", file=sys.stderr)
        return EXIT_USAGE

    out_dir = args.out or config.OUTPUT_DIR / args.subcommand
    out_dir.mkdir(parents=True, exist_ok=True)
    setup_logging(out_dir, args.subcommand)

    overrides = {
        'seed': args.seed,
        'preset': getattr(args, 'preset', None),
        'skill': getattr(args, 'skill', None),
        'episodes': getattr(args, 'episodes', None),
        'length': getattr(args, 'length', None),
        'tracking': getattr(args, 'tracking', None),
        'memoryless': getattr(args, 'memoryless', None),
    }

    try:
        file_values = load_config_file(args.subcommand, args.config) if args.config else {}
        settings = resolve(args.subcommand, file_values, overrides)
        runner = ExperimentRunner(args.subcommand, settings, out_dir,
                                  jobs=max(1, args.jobs), gnuplot=args.gnuplot)
        status = runner.run()
        logger.info(f"{args.subcommand} complete (exit {status}); results in {out_dir}")
        return status

    except (ConfigError, UsageError, DemoConfigError, MixtureError, ScriptError) as e:
        logger.error(f"{args.subcommand}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        logger.info(f"{args.subcommand} interrupted by user")
        return EXIT_INTERRUPTED
    except Exception as e:
        logger.error(f"{args.subcommand} failed with error: {e}", exc_info=True)
        raise


if __name__ == '__main__':
    sys.exit(main())
