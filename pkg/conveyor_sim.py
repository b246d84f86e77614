"""
Kinematic conveyor-belt world with scripted track-then-manipulate skills.

Objects ride parametric belt trajectories; the effector is the point-mass
stand-in from tracking_control. Each episode runs at 20 Hz: the tracking
phase follows GP estimates of the external-view top centroid until the
wrist view reports stable tracking, then the skill script adds its
manipulation offsets and gripper commands on top of the tracking action.
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.interpolate import CubicSpline
from scipy.spatial.transform import Rotation

import config
from state_estimation import GpHyperparams, ObjectStateEstimator
from sweep_pool import run_cells
from tracking_control import (
    EffectorState,
    ManipulationOffset,
    TrackingGains,
    TrackingOffsets,
    compose_target,
    error_norm,
    is_stable_tracking,
    step_effector,
    top_centroid,
    tracking_action,
    wrap_angle,
)

logger = logging.getLogger(__name__)

VARIANTS = ('linear', 's_curve', 'random_curve')
RESULT_COLUMNS = ['skill', 'variant', 'speed', 'episodes', 'successes', 'rate']

# Box geometry: 4 cm cube items, 12 cm wide, 6 cm tall containers
ITEM_SIZE = (0.04, 0.04, 0.04)
CONTAINER_SIZE = (0.12, 0.12, 0.06)
SURFACE_GRID = 5


class ScriptError(ValueError):
    """Raised for skill scripts that cannot run in the configured workspace."""


class Skill(str, Enum):
    PICK = 'pick'
    PUT = 'put'
    ROTATE = 'rotate'
    INSERT = 'insert'


class FailureReason(str, Enum):
    TRACKING_NEVER_STABLE = 'tracking_never_stable'
    GRASP_MISSED = 'grasp_missed'
    DROP_MISSED = 'drop_missed'
    ROTATION_MISSED = 'rotation_missed'
    TIMEOUT = 'timeout'


class GripperStatus(str, Enum):
    OPEN = 'open'
    CLOSED = 'closed'
    HOLDING = 'holding'


@dataclass
class WorldConfig:
    """Everything an episode needs; built from a config-file dictionary."""
    belt_speed: float = config.SIM_DEFAULTS['belt_speed']
    trajectory: str = config.SIM_DEFAULTS['trajectory']
    amplitude: float = config.SIM_DEFAULTS['amplitude']
    wavelength: float = config.SIM_DEFAULTS['wavelength']
    smoothness: float = config.SIM_DEFAULTS['smoothness']
    lateral_scale: float = config.SIM_DEFAULTS['lateral_scale']
    belt_height: float = config.SIM_DEFAULTS['belt_height']
    start_x: float = config.SIM_DEFAULTS['start_x']
    workspace_x: float = config.SIM_DEFAULTS['workspace_x']
    max_time: float = config.SIM_DEFAULTS['max_time']
    point_noise: float = config.SIM_DEFAULTS['point_noise']
    start_jitter: float = config.SIM_DEFAULTS['start_jitter']
    grasp_tol: float = config.SIM_DEFAULTS['grasp_tol']
    rel_speed_tol: float = config.SIM_DEFAULTS['rel_speed_tol']
    container_tol: float = config.SIM_DEFAULTS['container_tol']
    insert_tol: float = config.SIM_DEFAULTS['insert_tol']
    rotate_tol_deg: float = config.SIM_DEFAULTS['rotate_tol_deg']
    lift_height: float = config.SIM_DEFAULTS['lift_height']
    lateral_bias: float = config.SIM_DEFAULTS['lateral_bias']
    workspace_radius: float = config.SIM_DEFAULTS['workspace_radius']
    reach_tol: float = config.SIM_DEFAULTS['reach_tol']
    settle_steps: int = config.SIM_DEFAULTS['settle_steps']
    occlusions: List[List[float]] = field(default_factory=list)
    tracking: bool = config.SIM_DEFAULTS['tracking']
    kp: float = config.TRACKING_DEFAULTS['kp']
    max_speed: float = config.TRACKING_DEFAULTS['max_speed']
    max_accel: float = config.TRACKING_DEFAULTS['max_accel']
    angular_rate: float = config.TRACKING_DEFAULTS['angular_rate']
    position_offset: List[float] = field(
        default_factory=lambda: list(config.TRACKING_DEFAULTS['position_offset']))
    stable_tol: float = config.TRACKING_DEFAULTS['stable_tol']
    stable_hold: float = config.TRACKING_DEFAULTS['stable_hold']
    dt: float = config.CONTROL_DT

    @classmethod
    def from_params(cls, params: Optional[Dict] = None) -> 'WorldConfig':
        """Pick the world keys out of a (possibly larger) resolved config."""
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in (params or {}).items() if k in known})

    def validate(self):
        if self.trajectory not in VARIANTS:
            raise ScriptError(f"unknown trajectory variant '{self.trajectory}'")
        if self.belt_speed < 0:
            raise ScriptError(f"belt_speed must be >= 0, got {self.belt_speed}")
        if self.dt <= 0 or self.max_time <= 0:
            raise ScriptError("dt and max_time must be > 0")
        windows = sorted(self.occlusions)
        for (a0, a1), (b0, _) in zip(windows, windows[1:]):
            if a1 > b0:
                raise ScriptError(f"occlusion windows overlap: [{a0}, {a1}] and [{b0}, ...]")
        for start, end in windows:
            if end <= start:
                raise ScriptError(f"empty occlusion window [{start}, {end}]")


@dataclass
class BeltTrajectory:
    """Object path on the belt: linear, S-shaped or a seeded random curve."""
    variant: str = 'linear'
    speed: float = config.SIM_DEFAULTS['belt_speed']
    start: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    direction: Tuple[float, float] = (1.0, 0.0)
    amplitude: float = config.SIM_DEFAULTS['amplitude']
    wavelength: float = config.SIM_DEFAULTS['wavelength']
    smoothness: float = config.SIM_DEFAULTS['smoothness']
    lateral_scale: float = config.SIM_DEFAULTS['lateral_scale']
    seed: int = 0
    horizon: float = 5.0   # m of path covered by the random-curve knots
    _curve: Optional[CubicSpline] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ScriptError(f"unknown trajectory variant '{self.variant}'")
        if self.speed < 0:
            raise ScriptError(f"speed must be >= 0, got {self.speed}")
        if self.variant == 's_curve' and (self.amplitude <= 0 or self.wavelength <= 0):
            raise ScriptError("s_curve needs amplitude > 0 and wavelength > 0")
        if self.variant == 'random_curve':
            if self.smoothness <= 0:
                raise ScriptError(f"smoothness must be > 0, got {self.smoothness}")
            knots = max(int(np.ceil(self.horizon / self.smoothness)), 3) + 1
            rng = np.random.default_rng(self.seed)
            lateral = rng.normal(0.0, self.lateral_scale, size=knots)
            lateral[0] = 0.0
            self._curve = CubicSpline(np.arange(knots) * self.smoothness, lateral)
        norm = np.hypot(*self.direction)
        if norm == 0:
            raise ScriptError("direction must be non-zero")
        self.direction = (self.direction[0] / norm, self.direction[1] / norm)

    def lateral(self, s: float) -> Tuple[float, float]:
        """Lateral displacement and its slope at forward distance s."""
        if self.variant == 's_curve':
            k = 2.0 * np.pi / self.wavelength
            return self.amplitude * np.sin(k * s), self.amplitude * k * np.cos(k * s)
        if self.variant == 'random_curve':
            return float(self._curve(s)), float(self._curve(s, 1))
        return 0.0, 0.0


def object_pose(trajectory: BeltTrajectory, t: float) -> Tuple[np.ndarray, float]:
    """Base-centre position and yaw of an object following `trajectory` at time t."""
    if t < 0:
        raise ValueError(f"t must be >= 0, got {t}")
    s = trajectory.speed * t
    start = np.asarray(trajectory.start, dtype=float)
    if trajectory.variant == 'linear':
        dx, dy = trajectory.direction
        return start + s * np.array([dx, dy, 0.0]), float(np.arctan2(dy, dx))
    offset, slope = trajectory.lateral(s)
    return start + np.array([s, offset, 0.0]), float(np.arctan(slope))


def object_velocity(trajectory: BeltTrajectory, t: float, h: float = 1e-4) -> np.ndarray:
    lo = max(t - h, 0.0)
    return (object_pose(trajectory, t + h)[0] - object_pose(trajectory, lo)[0]) / (t + h - lo)


@dataclass
class SceneObject:
    id: int
    size: Tuple[float, float, float]
    trajectory: BeltTrajectory
    occlusion_windows: List[Tuple[float, float]] = field(default_factory=list)
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def top_height(self) -> float:
        return self.size[2]

    @property
    def grasp_point(self) -> np.ndarray:
        """Top centre, in the object frame."""
        return np.array([0.0, 0.0, self.top_height])

    def rotation(self) -> Rotation:
        return Rotation.from_euler('z', self.yaw)

    def grasp_world(self) -> np.ndarray:
        return self.position + self.rotation().apply(self.grasp_point)

    def top_points(self) -> np.ndarray:
        """Symmetric grid over the top face, world frame, no noise."""
        half_l, half_w = self.size[0] / 2, self.size[1] / 2
        u, v = np.meshgrid(np.linspace(-half_l, half_l, SURFACE_GRID),
                           np.linspace(-half_w, half_w, SURFACE_GRID))
        local = np.column_stack([u.ravel(), v.ravel(), np.full(u.size, self.top_height)])
        return self.position + self.rotation().apply(local)

    def occluded(self, t: float) -> bool:
        return any(start <= t < end for start, end in self.occlusion_windows)

    def follow_belt(self, t: float):
        self.position, self.yaw = object_pose(self.trajectory, t)
        self.velocity = object_velocity(self.trajectory, t)


@dataclass
class Gripper:
    status: GripperStatus = GripperStatus.OPEN
    held_id: Optional[int] = None
    rel_position: Optional[np.ndarray] = None
    rel_yaw: float = 0.0


@dataclass
class SimState:
    time: float
    objects: Dict[int, SceneObject]
    effector: EffectorState
    gripper: Gripper
    rng: np.random.Generator

    def effector_rotation(self) -> Rotation:
        return Rotation.from_euler('xyz', self.effector.orientation)

    def attach(self, object_id: int):
        if self.gripper.held_id is not None:
            raise ScriptError(f"already holding object {self.gripper.held_id}")
        obj = self.objects[object_id]
        inv = self.effector_rotation().inv()
        self.gripper = Gripper(
            status=GripperStatus.HOLDING, held_id=object_id,
            rel_position=inv.apply(obj.position - self.effector.position),
            rel_yaw=float(wrap_angle(obj.yaw - self.effector.orientation[2])),
        )

    def release(self) -> Optional[SceneObject]:
        held = self.objects.get(self.gripper.held_id) if self.gripper.held_id is not None else None
        self.gripper = Gripper(status=GripperStatus.OPEN)
        return held

    def advance_objects(self):
        for obj in self.objects.values():
            if obj.id == self.gripper.held_id:
                obj.position = self.effector.position + self.effector_rotation().apply(
                    self.gripper.rel_position)
                obj.yaw = float(wrap_angle(self.effector.orientation[2] + self.gripper.rel_yaw))
                obj.velocity = self.effector.velocity.copy()
            else:
                obj.follow_belt(self.time)


@dataclass
class Observation:
    """External view per object id (None while occluded) and the wrist view."""
    external: Dict[int, Optional[np.ndarray]]
    wrist: Dict[int, np.ndarray]


def synth_observation(state: SimState, noise_std: float) -> Observation:
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    inv = state.effector_rotation().inv()
    external, wrist = {}, {}
    for obj_id, obj in sorted(state.objects.items()):
        points = obj.top_points()
        if noise_std > 0:
            points = points + state.rng.normal(0.0, noise_std, size=points.shape)
        external[obj_id] = None if obj.occluded(state.time) else points
        wrist[obj_id] = inv.apply(points - state.effector.position)
    return Observation(external=external, wrist=wrist)


@dataclass(frozen=True)
class Waypoint:
    """Manipulation offset in the tracking frame and the gripper command issued on arrival."""
    name: str
    delta_position: Tuple[float, float, float]
    delta_yaw: float = 0.0
    gripper: Optional[str] = None       # 'close' | 'open'

    def offset(self) -> ManipulationOffset:
        return ManipulationOffset(delta_position=np.array(self.delta_position, dtype=float),
                                  delta_orientation=np.array([0.0, 0.0, self.delta_yaw]))


@dataclass(frozen=True)
class SkillScript:
    skill: Skill
    waypoints: Tuple[Waypoint, ...]
    target_id: int
    held_id: Optional[int] = None

    def finished(self, waypoint_index: int) -> bool:
        """Finish flag: every waypoint reached and its gripper command issued."""
        return waypoint_index >= len(self.waypoints)

    def validate(self, world: WorldConfig):
        if not self.waypoints:
            raise ScriptError(f"{self.skill.value} script has no waypoints")
        for wp in self.waypoints:
            magnitude = float(np.linalg.norm(wp.delta_position))
            if not np.isfinite(magnitude) or magnitude > world.workspace_radius:
                raise ScriptError(f"waypoint '{wp.name}' offset {magnitude:.3f} m exceeds the "
                                  f"workspace radius {world.workspace_radius} m")


TARGET_ID = 1
ITEM_ID = 2


def make_script(skill, world: WorldConfig) -> SkillScript:
    """Scripted stand-in for the manipulation policy of each skill."""
    skill = Skill(skill)
    bias = world.lateral_bias
    hover = world.position_offset[2]

    if skill in (Skill.PICK, Skill.ROTATE):
        waypoints = [
            Waypoint('descend', (0.0, bias, -hover), gripper='close'),
            Waypoint('lift', (0.0, bias, -hover + world.lift_height)),
        ]
        if skill is Skill.ROTATE:
            waypoints.append(Waypoint('rotate', (0.0, bias, -hover + world.lift_height),
                                      delta_yaw=np.pi / 2, gripper='open'))
        return SkillScript(skill=skill, waypoints=tuple(waypoints), target_id=TARGET_ID)

    # Put and Insert: lower the held item's base to just above (Put) or into (Insert) the rim
    item_height = ITEM_SIZE[2]
    clearance = 0.01 if skill is Skill.PUT else -0.01
    drop_z = -hover + item_height + clearance
    waypoints = (
        Waypoint('align', (0.0, bias, -hover / 2)),
        Waypoint('lower', (0.0, bias, drop_z), gripper='open'),
    )
    return SkillScript(skill=skill, waypoints=waypoints, target_id=TARGET_ID, held_id=ITEM_ID)


@dataclass
class EpisodeResult:
    skill: Skill
    success: bool
    failure_reason: Optional[FailureReason]
    trace: List[Dict]
    stable_time: Optional[float] = None
    end_time: float = 0.0
    detail: Dict = field(default_factory=dict)


TRACE_COLUMNS = [
    't', 'phase', 'waypoint', 'stable',
    'obj_x', 'obj_y', 'obj_z', 'est_x', 'est_y', 'est_z',
    'eff_x', 'eff_y', 'eff_z', 'eff_yaw',
    'offset_x', 'offset_y', 'offset_z', 'track_err', 'gripper',
]


def episode_trace_frame(result: EpisodeResult) -> pd.DataFrame:
    return pd.DataFrame(result.trace, columns=TRACE_COLUMNS)


class EpisodeRunner:
    """Runs one scripted episode; all randomness comes from the episode's own stream."""

    def __init__(self, script: SkillScript, world: WorldConfig, seed: int):
        world.validate()
        script.validate(world)
        self.script = script
        self.world = world
        self.seed = seed
        self.gains = TrackingGains(kp=world.kp, angular_rate=world.angular_rate)
        self.offsets = TrackingOffsets(position_offset=np.asarray(world.position_offset, dtype=float),
                                       orientation_preset=np.zeros(3))
        self.state = self._build_scene(np.random.default_rng(seed))
        self.estimator = ObjectStateEstimator(hyper=GpHyperparams())
        self.trace: List[Dict] = []
        self.errors: List[Tuple[float, float]] = []

    def _build_scene(self, rng: np.random.Generator) -> SimState:
        world = self.world
        jitter = rng.uniform(-world.start_jitter, world.start_jitter, size=2)
        curve_seed = int(rng.integers(2 ** 32))
        trajectory = BeltTrajectory(
            variant=world.trajectory, speed=world.belt_speed,
            start=(world.start_x + jitter[0], jitter[1], world.belt_height),
            amplitude=world.amplitude, wavelength=world.wavelength,
            smoothness=world.smoothness, lateral_scale=world.lateral_scale, seed=curve_seed,
        )
        size = ITEM_SIZE if self.script.held_id is None else CONTAINER_SIZE
        target = SceneObject(id=TARGET_ID, size=size, trajectory=trajectory,
                             occlusion_windows=[tuple(w) for w in sorted(world.occlusions)])
        target.follow_belt(0.0)
        objects = {TARGET_ID: target}

        # The effector starts 10 cm above the tracking pose of the object's first position
        home = target.position + np.array([0.0, 0.0, target.top_height]) + self.offsets.position_offset
        effector = EffectorState(position=home + np.array([0.0, 0.0, 0.1]),
                                 max_speed=world.max_speed, max_accel=world.max_accel)
        state = SimState(time=0.0, objects=objects, effector=effector,
                         gripper=Gripper(), rng=rng)

        if self.script.held_id is not None:
            item = SceneObject(id=self.script.held_id, size=ITEM_SIZE,
                               trajectory=BeltTrajectory(speed=0.0))
            item.position = effector.position - np.array([0.0, 0.0, ITEM_SIZE[2]])
            objects[item.id] = item
            state.attach(item.id)
        return state

    def _tracking_error(self, obs: Observation) -> float:
        """Wrist-view centroid distance from where it sits under perfect tracking."""
        expected = self.state.effector_rotation().inv().apply(-self.offsets.position_offset)
        return error_norm(top_centroid(obs.wrist[self.script.target_id]), expected)

    def _record(self, phase: str, waypoint: str, stable: bool, estimate: np.ndarray,
                offset: ManipulationOffset, track_err: float):
        obj = self.state.objects[self.script.target_id]
        top = obj.position + np.array([0.0, 0.0, obj.top_height])
        eff = self.state.effector
        self.trace.append({
            't': self.state.time, 'phase': phase, 'waypoint': waypoint, 'stable': stable,
            'obj_x': top[0], 'obj_y': top[1], 'obj_z': top[2],
            'est_x': estimate[0], 'est_y': estimate[1], 'est_z': estimate[2],
            'eff_x': eff.position[0], 'eff_y': eff.position[1], 'eff_z': eff.position[2],
            'eff_yaw': eff.orientation[2],
            'offset_x': offset.delta_position[0], 'offset_y': offset.delta_position[1],
            'offset_z': offset.delta_position[2],
            'track_err': track_err, 'gripper': self.state.gripper.status.value,
        })

    def _result(self, success: bool, reason: Optional[FailureReason],
                stable_time: Optional[float], **detail) -> EpisodeResult:
        if reason is not None:
            logger.debug(f"Episode seed {self.seed}: {self.script.skill.value} failed "
                         f"({reason.value}) at t={self.state.time:.2f}s")
        return EpisodeResult(skill=self.script.skill, success=success, failure_reason=reason,
                             trace=self.trace, stable_time=stable_time,
                             end_time=self.state.time, detail=detail)

    def _grasp(self) -> Tuple[bool, Dict]:
        target = self.state.objects[self.script.target_id]
        eff = self.state.effector
        grasp_err = error_norm(eff.position, target.grasp_world())
        rel_speed = float(np.linalg.norm(eff.velocity - target.velocity))
        ok = grasp_err < self.world.grasp_tol and rel_speed < self.world.rel_speed_tol
        if ok:
            self.state.attach(target.id)
        else:
            self.state.gripper = Gripper(status=GripperStatus.CLOSED)
        return ok, {'grasp_err_m': grasp_err, 'rel_speed': rel_speed}

    def _release(self) -> Tuple[bool, Dict]:
        skill = self.script.skill
        held = self.state.release()
        target = self.state.objects[self.script.target_id]
        if skill is Skill.ROTATE:
            error = abs(float(wrap_angle(target.yaw - self.goal_yaw)))
            return np.degrees(error) < self.world.rotate_tol_deg, {'yaw_err_deg': np.degrees(error)}
        tol = self.world.insert_tol if skill is Skill.INSERT else self.world.container_tol
        horizontal = float(np.linalg.norm(held.position[:2] - target.position[:2]))
        return horizontal < tol, {'drop_err_m': horizontal}

    def run(self) -> EpisodeResult:
        world, script, state = self.world, self.script, self.state
        steps = int(round(world.max_time / world.dt))
        stable_time = None
        waypoint_index, settled = 0, 0
        latched = None
        detail: Dict = {}
        self.goal_yaw = 0.0

        for k in range(steps + 1):
            state.time = k * world.dt
            state.advance_objects()
            target = state.objects[script.target_id]

            if target.position[0] > world.workspace_x:
                reason = (FailureReason.TRACKING_NEVER_STABLE if stable_time is None
                          else FailureReason.TIMEOUT)
                return self._result(False, reason, stable_time, **detail)

            obs = synth_observation(state, world.point_noise)
            external = obs.external[script.target_id]
            if external is not None and state.gripper.held_id != script.target_id:
                self.estimator.observe(state.time, top_centroid(external))
            if not self.estimator.ready:
                self._record('track', '', False, np.full(3, np.nan), ManipulationOffset(), np.nan)
                state.effector = step_effector(state.effector, compose_target(
                    tracking_action(state.effector.position - self.offsets.position_offset,
                                    np.zeros(3), self.offsets)), self.gains, world.dt)
                continue

            est_position, est_velocity = self.estimator.predict(state.time)
            track_err = self._tracking_error(obs)
            self.errors.append((state.time, track_err))

            if stable_time is None and is_stable_tracking(self.errors, world.stable_tol,
                                                          world.stable_hold):
                stable_time = state.time
                logger.debug(f"Episode seed {self.seed}: stable tracking at t={stable_time:.2f}s")

            offset = ManipulationOffset()
            name = ''
            if stable_time is not None:
                waypoint = script.waypoints[waypoint_index]
                offset, name = waypoint.offset(), waypoint.name

            if stable_time is not None and not world.tracking:
                # Open-loop manipulation: the tracking term stays where it was at stable time
                if latched is None:
                    latched = tracking_action(est_position, np.zeros(3), self.offsets)
                track = latched
            else:
                track = tracking_action(est_position, est_velocity, self.offsets)
            goal = compose_target(track, offset)
            self._record('manipulate' if stable_time is not None else 'track', name,
                         stable_time is not None, est_position, offset, track_err)

            if stable_time is not None:
                yaw_err = abs(float(wrap_angle(goal.orientation[2] - state.effector.orientation[2])))
                reached = (error_norm(goal.position, state.effector.position) < world.reach_tol
                           and yaw_err < 0.01)
                settled = settled + 1 if reached else 0
                if settled >= world.settle_steps:
                    settled = 0
                    command = script.waypoints[waypoint_index].gripper
                    if command == 'close':
                        ok, info = self._grasp()
                        detail.update(info)
                        if not ok:
                            return self._result(False, FailureReason.GRASP_MISSED, stable_time, **detail)
                        self.goal_yaw = float(wrap_angle(target.yaw + np.pi / 2))
                    elif command == 'open':
                        ok, info = self._release()
                        detail.update(info)
                        if not ok:
                            reason = (FailureReason.ROTATION_MISSED if script.skill is Skill.ROTATE
                                      else FailureReason.DROP_MISSED)
                            return self._result(False, reason, stable_time, **detail)
                    waypoint_index += 1
                    if script.finished(waypoint_index):
                        return self._result(True, None, stable_time, **detail)

            state.effector = step_effector(state.effector, goal, self.gains, world.dt)

        reason = FailureReason.TRACKING_NEVER_STABLE if stable_time is None else FailureReason.TIMEOUT
        return self._result(False, reason, stable_time, **detail)


def run_episode(skill, world: Optional[WorldConfig] = None,
                seed: int = config.DEFAULT_SEED) -> EpisodeResult:
    """
    Run one track-then-manipulate episode.

    Raises:
        ScriptError: invalid world config or a script outside the workspace
    """
    world = world or WorldConfig()
    script = skill if isinstance(skill, SkillScript) else make_script(skill, world)
    return EpisodeRunner(script, world, seed).run()


@dataclass(frozen=True)
class EpisodeCell:
    index: int
    skill: str
    world: Dict
    seed: int


def episode_seed(base_seed: int, episode: int) -> int:
    """Episode seeds shared across speeds and variants (common random numbers)."""
    state = np.random.SeedSequence([base_seed, episode]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def run_episode_cell(cell: EpisodeCell) -> bool:
    return run_episode(cell.skill, WorldConfig(**cell.world), cell.seed).success


def _success_table(skill: str, groups: Sequence[Tuple[str, float, Dict]], episodes: int,
                   seed: int, jobs: int) -> Tuple[pd.DataFrame, List[Dict]]:
    if episodes < 1:
        raise ScriptError(f"episodes must be >= 1, got {episodes}")
    cells = []
    for variant, speed, world in groups:
        for episode in range(episodes):
            cells.append(EpisodeCell(index=len(cells), skill=skill, world=world,
                                     seed=episode_seed(seed, episode)))

    successes: Dict[Tuple[str, float], int] = {(v, s): 0 for v, s, _ in groups}
    failures = []
    for cell, result, error in run_cells(run_episode_cell, cells, jobs=jobs):
        key = (cell.world['trajectory'], cell.world['belt_speed'])
        if error is not None:
            logger.error(f"Episode cell {cell.index} ({key[0]} @ {key[1]} m/s) failed: {error}")
            failures.append({'cell': cell.index, 'variant': key[0], 'speed': key[1], 'error': error})
            continue
        successes[key] += int(result)

    rows = []
    for variant, speed, _ in groups:
        count = successes[(variant, speed)]
        rows.append({'skill': skill, 'variant': variant, 'speed': speed, 'episodes': episodes,
                     'successes': count, 'rate': count / episodes})
        logger.info(f"{skill} / {variant} @ {speed:.2f} m/s: {count}/{episodes} successes")
    return pd.DataFrame(rows, columns=RESULT_COLUMNS), failures


def speed_sweep(skill, speeds: Sequence[float], episodes: int = 100,
                seed: int = config.DEFAULT_SEED, world: Optional[WorldConfig] = None,
                jobs: int = 1) -> Tuple[pd.DataFrame, List[Dict]]:
    """Success rate per belt speed."""
    base = asdict(world or WorldConfig())
    skill = Skill(skill).value
    groups = [(base['trajectory'], float(speed), {**base, 'belt_speed': float(speed)})
              for speed in speeds]
    return _success_table(skill, groups, episodes, seed, jobs)


def trajectory_generalization(skill, variants: Sequence[str] = VARIANTS, episodes: int = 100,
                              seed: int = config.DEFAULT_SEED,
                              world: Optional[WorldConfig] = None,
                              jobs: int = 1) -> Tuple[pd.DataFrame, List[Dict]]:
    """Success rate per trajectory variant at the configured belt speed."""
    base = asdict(world or WorldConfig())
    skill = Skill(skill).value
    for variant in variants:
        if variant not in VARIANTS:
            raise ScriptError(f"unknown trajectory variant '{variant}'")
    groups = [(variant, base['belt_speed'], {**base, 'trajectory': variant}) for variant in variants]
    return _success_table(skill, groups, episodes, seed, jobs)
