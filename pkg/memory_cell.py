"""
Gated memory cell: M_t = sigmoid(G) * H + (1 - sigmoid(G)) * M_prev.

G (one gate per memory row) and H (bounded candidate) are single affine
maps of the concatenation [vec(M_prev); F]. A linear readout of vec(M_t)
gives class logits; gradients flow through the unrolled recurrence.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.special import expit, log_softmax, softmax

import config

logger = logging.getLogger(__name__)

PARAM_NAMES = ('Wg', 'bg', 'Wh', 'bh', 'Wo', 'bo')


class ShapeError(ValueError):
    """Raised when arrays disagree with the cell's (l_m, c) shapes."""


@dataclass
class CellParams:
    Wg: np.ndarray   # (l_m, l_m*c + c)
    bg: np.ndarray   # (l_m,)
    Wh: np.ndarray   # (l_m*c, l_m*c + c)
    bh: np.ndarray   # (l_m*c,)
    Wo: np.ndarray   # (n_out, l_m*c)
    bo: np.ndarray   # (n_out,)

    @property
    def l_m(self) -> int:
        return self.Wg.shape[0]

    @property
    def c(self) -> int:
        return self.Wg.shape[1] // (self.l_m + 1)

    @property
    def n_out(self) -> int:
        return self.Wo.shape[0]

    def validate(self):
        l_m, c = self.l_m, self.c
        z_dim = l_m * c + c
        expected = {
            'Wg': (l_m, z_dim), 'bg': (l_m,),
            'Wh': (l_m * c, z_dim), 'bh': (l_m * c,),
            'Wo': (self.n_out, l_m * c), 'bo': (self.n_out,),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ShapeError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    @classmethod
    def init(cls, l_m: int, c: int, n_out: int, rng: np.random.Generator,
             scale: float = config.MEMORY_DEFAULTS['init_scale']) -> 'CellParams':
        if l_m < 1 or c < 1 or n_out < 1:
            raise ShapeError("l_m, c and n_out must be >= 1")
        z_dim = l_m * c + c

        def weights(rows, cols):
            return rng.normal(0.0, scale / np.sqrt(cols), size=(rows, cols))

        return cls(
            Wg=weights(l_m, z_dim), bg=np.zeros(l_m),
            Wh=weights(l_m * c, z_dim), bh=np.zeros(l_m * c),
            Wo=weights(n_out, l_m * c), bo=np.zeros(n_out),
        )

    def arrays(self) -> Dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_NAMES}

    def copy(self) -> 'CellParams':
        return CellParams(**{name: arr.copy() for name, arr in self.arrays().items()})

    def to_dict(self) -> Dict:
        return {name: arr.tolist() for name, arr in self.arrays().items()}

    @classmethod
    def from_dict(cls, data: Dict) -> 'CellParams':
        params = cls(**{name: np.asarray(data[name], dtype=float) for name in PARAM_NAMES})
        params.validate()
        return params


def init_memory(l_m: int, c: int) -> np.ndarray:
    if l_m < 1 or c < 1:
        raise ShapeError(f"memory shape must be positive, got ({l_m}, {c})")
    return np.zeros((l_m, c))


def memory_step(params: CellParams, M_prev: np.ndarray,
                F: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One mix update; returns (M_t, G, H)."""
    l_m, c = params.l_m, params.c
    M_prev = np.asarray(M_prev, dtype=float)
    F = np.asarray(F, dtype=float).reshape(-1)
    if M_prev.shape != (l_m, c):
        raise ShapeError(f"memory has shape {M_prev.shape}, expected ({l_m}, {c})")
    if F.shape != (c,):
        raise ShapeError(f"input feature has shape {F.shape}, expected ({c},)")

    z = np.concatenate([M_prev.reshape(-1), F])
    G = params.Wg @ z + params.bg
    H = np.tanh(params.Wh @ z + params.bh).reshape(l_m, c)
    gate = expit(G)[:, None]
    M = gate * H + (1.0 - gate) * M_prev
    return M, G, H


def readout(params: CellParams, M: np.ndarray) -> np.ndarray:
    return params.Wo @ M.reshape(-1) + params.bo


@dataclass
class StepCache:
    z: np.ndarray
    M_prev: np.ndarray
    M: np.ndarray
    G: np.ndarray
    H: np.ndarray
    logits: np.ndarray


def rollout(params: CellParams, inputs: np.ndarray,
            M0: Optional[np.ndarray] = None) -> List[StepCache]:
    """Run the cell over inputs (T, c) from M0 (zeros by default)."""
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim != 2 or len(inputs) < 1:
        raise ShapeError(f"inputs must have shape (T >= 1, c), got {inputs.shape}")
    M = init_memory(params.l_m, params.c) if M0 is None else np.asarray(M0, dtype=float)

    cache = []
    for F in inputs:
        M_next, G, H = memory_step(params, M, F)
        cache.append(StepCache(
            z=np.concatenate([M.reshape(-1), F]), M_prev=M, M=M_next, G=G, H=H,
            logits=readout(params, M_next),
        ))
        M = M_next
    return cache


Targets = Union[int, Sequence[Optional[int]]]


def _step_targets(targets: Targets, steps: int) -> List[Optional[int]]:
    if isinstance(targets, (int, np.integer)):
        # A single target scores only the final readout
        return [None] * (steps - 1) + [int(targets)]
    targets = list(targets)
    if len(targets) != steps:
        raise ShapeError(f"got {len(targets)} targets for {steps} steps")
    return targets


def sequence_loss(params: CellParams, inputs: np.ndarray, targets: Targets) -> float:
    """Summed cross-entropy over the steps that carry a target."""
    cache = rollout(params, inputs)
    loss = 0.0
    for step, target in zip(cache, _step_targets(targets, len(cache))):
        if target is not None:
            loss -= log_softmax(step.logits)[target]
    return float(loss)


def cell_gradients(params: CellParams, inputs: np.ndarray,
                   targets: Targets) -> Tuple[float, Dict[str, np.ndarray]]:
    """Loss and exact gradients by backpropagation through time."""
    cache = rollout(params, inputs)
    step_targets = _step_targets(targets, len(cache))
    l_m, c = params.l_m, params.c
    grads = {name: np.zeros_like(arr) for name, arr in params.arrays().items()}

    loss = 0.0
    dM_next = np.zeros((l_m, c))
    for step, target in zip(reversed(cache), reversed(step_targets)):
        dM = dM_next.copy()
        if target is not None:
            loss -= log_softmax(step.logits)[target]
            dlogits = softmax(step.logits)
            dlogits[target] -= 1.0
            grads['Wo'] += np.outer(dlogits, step.M.reshape(-1))
            grads['bo'] += dlogits
            dM += (params.Wo.T @ dlogits).reshape(l_m, c)

        gate = expit(step.G)
        dH = dM * gate[:, None]
        dgate = (dM * (step.H - step.M_prev)).sum(axis=1)
        dG = dgate * gate * (1.0 - gate)
        dA = (dH * (1.0 - step.H ** 2)).reshape(-1)

        grads['Wg'] += np.outer(dG, step.z)
        grads['bg'] += dG
        grads['Wh'] += np.outer(dA, step.z)
        grads['bh'] += dA

        dz = params.Wg.T @ dG + params.Wh.T @ dA
        dM_next = dM * (1.0 - gate[:, None]) + dz[:l_m * c].reshape(l_m, c)

    return float(loss), grads


def one_hot_digits(digits: Sequence[int], c: int) -> np.ndarray:
    if c < 10:
        raise ShapeError(f"digit inputs need c >= 10, got {c}")
    inputs = np.zeros((len(digits), c))
    inputs[np.arange(len(digits)), np.asarray(digits, dtype=int)] = 1.0
    return inputs


def recite(params: CellParams, first_digit: int, length: int,
           memoryless: bool = False) -> List[int]:
    """
    Free-running recitation: each predicted digit becomes the next input.

    With memoryless=True the memory is cleared before every step, so each
    prediction depends on the current digit alone.
    """
    M = init_memory(params.l_m, params.c)
    digits = [int(first_digit)]
    for _ in range(length - 1):
        if memoryless:
            M = init_memory(params.l_m, params.c)
        M, _, _ = memory_step(params, M, one_hot_digits([digits[-1]], params.c)[0])
        digits.append(int(np.argmax(readout(params, M))))
    return digits


def recite_accuracy(params: CellParams, sequence: Sequence[int], memoryless: bool = False) -> float:
    recited = recite(params, sequence[0], len(sequence), memoryless)
    return float(np.mean(np.array(recited[1:]) == np.array(sequence[1:])))


def memoryless_gradients(params: CellParams, inputs: np.ndarray,
                         targets: Sequence[int]) -> Tuple[float, Dict[str, np.ndarray]]:
    """Loss and gradients when every step starts from empty memory."""
    loss, total = 0.0, {name: np.zeros_like(arr) for name, arr in params.arrays().items()}
    for F, target in zip(np.asarray(inputs, dtype=float), targets):
        step_loss, grads = cell_gradients(params, F[None, :], [target])
        loss += step_loss
        for name, g in grads.items():
            total[name] += g
    return loss, total


@dataclass
class ReciteResult:
    params: CellParams
    curve: pd.DataFrame
    sequence: List[int]
    memoryless: bool = False

    @property
    def final_accuracy(self) -> float:
        return float(self.curve['recite_accuracy'].iloc[-1])


def train_recite(sequence: Optional[Sequence[int]] = None, length: int = 20,
                 epochs: int = config.MEMORY_DEFAULTS['epochs'],
                 step_size: float = config.MEMORY_DEFAULTS['step_size'],
                 seed: int = config.DEFAULT_SEED,
                 l_m: int = config.MEMORY_DEFAULTS['l_m'], c: int = config.MEMORY_DEFAULTS['c'],
                 n_digits: int = config.MEMORY_DEFAULTS['n_digits'],
                 grad_clip: float = config.MEMORY_DEFAULTS['grad_clip'],
                 init_scale: float = config.MEMORY_DEFAULTS['init_scale'],
                 memoryless: bool = False) -> ReciteResult:
    """
    Train to predict digit t+1 from the true digit t at every step.

    memoryless=True trains and recites with the memory cleared before every
    step. Such a cell maps each digit to one successor, so it cannot recite a
    sequence where a digit is followed by different digits.

    Accuracy is measured free-running after the first digit once per epoch;
    training stops early at perfect recitation. Epoch 0 is the untrained cell.
    """
    rng = np.random.default_rng(seed)
    if sequence is None:
        if length < 2:
            raise ShapeError(f"sequence length must be >= 2, got {length}")
        sequence = rng.integers(n_digits, size=length).tolist()
    sequence = [int(d) for d in sequence]
    if len(sequence) < 2:
        raise ShapeError(f"sequence length must be >= 2, got {len(sequence)}")

    params = CellParams.init(l_m, c, n_digits, rng, init_scale)
    inputs = one_hot_digits(sequence[:-1], c)
    targets = sequence[1:]

    curve = [{'epoch': 0, 'recite_accuracy': recite_accuracy(params, sequence, memoryless)}]
    for epoch in range(1, epochs + 1):
        if memoryless:
            loss, grads = memoryless_gradients(params, inputs, targets)
        else:
            loss, grads = cell_gradients(params, inputs, targets)
        norm = np.sqrt(sum(float((g ** 2).sum()) for g in grads.values()))
        scale = step_size * min(1.0, grad_clip / norm) if norm > 0 else 0.0
        for name, g in grads.items():
            getattr(params, name)[...] -= scale * g

        accuracy = recite_accuracy(params, sequence, memoryless)
        curve.append({'epoch': epoch, 'recite_accuracy': accuracy})
        if epoch % 500 == 0:
            logger.info(f"Epoch {epoch}: loss {loss:.4f}, recitation accuracy {accuracy:.2%}")
        if accuracy == 1.0:
            logger.info(f"Perfect recitation of {len(sequence)} digits after {epoch} epochs")
            break

    return ReciteResult(params=params, curve=pd.DataFrame(curve), sequence=sequence,
                        memoryless=memoryless)
