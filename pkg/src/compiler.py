"""
Amplitude Compiler Module
Compiles, once per (ancilla, n), an arithmetic plan producing every event
probability and its gradient from the entries of U
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.evolve import UnitaryMatrix, enumerate_events
from src.exceptions import DimensionError, ResourceLimitError
from src.fock import AncillaSpec, BellIndex, OccupationVector, input_polynomial, monomial_weight
from src.objective import DEFAULT_EPS_ZERO, ProbabilityTable

logger = logging.getLogger(__name__)

PLAN_FORMAT_VERSION = 1
DEFAULT_NODE_CEILING = 10_000_000

# opcodes of the linearized programs
INPUT, CONST, ADD, MUL, NEG = range(5)
_OPCODES = {'input': INPUT, 'const': CONST, 'add': ADD, 'mul': MUL, 'neg': NEG}


@dataclass(frozen=True)
class EventClass:
    """Detection events equal up to a permutation of output modes"""

    partition: Tuple[int, ...]
    representative: OccupationVector

    @property
    def columns(self) -> int:
        return len(self.partition)


def canonical_class(event: Sequence[int]) -> Tuple[EventClass, Tuple[int, ...]]:
    """
    Find the class representative of an event

    Args:
        event: Occupation vector

    Returns:
        (EventClass, permutation) with event[permutation[j]] == representative[j]
    """
    order = tuple(sorted(range(len(event)), key=lambda j: (-event[j], j)))
    representative = tuple(event[j] for j in order)
    partition = tuple(k for k in representative if k > 0)
    return EventClass(partition, representative), order


def partitions(m: int, largest: Optional[int] = None) -> Iterator[Tuple[int, ...]]:
    """Integer partitions of m as non-increasing tuples, largest first"""
    largest = m if largest is None else largest
    if m == 0:
        yield ()
        return
    for first in range(min(m, largest), 0, -1):
        for rest in partitions(m - first, first):
            yield (first,) + rest


def partition_count(m: int) -> int:
    """P(m) by Euler's pentagonal-number recurrence"""
    if m < 0:
        return 0
    counts = [1] + [0] * m
    for i in range(1, m + 1):
        total, k = 0, 1
        while True:
            first = k * (3 * k - 1) // 2
            if first > i:
                break
            sign = 1 if k % 2 else -1
            total += sign * counts[i - first]
            second = k * (3 * k + 1) // 2
            if second <= i:
                total += sign * counts[i - second]
            k += 1
        counts[i] = total
    return counts[m]


@dataclass(frozen=True)
class BellTransform:
    """
    Signed row permutation turning the Φ⁺ input into another Bell input.

    Row i of the transformed matrix is ``signs[i] * U[rows[i]]``.
    """

    beta: BellIndex
    rows: Tuple[int, int, int, int]
    signs: Tuple[float, float, float, float]

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        transformed = matrix.copy()
        transformed[:4] = np.asarray(self.signs)[:, None] * matrix[list(self.rows)]
        return transformed


BELL_TRANSFORMS = (
    BellTransform(BellIndex.PHI_PLUS, (0, 1, 2, 3), (1.0, 1.0, 1.0, 1.0)),
    BellTransform(BellIndex.PHI_MINUS, (0, 1, 2, 3), (1.0, -1.0, 1.0, 1.0)),
    BellTransform(BellIndex.PSI_PLUS, (0, 1, 3, 2), (1.0, 1.0, 1.0, 1.0)),
    BellTransform(BellIndex.PSI_MINUS, (0, 1, 3, 2), (1.0, -1.0, 1.0, 1.0)),
)


def _transform_arrays(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Full row maps and signs of the four transforms, shape (4, n)"""
    rows = np.tile(np.arange(n), (4, 1))
    signs = np.ones((4, n))
    for b, transform in enumerate(BELL_TRANSFORMS):
        rows[b, :4] = transform.rows
        signs[b, :4] = transform.signs
    return rows, signs


def stack_bell_transforms(matrix: np.ndarray) -> np.ndarray:
    """T_beta U for the four Bell states, shape (4, n, n)"""
    rows, signs = _transform_arrays(matrix.shape[0])
    return signs[:, :, None] * matrix[rows]


@dataclass
class Program:
    """Linearized instruction stream with reused registers"""

    ops: np.ndarray
    dest: np.ndarray
    left: np.ndarray
    right: np.ndarray
    constants: np.ndarray
    n_registers: int
    amplitude_register: int
    gradient_rows: np.ndarray
    gradient_cols: np.ndarray
    gradient_registers: np.ndarray

    @property
    def instruction_count(self) -> int:
        """Arithmetic instructions (loads excluded)"""
        return int(np.count_nonzero(self.ops >= ADD))

    def arrays(self, prefix: str) -> Dict[str, np.ndarray]:
        return {
            f"{prefix}_ops": self.ops,
            f"{prefix}_dest": self.dest,
            f"{prefix}_left": self.left,
            f"{prefix}_right": self.right,
            f"{prefix}_constants": self.constants,
            f"{prefix}_registers": np.array(
                [self.n_registers, self.amplitude_register], dtype=np.int64
            ),
            f"{prefix}_grad_rows": self.gradient_rows,
            f"{prefix}_grad_cols": self.gradient_cols,
            f"{prefix}_grad_registers": self.gradient_registers,
        }

    @classmethod
    def from_arrays(cls, data, prefix: str) -> 'Program':
        n_registers, amplitude_register = (int(v) for v in data[f"{prefix}_registers"])
        return cls(
            ops=data[f"{prefix}_ops"],
            dest=data[f"{prefix}_dest"],
            left=data[f"{prefix}_left"],
            right=data[f"{prefix}_right"],
            constants=data[f"{prefix}_constants"],
            n_registers=n_registers,
            amplitude_register=amplitude_register,
            gradient_rows=data[f"{prefix}_grad_rows"],
            gradient_cols=data[f"{prefix}_grad_cols"],
            gradient_registers=data[f"{prefix}_grad_registers"],
        )


@dataclass
class ClassProgram:
    """Programs of one event class plus the events it covers"""

    event_class: EventClass
    event_index: np.ndarray
    permutations: np.ndarray
    forward: Program
    full: Program


@dataclass
class EvaluationPlan:
    """Compiled evaluator of all 4 x N probabilities for one (ancilla, n)"""

    spec: AncillaSpec
    n: int
    photons: int
    events: List[OccupationVector]
    classes: List[ClassProgram]
    cse: bool = True
    node_count: int = 0
    naive_operation_count: int = 0
    normalization: np.ndarray = field(init=False)

    def __post_init__(self):
        self.normalization = np.array([monomial_weight(e) for e in self.events], dtype=float)

    @property
    def event_count(self) -> int:
        return len(self.events)

    @property
    def class_count(self) -> int:
        return len(self.classes)

    @property
    def amplitude_instruction_count(self) -> int:
        return sum(c.forward.instruction_count for c in self.classes)

    @property
    def gradient_instruction_count(self) -> int:
        return sum(c.full.instruction_count for c in self.classes)

    def summary(self) -> Dict[str, int]:
        return {
            'n': self.n,
            'photons': self.photons,
            'events': self.event_count,
            'classes': self.class_count,
            'dag_nodes': self.node_count,
            'amplitude_instructions': self.amplitude_instruction_count,
            'gradient_instructions': self.gradient_instruction_count,
            'naive_operations': self.naive_operation_count,
        }


class _DagBuilder:
    """Hash-consed arithmetic DAG over complex values"""

    def __init__(self, cse: bool, ceiling: int):
        self.nodes: List[tuple] = []
        self.cse: Optional[Dict[tuple, int]] = {} if cse else None
        self.ceiling = ceiling

    def emit(self, inst: tuple) -> int:
        if self.cse is not None and inst in self.cse:
            return self.cse[inst]
        if len(self.nodes) >= self.ceiling:
            raise ResourceLimitError(
                f"Amplitude plan exceeds the node ceiling of {self.ceiling:,}"
            )
        self.nodes.append(inst)
        index = len(self.nodes) - 1
        if self.cse is not None:
            self.cse[inst] = index
        return index

    def const_value(self, x: int) -> Optional[complex]:
        inst = self.nodes[x]
        return inst[1] if inst[0] == 'const' else None

    def const(self, value: complex) -> int:
        return self.emit(('const', complex(value)))

    def input(self, i: int, j: int) -> int:
        return self.emit(('input', i, j))

    def neg(self, x: int) -> int:
        value = self.const_value(x)
        if value is not None:
            return self.const(-value)
        if self.nodes[x][0] == 'neg':
            return self.nodes[x][1]
        return self.emit(('neg', x))

    def add(self, x: int, y: int) -> int:
        vx, vy = self.const_value(x), self.const_value(y)
        if vx is not None and vy is not None:
            return self.const(vx + vy)
        if vx == 0:
            return y
        if vy == 0:
            return x
        if self.cse is not None and x > y:
            x, y = y, x
        return self.emit(('add', x, y))

    def mul(self, x: int, y: int) -> int:
        vx, vy = self.const_value(x), self.const_value(y)
        if vx is not None and vy is not None:
            return self.const(vx * vy)
        if vx == 1:
            return y
        if vy == 1:
            return x
        if vx == -1:
            return self.neg(y)
        if vy == -1:
            return self.neg(x)
        if vx == 0 or vy == 0:
            return self.const(0)
        if self.cse is not None and x > y:
            x, y = y, x
        return self.emit(('mul', x, y))

    def reachable(self, outputs: Sequence[int]) -> List[int]:
        """Node ids needed by ``outputs``, ascending"""
        used = set()
        stack = list(outputs)
        while stack:
            node = stack.pop()
            if node in used:
                continue
            used.add(node)
            inst = self.nodes[node]
            if inst[0] in ('add', 'mul'):
                stack.extend(inst[1:])
            elif inst[0] == 'neg':
                stack.append(inst[1])
        return sorted(used)

    def adjoints(self, output: int) -> Dict[Tuple[int, int], int]:
        """Reverse-mode derivatives d(output)/d(input i, j) as DAG nodes"""
        adjoint = {output: self.const(1)}
        for node in reversed(self.reachable([output])):
            if node not in adjoint:
                continue
            seed = adjoint[node]
            inst = self.nodes[node]
            if inst[0] == 'add':
                for arg in inst[1:]:
                    adjoint[arg] = self.add(adjoint[arg], seed) if arg in adjoint else seed
            elif inst[0] == 'mul':
                x, y = inst[1], inst[2]
                contributions = ((x, self.mul(seed, y)), (y, self.mul(seed, x)))
                for arg, term in contributions:
                    adjoint[arg] = self.add(adjoint[arg], term) if arg in adjoint else term
            elif inst[0] == 'neg':
                term = self.neg(seed)
                arg = inst[1]
                adjoint[arg] = self.add(adjoint[arg], term) if arg in adjoint else term
        # without CSE one entry may be loaded by several input nodes
        gradients: Dict[Tuple[int, int], int] = {}
        for node in sorted(adjoint):
            inst = self.nodes[node]
            if inst[0] != 'input':
                continue
            key = (inst[1], inst[2])
            value = adjoint[node]
            gradients[key] = self.add(gradients[key], value) if key in gradients else value
        return {key: value for key, value in gradients.items() if self.const_value(value) != 0}

    def linearize(self, amplitude: int, gradients: Dict[Tuple[int, int], int]) -> Program:
        """Dead-code elimination plus register allocation by last use"""
        outputs = [amplitude] + list(gradients.values())
        order = self.reachable(outputs)
        last_use: Dict[int, int] = {}
        for position, node in enumerate(order):
            inst = self.nodes[node]
            if inst[0] in ('add', 'mul', 'neg'):
                for arg in inst[1:]:
                    last_use[arg] = position
        pinned = set(outputs)

        register: Dict[int, int] = {}
        free: List[int] = []
        n_registers = 0
        constants: List[complex] = []
        ops, dest, left, right = [], [], [], []
        for position, node in enumerate(order):
            inst = self.nodes[node]
            op = _OPCODES[inst[0]]
            if op == INPUT:
                a, b = inst[1], inst[2]
            elif op == CONST:
                constants.append(inst[1])
                a, b = len(constants) - 1, -1
            elif op == NEG:
                a, b = register[inst[1]], -1
            else:
                a, b = register[inst[1]], register[inst[2]]
            if op in (ADD, MUL, NEG):
                for arg in set(inst[1:]):
                    if last_use.get(arg) == position and arg not in pinned:
                        free.append(register[arg])
            if free:
                register[node] = free.pop()
            else:
                register[node] = n_registers
                n_registers += 1
            ops.append(op)
            dest.append(register[node])
            left.append(a)
            right.append(b)

        keys = sorted(gradients)
        return Program(
            ops=np.array(ops, dtype=np.int8),
            dest=np.array(dest, dtype=np.int64),
            left=np.array(left, dtype=np.int64),
            right=np.array(right, dtype=np.int64),
            constants=np.array(constants, dtype=complex),
            n_registers=n_registers,
            amplitude_register=register[amplitude],
            gradient_rows=np.array([i for i, _ in keys], dtype=np.int64),
            gradient_cols=np.array([j for _, j in keys], dtype=np.int64),
            gradient_registers=np.array([register[gradients[key]] for key in keys], dtype=np.int64),
        )


def _row_sequences(spec: AncillaSpec, n: int) -> List[Tuple[Tuple[int, ...], complex]]:
    """Input monomials of the Φ⁺ polynomial as row sequences, ancilla rows first"""
    sequences = []
    for occupation, coefficient in input_polynomial(BellIndex.PHI_PLUS, spec, n).items():
        ancilla = [i for i in range(4, n) for _ in range(occupation[i])]
        bell = [i for i in range(4) for _ in range(occupation[i])]
        sequences.append((tuple(ancilla + bell), coefficient))
    sequences.sort(key=lambda item: item[0])
    return sequences


def _box_layers(bounds: Sequence[int]) -> np.ndarray:
    """Number of s with 0 <= s_j <= bounds_j for each total |s|"""
    layers = np.array([1], dtype=np.int64)
    for bound in bounds:
        layers = np.convolve(layers, np.ones(bound + 1, dtype=np.int64))
    return layers


def _projected_nodes(sequences, representatives) -> int:
    depth = len(sequences[0][0]) if sequences else 0
    prefixes = [len({seq[:t] for seq, _ in sequences}) for t in range(depth + 1)]
    total = 0
    for rep in representatives:
        partition = [k for k in rep if k > 0]
        layers = _box_layers(partition)
        for t in range(1, depth + 1):
            total += 2 * prefixes[t] * int(layers[t]) * min(t, len(partition))
    # reverse sweep roughly doubles the forward graph
    return 3 * total


def _naive_operation_count(representatives: Dict[EventClass, int], monomials: int) -> int:
    """Operations of a per-event, per-Bell-state expansion without sharing"""
    total = 0
    for event_class, size in representatives.items():
        contributions = 0
        boxes = [range(k + 1) for k in event_class.partition]
        for state in np.array(np.meshgrid(*boxes, indexing='ij')).reshape(len(boxes), -1).T:
            contributions += int(np.count_nonzero(state)) if state.sum() > 0 else 0
        total += size * monomials * (2 * contributions + 2)
    return 4 * total


def compile_plan(spec: AncillaSpec, n: int, node_ceiling: int = DEFAULT_NODE_CEILING,
                 cse: bool = True, cache_directory: Optional[str] = None) -> EvaluationPlan:
    """
    Compile the evaluation plan for an ancilla on ``n`` modes

    Args:
        spec: Ancilla description
        n: Total mode count (Bell modes included)
        node_ceiling: Maximum DAG size before refusing
        cse: Share identical subexpressions
        cache_directory: Optional directory of cached plans

    Returns:
        EvaluationPlan

    Raises:
        DimensionError: if n is too small for the ancilla
        ResourceLimitError: if the projected or actual DAG exceeds ``node_ceiling``
    """
    needed = 4 + spec.mode_count
    if n < needed:
        raise DimensionError(f"Ancilla {spec.key} needs n >= {needed}, got {n}")

    if cache_directory:
        cached = load_plan(plan_cache_path(cache_directory, spec, n, cse))
        if cached is not None:
            logger.debug(f"Plan cache hit for {spec.key}, n={n}")
            return cached

    photons = spec.photon_count + 2
    events = enumerate_events(n, photons)
    members: Dict[EventClass, List[Tuple[int, Tuple[int, ...]]]] = {}
    for index, event in enumerate(events):
        event_class, permutation = canonical_class(event)
        members.setdefault(event_class, []).append((index, permutation))

    sequences = _row_sequences(spec, n)
    projected = _projected_nodes(sequences, [c.representative for c in members])
    if projected > node_ceiling:
        raise ResourceLimitError(
            f"Projected plan size {projected:,} nodes for {spec.key}, n={n} "
            f"exceeds the ceiling of {node_ceiling:,}"
        )

    builder = _DagBuilder(cse, node_ceiling)
    layers: Dict[Tuple[int, ...], Dict[Tuple[int, ...], int]] = {}
    classes: List[ClassProgram] = []

    for event_class in sorted(members, key=lambda c: c.partition, reverse=True):
        target = event_class.partition
        width = len(target)
        layers[()] = {(0,) * width: builder.const(1)}
        amplitude = builder.const(0)

        for rows, coefficient in sequences:
            for t in range(1, len(rows) + 1):
                prefix = (width, target) + rows[:t]
                if prefix in layers:
                    continue
                previous = layers[(width, target) + rows[:t - 1]] if t > 1 else layers[()]
                current: Dict[Tuple[int, ...], int] = {}
                for state, node in previous.items():
                    for j in range(width):
                        if state[j] >= target[j]:
                            continue
                        successor = state[:j] + (state[j] + 1,) + state[j + 1:]
                        term = builder.mul(node, builder.input(rows[t - 1], j))
                        current[successor] = builder.add(current[successor], term) if successor in current else term
                layers[prefix] = current
            final = layers[(width, target) + rows][target]
            amplitude = builder.add(amplitude, builder.mul(builder.const(coefficient), final))

        gradients = builder.adjoints(amplitude)
        entries = members[event_class]
        representative = event_class.representative
        classes.append(ClassProgram(
            event_class=event_class,
            event_index=np.array([index for index, _ in entries], dtype=np.int64),
            permutations=np.array([perm for _, perm in entries], dtype=np.int64),
            forward=builder.linearize(amplitude, {}),
            full=builder.linearize(amplitude, gradients),
        ))
        logger.debug(f"Class {target}: rep {representative}, {len(entries)} events")

    plan = EvaluationPlan(
        spec=spec,
        n=n,
        photons=photons,
        events=events,
        classes=classes,
        cse=cse,
        node_count=len(builder.nodes),
        naive_operation_count=_naive_operation_count(
            {c: len(m) for c, m in members.items()}, len(sequences)
        ),
    )
    logger.info(
        f"Compiled plan for {spec.key}, n={n}: {plan.class_count} classes, "
        f"{plan.amplitude_instruction_count:,} amplitude / "
        f"{plan.gradient_instruction_count:,} gradient instructions "
        f"(naive {plan.naive_operation_count:,})"
    )

    if cache_directory:
        save_plan(plan, plan_cache_path(cache_directory, spec, n, cse))
    return plan


def _execute(program: Program, stacked: np.ndarray, columns: np.ndarray) -> List[np.ndarray]:
    """Run a program on gathered inputs; every register holds shape (4, E)"""
    gathered = stacked[:, :, columns]
    registers: List = [None] * program.n_registers
    constants = program.constants
    for op, d, a, b in zip(program.ops.tolist(), program.dest.tolist(),
                           program.left.tolist(), program.right.tolist()):
        if op == MUL:
            registers[d] = registers[a] * registers[b]
        elif op == ADD:
            registers[d] = registers[a] + registers[b]
        elif op == NEG:
            registers[d] = -registers[a]
        elif op == INPUT:
            registers[d] = gathered[:, a, :, b]
        else:
            registers[d] = constants[a]
    return registers


def _check_dimensions(plan: EvaluationPlan, unitary: UnitaryMatrix):
    if unitary.n != plan.n:
        raise DimensionError(f"Plan is for n={plan.n}, unitary has n={unitary.n}")


def evaluate_amplitudes(plan: EvaluationPlan, unitary: UnitaryMatrix) -> np.ndarray:
    """Monomial coefficients g for every (beta, event), shape (4, N)"""
    _check_dimensions(plan, unitary)
    stacked = stack_bell_transforms(unitary.matrix)
    amplitudes = np.zeros((4, plan.event_count), dtype=complex)
    for class_program in plan.classes:
        width = class_program.event_class.columns
        shape = (4, len(class_program.event_index))
        registers = _execute(class_program.forward, stacked, class_program.permutations[:, :width])
        amplitudes[:, class_program.event_index] = np.broadcast_to(
            registers[class_program.forward.amplitude_register], shape
        )
    return amplitudes


def evaluate(plan: EvaluationPlan, unitary: UnitaryMatrix,
             eps_zero: float = DEFAULT_EPS_ZERO) -> ProbabilityTable:
    """
    Full 4 x N probability table

    Args:
        plan: Compiled plan
        unitary: Interferometer with plan.n modes
        eps_zero: Threshold for "nonzero" probabilities

    Returns:
        ProbabilityTable
    """
    amplitudes = evaluate_amplitudes(plan, unitary)
    return ProbabilityTable(np.abs(amplitudes) ** 2 * plan.normalization, plan.events, eps_zero)


def evaluate_with_gradient(plan: EvaluationPlan, unitary: UnitaryMatrix,
                           eps_zero: float = DEFAULT_EPS_ZERO) -> Tuple[ProbabilityTable, np.ndarray]:
    """
    Probability table and its gradient in one pass

    Returns:
        (table, gradient) where gradient has shape (4, N, 2 n^2): derivatives
        with respect to Re u (row-major) followed by Im u
    """
    _check_dimensions(plan, unitary)
    n = plan.n
    stacked = stack_bell_transforms(unitary.matrix)
    transform_rows, transform_signs = _transform_arrays(n)
    amplitudes = np.zeros((4, plan.event_count), dtype=complex)
    gradient = np.zeros((4, plan.event_count, 2 * n * n))
    beta_index = np.arange(4)[:, None]

    for class_program in plan.classes:
        program = class_program.full
        width = class_program.event_class.columns
        size = len(class_program.event_index)
        columns = class_program.permutations[:, :width]
        registers = _execute(program, stacked, columns)
        g = np.broadcast_to(registers[program.amplitude_register], (4, size))
        amplitudes[:, class_program.event_index] = g

        derivative = np.zeros((4, size, n, n), dtype=complex)
        event_position = np.arange(size)[None, :]
        for i, j, r in zip(program.gradient_rows.tolist(), program.gradient_cols.tolist(),
                           program.gradient_registers.tolist()):
            value = np.broadcast_to(registers[r], (4, size))
            derivative[beta_index, event_position,
                       transform_rows[:, i][:, None], columns[:, j][None, :]] = (
                transform_signs[:, i][:, None] * value
            )

        weight = 2.0 * plan.normalization[class_program.event_index][None, :, None]
        product = (np.conj(g)[:, :, None] * derivative.reshape(4, size, n * n))
        gradient[:, class_program.event_index, :n * n] = weight * product.real
        gradient[:, class_program.event_index, n * n:] = -weight * product.imag

    table = ProbabilityTable(np.abs(amplitudes) ** 2 * plan.normalization, plan.events, eps_zero)
    return table, gradient


def evaluate_gradient(plan: EvaluationPlan, unitary: UnitaryMatrix) -> np.ndarray:
    """Gradient of every p_beta^e, shape (4, N, 2 n^2)"""
    return evaluate_with_gradient(plan, unitary)[1]


def plan_cache_path(directory: str, spec: AncillaSpec, n: int, cse: bool = True) -> Path:
    suffix = '' if cse else '_nocse'
    return Path(directory) / f"{spec.key}_n{n}{suffix}.npz"


def save_plan(plan: EvaluationPlan, path: Path) -> Path:
    """Write a versioned .npz plan file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        'version': PLAN_FORMAT_VERSION,
        'spec': plan.spec.to_dict(),
        'n': plan.n,
        'photons': plan.photons,
        'cse': plan.cse,
        'node_count': plan.node_count,
        'naive_operation_count': plan.naive_operation_count,
        'classes': [list(c.event_class.partition) for c in plan.classes],
    }
    arrays: Dict[str, np.ndarray] = {
        'meta': np.array(json.dumps(meta)),
        'events': np.array(plan.events, dtype=np.int64).reshape(len(plan.events), plan.n),
    }
    for index, class_program in enumerate(plan.classes):
        arrays[f"c{index}_event_index"] = class_program.event_index
        arrays[f"c{index}_permutations"] = class_program.permutations
        arrays.update(class_program.forward.arrays(f"c{index}_forward"))
        arrays.update(class_program.full.arrays(f"c{index}_full"))
    with open(path, 'wb') as f:
        np.savez_compressed(f, **arrays)
    logger.info(f"Plan saved to {path}")
    return path


def load_plan(path: Path) -> Optional[EvaluationPlan]:
    """Read a cached plan; None when missing, stale or unreadable"""
    path = Path(path)
    if not path.exists():
        return None
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data['meta']))
            if meta.get('version') != PLAN_FORMAT_VERSION:
                logger.warning(f"Ignoring plan cache {path}: format version {meta.get('version')}")
                return None
            n = int(meta['n'])
            events = [tuple(int(k) for k in row) for row in data['events']]
            classes = []
            for index, partition in enumerate(meta['classes']):
                partition = tuple(partition)
                classes.append(ClassProgram(
                    event_class=EventClass(partition, partition + (0,) * (n - len(partition))),
                    event_index=data[f"c{index}_event_index"],
                    permutations=data[f"c{index}_permutations"],
                    forward=Program.from_arrays(data, f"c{index}_forward"),
                    full=Program.from_arrays(data, f"c{index}_full"),
                ))
            return EvaluationPlan(
                spec=AncillaSpec.from_dict(meta['spec']),
                n=n,
                photons=int(meta['photons']),
                events=events,
                classes=classes,
                cse=bool(meta['cse']),
                node_count=int(meta['node_count']),
                naive_operation_count=int(meta['naive_operation_count']),
            )
    except (OSError, KeyError, ValueError) as e:
        logger.warning(f"Ignoring unreadable plan cache {path}: {e}")
        return None
