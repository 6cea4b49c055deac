"""BD-RIS configuration space and feasible sets of scattering matrices.

Every mode/architecture is represented the same way: the cells of the
surface are split into ``G`` equal groups and each group carries a tall
block ``V`` of shape ``(L*K, K)`` with orthonormal columns.  Row slab ``l``
of ``V`` is the group's part of the effective matrix ``Phi_l``, so the
semi-unitary stack condition ``sum_l Phi_l^H Phi_l = I`` holds whenever
every block satisfies ``V^H V = I``.

Blocks of one state are stored stacked in a single array of shape
``(G, L*K, K)``.  The non-diagonal architecture stores ``M`` unit-modulus
``1x1`` blocks (the phases) plus the permutation routing element ``i`` to
element ``sigma[i]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

DEFAULT_TOL = 1e-9


class ConfigError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class UnsupportedArchitectureError(ValueError):
    pass


class RankDeficientError(np.linalg.LinAlgError):
    pass


class Mode(str, Enum):
    REFLECTIVE = "reflective"
    HYBRID = "hybrid"
    MULTI_SECTOR = "multi_sector"


class Architecture(str, Enum):
    SINGLE = "single"
    GROUP = "group"
    FULLY = "fully"
    DYNAMIC_GROUP = "dynamic_group"
    NON_DIAGONAL = "non_diagonal"


@dataclass(frozen=True)
class RisConfig:
    """A point of the classification tree.

    ``group_size`` counts antennas and is only meaningful for the group and
    dynamic-group architectures.  ``sectors`` is only read for the
    multi-sector mode; reflective has one sector and hybrid two.
    """

    M: int
    mode: Mode = Mode.REFLECTIVE
    architecture: Architecture = Architecture.SINGLE
    group_size: int | None = None
    sectors: int | None = None

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", Mode(self.mode))
            object.__setattr__(self, "architecture", Architecture(self.architecture))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M!r}")
        object.__setattr__(self, "M", int(self.M))

        if self.mode is Mode.MULTI_SECTOR:
            if self.sectors is None or int(self.sectors) < 2:
                raise ConfigError("multi-sector mode needs sectors >= 2")
            object.__setattr__(self, "sectors", int(self.sectors))
        elif self.sectors is not None and int(self.sectors) != self.L:
            raise ConfigError(f"{self.mode.value} mode has {self.L} sector(s), got {self.sectors}")
        else:
            object.__setattr__(self, "sectors", None)

        L = self.L
        if self.M % L:
            raise ConfigError(f"sector count L={L} must divide M={self.M}")

        arch = self.architecture
        if arch in (Architecture.GROUP, Architecture.DYNAMIC_GROUP):
            if self.group_size is None:
                raise ConfigError(f"{arch.value} architecture needs group_size")
            gs = int(self.group_size)
            if gs < 1 or self.M % gs or gs % L:
                raise ConfigError(
                    f"group_size={gs} must divide M={self.M} and be a multiple of L={L}")
            object.__setattr__(self, "group_size", gs)
        elif self.group_size is not None:
            expected = {Architecture.SINGLE: L, Architecture.FULLY: self.M}.get(arch)
            if expected is None or int(self.group_size) != expected:
                raise ConfigError(f"group_size is not a free parameter of {arch.value}")
            object.__setattr__(self, "group_size", None)

        if arch is Architecture.NON_DIAGONAL:
            if self.mode is not Mode.REFLECTIVE:
                raise ConfigError("non-diagonal architecture requires reflective mode")
            if self.M % 2:
                raise ConfigError("non-diagonal architecture requires even M")

    @property
    def L(self) -> int:
        if self.mode is Mode.REFLECTIVE:
            return 1
        if self.mode is Mode.HYBRID:
            return 2
        return self.sectors

    @property
    def cells(self) -> int:
        return self.M // self.L

    @property
    def sector_size(self) -> int:
        return self.M // self.L

    @property
    def group_antennas(self) -> int:
        """Antennas per fully-connected group (``M/G``)."""
        arch = self.architecture
        if arch in (Architecture.SINGLE, Architecture.NON_DIAGONAL):
            return self.L
        if arch is Architecture.FULLY:
            return self.M
        return self.group_size

    @property
    def group_cells(self) -> int:
        return self.group_antennas // self.L

    @property
    def n_groups(self) -> int:
        return self.M // self.group_antennas

    @property
    def block_shape(self) -> tuple[int, int, int]:
        K = self.group_cells
        return (self.n_groups, self.L * K, K)

    def canonical(self) -> RisConfig:
        """Single/fully-connected rewritten as group-connected."""
        if self.architecture in (Architecture.SINGLE, Architecture.FULLY):
            return replace(self, architecture=Architecture.GROUP, group_size=self.group_antennas)
        return self

    def label(self) -> str:
        arch = self.architecture.value
        if self.architecture in (Architecture.GROUP, Architecture.DYNAMIC_GROUP):
            arch = f"{arch}({self.group_size})"
        mode = self.mode.value if self.mode is not Mode.MULTI_SECTOR else f"multi_sector({self.L})"
        return f"M={self.M} {mode} {arch}"


def _readonly(a):
    if a is None:
        return None
    a = np.array(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ScatteringState:
    config: RisConfig
    blocks: np.ndarray
    cell_permutation: np.ndarray | None = None
    pairing: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", _readonly(np.asarray(self.blocks, dtype=complex)))
        object.__setattr__(self, "cell_permutation", _readonly(self.cell_permutation))
        object.__setattr__(self, "pairing", _readonly(self.pairing))

    @property
    def phases(self) -> np.ndarray:
        """Phases of the non-diagonal (or reflective single-connected) entries."""
        if self.config.group_cells != 1 or self.config.L != 1:
            raise UnsupportedArchitectureError("phases are defined for 1x1 blocks only")
        return np.angle(self.blocks[:, 0, 0])


@dataclass(frozen=True)
class EffectiveMatrices:
    phi: np.ndarray  # (L, M_s, M_s)

    @property
    def reflection(self) -> np.ndarray:
        return self.phi[0]

    @property
    def transmission(self) -> np.ndarray:
        if self.phi.shape[0] != 2:
            raise UnsupportedArchitectureError("transmission matrix exists in hybrid mode only")
        return self.phi[1]


@dataclass
class ValidationReport:
    passed: bool
    deviations: dict[str, float] = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)

    def __bool__(self):
        return self.passed


def circuit_complexity(config: RisConfig) -> int:
    """Number of reconfigurable impedance components of the circuit.

    Cell-wise single-connected: ``(L+1) M / 2`` (``M`` when reflective,
    ``3M/2`` when hybrid).  Group-connected with ``M/G`` antennas per
    group: ``(M/G + 1) M / 2``; fully-connected is ``G = 1``.
    """
    if config.architecture in (Architecture.NON_DIAGONAL, Architecture.DYNAMIC_GROUP):
        raise UnsupportedArchitectureError(
            f"no component count is defined for {config.architecture.value}")
    n = config.group_antennas
    return (n + 1) * config.M // 2


def _check_shapes(state: ScatteringState):
    cfg = state.config
    if state.blocks.ndim != 3 or state.blocks.shape != cfg.block_shape:
        raise ShapeError(f"blocks have shape {state.blocks.shape}, {cfg.label()} needs {cfg.block_shape}")
    dynamic = cfg.architecture is Architecture.DYNAMIC_GROUP
    if dynamic != (state.cell_permutation is not None):
        raise ShapeError("cell_permutation must be present iff the architecture is dynamic_group")
    if dynamic and state.cell_permutation.shape != (cfg.cells,):
        raise ShapeError(f"cell_permutation must have length {cfg.cells}")
    nondiag = cfg.architecture is Architecture.NON_DIAGONAL
    if nondiag != (state.pairing is not None):
        raise ShapeError("pairing must be present iff the architecture is non_diagonal")
    if nondiag and state.pairing.shape != (cfg.M,):
        raise ShapeError(f"pairing must have length {cfg.M}")


def _is_permutation(p, n) -> bool:
    p = np.asarray(p)
    return p.shape == (n,) and np.issubdtype(p.dtype, np.integer) and np.array_equal(np.sort(p), np.arange(n))


def unitarity_deviation(blocks: np.ndarray) -> float:
    """Max-abs entry of ``V^H V - I`` over all blocks."""
    gram = np.conj(np.swapaxes(blocks, -1, -2)) @ blocks
    gram -= np.eye(blocks.shape[-1])
    return float(np.max(np.abs(gram))) if gram.size else 0.0


def validate(state: ScatteringState, tol: float = DEFAULT_TOL) -> ValidationReport:
    _check_shapes(state)
    cfg = state.config
    dev = {"block_unitarity": unitarity_deviation(state.blocks)}
    if state.cell_permutation is not None:
        dev["cell_permutation"] = 0.0 if _is_permutation(state.cell_permutation, cfg.cells) else math.inf
    if state.pairing is not None:
        dev["pairing"] = 0.0 if _is_permutation(state.pairing, cfg.M) else math.inf

    violations = [name for name, v in dev.items() if not v <= tol]
    return ValidationReport(passed=not violations, deviations=dev, violations=violations)


def check_feasible(state: ScatteringState, tol: float = DEFAULT_TOL):
    report = validate(state, tol)
    if not report.passed:
        detail = ", ".join(f"{k}={report.deviations[k]:.3g}" for k in report.violations)
        raise FeasibilityError(f"infeasible scattering state ({detail})")


class FeasibilityError(ValueError):
    pass


def haar_semi_unitary(shape, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed matrices with orthonormal columns, batched over leading axes."""
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    # fix the phase ambiguity of QR so the factor is Haar
    return q * (d / np.abs(d))[..., None, :]


def random_derangement(n: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        p = rng.permutation(n)
        if n == 0 or np.all(p != np.arange(n)):
            return p


def random_feasible(config: RisConfig, rng) -> ScatteringState:
    rng = np.random.default_rng(rng)
    blocks = haar_semi_unitary(config.block_shape, rng)
    perm = pairing = None
    if config.architecture is Architecture.DYNAMIC_GROUP:
        perm = rng.permutation(config.cells)
    elif config.architecture is Architecture.NON_DIAGONAL:
        pairing = random_derangement(config.M, rng)
    return ScatteringState(config, blocks, cell_permutation=perm, pairing=pairing)


def polar_factor(blocks: np.ndarray, rank_tol: float = 1e-12) -> np.ndarray:
    """Frobenius-nearest orthonormal-column matrix of each block.

    ``A = U S W^H  ->  U W^H``.  Single-column blocks reduce to a norm
    division.
    """
    blocks = np.asarray(blocks, dtype=complex)
    if blocks.shape[-1] == 1:
        norms = np.linalg.norm(blocks, axis=-2, keepdims=True)
        if np.any(norms <= rank_tol * max(1.0, float(np.max(norms, initial=0.0)))) or not np.all(np.isfinite(norms)):
            raise RankDeficientError("zero column: projection is not unique")
        return blocks / norms
    u, s, vh = np.linalg.svd(blocks, full_matrices=False)
    if not np.all(np.isfinite(s)) or np.any(s[..., -1] <= rank_tol * np.maximum(s[..., 0], 1e-300)):
        raise RankDeficientError("rank-deficient block: projection is not unique")
    return u @ vh


def project(config: RisConfig, raw_blocks, cell_permutation=None, pairing=None) -> ScatteringState:
    raw = np.asarray(raw_blocks, dtype=complex)
    if raw.shape != config.block_shape:
        raise ShapeError(f"raw blocks have shape {raw.shape}, {config.label()} needs {config.block_shape}")
    return ScatteringState(config, polar_factor(raw), cell_permutation=cell_permutation, pairing=pairing)


def cell_groups(config: RisConfig, cell_permutation=None) -> np.ndarray:
    """``(G, K)`` array of the cell indices forming each group."""
    order = np.arange(config.cells) if cell_permutation is None else np.asarray(cell_permutation)
    return order.reshape(config.n_groups, config.group_cells)


def scatter_blocks(config: RisConfig, blocks: np.ndarray, cell_permutation=None, pairing=None) -> np.ndarray:
    """Place block rows into the ``(L, M_s, M_s)`` effective matrices."""
    L, Ms = config.L, config.sector_size
    phi = np.zeros((L, Ms, Ms), dtype=complex)
    if config.architecture is Architecture.NON_DIAGONAL:
        phi[0, pairing, np.arange(config.M)] = blocks[:, 0, 0]
        return phi
    G, _, K = blocks.shape
    groups = cell_groups(config, cell_permutation)
    rows = groups[:, :, None]
    cols = groups[:, None, :]
    # (G, L*K, K) -> (L, G, K, K)
    phi[:, rows, cols] = blocks.reshape(G, L, K, K).transpose(1, 0, 2, 3)
    return phi


def gather_blocks(config: RisConfig, phi: np.ndarray, cell_permutation=None, pairing=None) -> np.ndarray:
    """Inverse of :func:`scatter_blocks`: read the block entries out of ``phi``."""
    if config.architecture is Architecture.NON_DIAGONAL:
        return phi[0, pairing, np.arange(config.M)][:, None, None]
    G, LK, K = config.block_shape
    groups = cell_groups(config, cell_permutation)
    sub = phi[:, groups[:, :, None], groups[:, None, :]]  # (L, G, K, K)
    return sub.transpose(1, 0, 2, 3).reshape(G, LK, K)


def effective_matrices(state: ScatteringState) -> EffectiveMatrices:
    _check_shapes(state)
    return EffectiveMatrices(scatter_blocks(state.config, state.blocks, state.cell_permutation, state.pairing))


def transfer_state(state: ScatteringState, config: RisConfig, cell_permutation=None) -> ScatteringState:
    """Re-express ``state`` in the feasible set of ``config``.

    Entries of the effective matrices outside the target sparsity pattern
    are dropped and each block is projected, so moving into a richer set
    is exact and moving into a poorer one is a projection.
    """
    src = state.config
    if (src.M, src.L) != (config.M, config.L):
        raise ConfigError("state and target config differ in M or sector count")
    if config.architecture is Architecture.NON_DIAGONAL:
        if state.pairing is None:
            raise UnsupportedArchitectureError("cannot infer a pairing for the non-diagonal architecture")
        pairing = state.pairing
    else:
        pairing = None
    if config.architecture is Architecture.DYNAMIC_GROUP:
        if cell_permutation is None:
            cell_permutation = state.cell_permutation if state.cell_permutation is not None else np.arange(config.cells)
    else:
        cell_permutation = None
    phi = effective_matrices(state).phi
    raw = gather_blocks(config, phi, cell_permutation, pairing)
    return ScatteringState(config, polar_factor(raw), cell_permutation=cell_permutation, pairing=pairing)


def quantize_phases(state: ScatteringState, bits: int) -> ScatteringState:
    """Snap every reflection phase to the nearest of ``2**bits`` uniform levels."""
    cfg = state.config
    if cfg.mode is not Mode.REFLECTIVE or cfg.architecture is not Architecture.SINGLE:
        raise UnsupportedArchitectureError(
            "phase quantization is only defined for reflective single-connected surfaces")
    if int(bits) < 1:
        raise ValueError("bits must be positive")
    step = 2 * math.pi / 2 ** int(bits)
    theta = np.angle(state.blocks[:, 0, 0])
    snapped = np.mod(np.round(theta / step) * step, 2 * math.pi)
    return ScatteringState(cfg, np.exp(1j * snapped)[:, None, None])


def format_state(state: ScatteringState, precision: int = 6) -> str:
    """Text dump of the effective matrices, one ``re+imj`` row per line."""
    phi = effective_matrices(state).phi
    out = [f"# {state.config.label()}"]
    for l, mat in enumerate(phi):
        out.append(f"# phi[{l}]")
        for row in mat:
            out.append(",".join(f"{z.real:.{precision}g}{z.imag:+.{precision}g}j" for z in row))
    return "\n".join(out) + "\n"
