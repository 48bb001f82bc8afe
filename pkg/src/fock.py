"""Truncated bosonic Fock space of the free field on the circle S_beta.

Modes n = -N..N carry momentum k_n = 2 pi n / beta and energy
nu_n = sqrt(k_n^2 + m^2). The basis is every occupation vector with total
occupation at most T, ordered by total occupation (the vacuum is state 0).
"""

import logging
from dataclasses import dataclass, field, replace
from math import comb
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import DegenerateGround, DimensionTooLarge, ExponentInfeasible, NoConstantsFound
from .oracles import DispersionParams, matsubara_energy
from .wick import WickPolynomial, rewick

LOGGER = logging.getLogger(__name__)

MAX_DIMENSION = 20000
MAX_INTERACTION_DEGREE = 4
PHI_BOUND_TOLERANCE = 1e-10
CONSTANT_GRID = (1.0, 1.25, 1.5, 2.0, 3.0, 5.0, 7.5, 10.0, 20.0, 50.0, 100.0)
MIN_TRIAL_GAP = 0.02


def fock_dimension(n_modes: int, occ_cut: int) -> int:
    """Occupation vectors of ``n_modes`` modes with total at most ``occ_cut``: C(n_modes + T, T)."""
    return comb(n_modes + occ_cut, occ_cut)


def _occupations(n_modes: int, budget: int) -> Iterator[Tuple[int, ...]]:
    if n_modes == 0:
        yield ()
        return
    for first in range(budget + 1):
        for rest in _occupations(n_modes - 1, budget - first):
            yield (first,) + rest


@dataclass(frozen=True)
class FockModel:
    beta: float
    mass: float
    mode_cut: int
    occ_cut: int
    modes: np.ndarray
    momenta: np.ndarray
    energies: np.ndarray
    occupations: np.ndarray
    annihilators: Tuple[sp.csr_matrix, ...] = field(repr=False)
    h0: sp.csr_matrix = field(repr=False)
    momentum: sp.csr_matrix = field(repr=False)
    interaction: Optional[sp.csr_matrix] = field(default=None, repr=False)
    ground_energy: float = 0.0
    ground_state: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.occupations.shape[0]

    @property
    def total_occupation(self) -> np.ndarray:
        return self.occupations.sum(axis=1)

    @property
    def momentum_index(self) -> np.ndarray:
        """Integer total momentum q of each basis state (P = 2 pi q / beta)."""
        return self.occupations @ self.modes

    def creator(self, position: int) -> sp.csr_matrix:
        return self.annihilators[position].T.tocsr()

    def hamiltonian(self, interacting: bool = True) -> sp.csr_matrix:
        """H_C = H0 + V - E_C when an interaction is built, otherwise H0."""
        if not interacting or self.interaction is None:
            return self.h0
        shift = sp.identity(self.dim, format="csr") * self.ground_energy
        return (self.h0 + self.interaction - shift).tocsr()

    def sector_indices(self) -> Dict[int, np.ndarray]:
        q = self.momentum_index
        return {int(value): np.nonzero(q == value)[0] for value in np.unique(q)}


def build_fock(beta: float, mass: float, mode_cut: int, occ_cut: int) -> FockModel:
    """Occupation basis, ladder operators, H0 = dGamma(nu) and P = dGamma(k).

    Raises:
        DimensionTooLarge: more than 20000 basis states.
    """
    params = DispersionParams(beta=beta, mass=mass)
    if mode_cut < 0 or occ_cut < 1:
        raise ValueError(f"need mode_cut >= 0 and occ_cut >= 1, got {mode_cut}, {occ_cut}")
    modes = np.arange(-mode_cut, mode_cut + 1)
    dim = fock_dimension(len(modes), occ_cut)
    if dim > MAX_DIMENSION:
        raise DimensionTooLarge(f"Fock dimension {dim} exceeds {MAX_DIMENSION} (N={mode_cut}, T={occ_cut})")

    occupations = np.array(sorted(_occupations(len(modes), occ_cut), key=lambda t: (sum(t), t)), dtype=int)
    index = {tuple(row): i for i, row in enumerate(occupations)}
    annihilators = []
    for position in range(len(modes)):
        rows, cols, values = [], [], []
        for col, state in enumerate(occupations):
            if state[position]:
                lowered = state.copy()
                lowered[position] -= 1
                rows.append(index[tuple(lowered)])
                cols.append(col)
                values.append(np.sqrt(state[position]))
        annihilators.append(sp.csr_matrix((values, (rows, cols)), shape=(dim, dim)))

    momenta = 2.0 * np.pi * modes / beta
    energies = matsubara_energy(modes, params)
    LOGGER.debug("Fock space N=%d T=%d: dimension %d", mode_cut, occ_cut, dim)
    return FockModel(
        beta=beta,
        mass=mass,
        mode_cut=mode_cut,
        occ_cut=occ_cut,
        modes=modes,
        momenta=momenta,
        energies=energies,
        occupations=occupations,
        annihilators=tuple(annihilators),
        h0=sp.diags(occupations @ energies, format="csr"),
        momentum=sp.diags(occupations @ momenta, format="csr"),
    )


def commutator_defect(model: FockModel) -> float:
    """max |[a_n, a_m^dagger] - delta_nm| on states with total occupation <= T - 1."""
    keep = np.nonzero(model.total_occupation <= model.occ_cut - 1)[0]
    identity = np.eye(len(keep))
    worst = 0.0
    for n, a_n in enumerate(model.annihilators):
        for m, a_m in enumerate(model.annihilators):
            adag_m = a_m.T
            commutator = (a_n @ adag_m - adag_m @ a_n).toarray()[np.ix_(keep, keep)]
            worst = max(worst, float(np.max(np.abs(commutator - (n == m) * identity))))
    return worst


def field_operator(model: FockModel, g: Sequence[float]) -> sp.csr_matrix:
    """phi_C(g) = (a^dagger(nu^{-1/2} g) + a(nu^{-1/2} g)) / sqrt(2) for a real mode vector g."""
    g = np.asarray(g, dtype=float)
    if g.shape != model.modes.shape:
        raise ValueError(f"mode vector needs {model.modes.size} entries, got {g.shape}")
    total = sp.csr_matrix((model.dim, model.dim))
    for weight, a_n in zip(g / np.sqrt(model.energies), model.annihilators):
        if weight:
            total = total + weight * (a_n + a_n.T)
    return (total / np.sqrt(2.0)).tocsr()


def sobolev_norm(model: FockModel, g: Sequence[float], epsilon: float) -> float:
    """sqrt(sum g_n^2 nu_n^{-1-epsilon})."""
    g = np.asarray(g, dtype=float)
    return float(np.sqrt(np.sum(g**2 * model.energies ** (-1.0 - epsilon))))


def circle_wick_constant(model: FockModel) -> float:
    """c_{beta,N} = sum_{|n|<=N} 1 / (2 beta nu_n): the vacuum variance of the truncated field phi(alpha)."""
    return float(np.sum(1.0 / (2.0 * model.beta * model.energies)))


def _normal_ordered_power(raising: sp.csr_matrix, lowering: sp.csr_matrix, j: int) -> sp.csr_matrix:
    """:phi^j: = sum_r C(j, r) (A+)^r (A-)^{j-r}."""
    dim = raising.shape[0]
    lowering_powers = [sp.identity(dim, format="csr", dtype=complex)]
    raising_powers = [sp.identity(dim, format="csr", dtype=complex)]
    for _ in range(j):
        lowering_powers.append((lowering @ lowering_powers[-1]).tocsr())
        raising_powers.append((raising @ raising_powers[-1]).tocsr())
    total = sp.csr_matrix((dim, dim), dtype=complex)
    for r in range(j + 1):
        total = total + comb(j, r) * (raising_powers[r] @ lowering_powers[j - r])
    return total


def build_interaction(model: FockModel, polynomial: WickPolynomial) -> FockModel:
    """V = int_0^beta :P(phi_C(alpha)): d alpha, E_C and the ground state of H0 + V.

    P is first re-expressed against the truncated vacuum constant c_{beta,N},
    so that Wick ordering coincides with normal ordering of the ladder
    operators. The alpha-integral is evaluated exactly by the equispaced
    rule with 2 j N + 1 points, which integrates every Fourier mode of degree j.

    Raises:
        DegenerateGround: the lowest eigenvalue of H0 + V is degenerate.
    """
    if polynomial.degree > MAX_INTERACTION_DEGREE:
        raise ValueError(f"interaction degree must be at most {MAX_INTERACTION_DEGREE}, got {polynomial.degree}")
    ordered = rewick(polynomial, circle_wick_constant(model), polynomial.label)
    dim = model.dim
    coefficients = [(j, c) for j, c in enumerate(ordered.coefficients) if c and j > 0]
    interaction = sp.identity(dim, format="csr") * (model.beta * ordered.coefficients[0])
    if coefficients:
        degree = max(j for j, _ in coefficients)
        points = 2 * degree * model.mode_cut + 1
        weights = 1.0 / np.sqrt(2.0 * model.beta * model.energies)
        accumulated = sp.csr_matrix((dim, dim), dtype=complex)
        for alpha in model.beta * np.arange(points) / points:
            phases = weights * np.exp(1j * model.momenta * alpha)
            lowering = sp.csr_matrix((dim, dim), dtype=complex)
            for phase, a_n in zip(phases, model.annihilators):
                lowering = lowering + phase * a_n
            raising = lowering.conj().T.tocsr()
            for j, c_j in coefficients:
                accumulated = accumulated + c_j * _normal_ordered_power(raising, lowering, j)
        real_part = (accumulated * (model.beta / points)).real
        interaction = interaction + 0.5 * (real_part + real_part.T)
    interaction = sp.csr_matrix(interaction)
    interaction.eliminate_zeros()

    energies, vectors = sector_eigensystem(model, model.h0 + interaction)
    order = np.argsort(energies)
    ground_energy = float(energies[order[0]])
    if len(order) > 1 and energies[order[1]] - ground_energy < 1e-10 * max(1.0, abs(ground_energy)):
        raise DegenerateGround(f"lowest eigenvalues {energies[order[0]]:.12g} and {energies[order[1]]:.12g} coincide")
    ground_state = vectors[:, order[0]]
    if ground_state[0] < 0:
        ground_state = -ground_state
    LOGGER.info("Interaction built: E_C = %.6g, vacuum overlap %.4f", ground_energy, ground_state[0])
    return replace(model, interaction=interaction, ground_energy=ground_energy, ground_state=ground_state)


def sector_eigensystem(model: FockModel, operator: sp.spmatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a momentum-conserving operator, diagonalised sector by sector.

    Returns all eigenvalues and the eigenvectors embedded in the full basis (columns).
    """
    dense = operator.toarray() if sp.issparse(operator) else np.asarray(operator)
    values, vectors = [], np.zeros((model.dim, model.dim))
    column = 0
    for indices in model.sector_indices().values():
        block_values, block_vectors = scipy.linalg.eigh(dense[np.ix_(indices, indices)])
        values.append(block_values)
        vectors[np.ix_(indices, np.arange(column, column + len(indices)))] = block_vectors
        column += len(indices)
    return np.concatenate(values), vectors


def joint_spectrum(model: FockModel, interacting: bool = True) -> List[Tuple[float, float]]:
    """(momentum, energy) pairs of the Hamiltonian, sector by sector."""
    dense = model.hamiltonian(interacting).toarray()
    pairs = []
    for q, indices in model.sector_indices().items():
        momentum = 2.0 * np.pi * q / model.beta
        for energy in scipy.linalg.eigvalsh(dense[np.ix_(indices, indices)]):
            pairs.append((momentum, float(energy)))
    return pairs


@dataclass(frozen=True)
class PhiBoundReport:
    c1: float
    c2: float
    exponent: float
    norm: float
    min_eigenvalue_plus: float
    min_eigenvalue_minus: float
    passed: bool


def phi_bound_eigenvalues(
    model: FockModel,
    g: Sequence[float],
    epsilon: float,
    c1: float,
    c2: float,
    interacting: bool = False,
    exponent: Optional[float] = None,
) -> Tuple[float, float]:
    """Minimum eigenvalues of Q (c1 ||g|| (H + c2)^gamma -/+ phi_C(g)) Q, Q the occupation <= T - 2 projection."""
    return _phi_bound_scan(model, g, epsilon, [(c1, c2)], interacting, exponent)[0]


def _phi_bound_scan(model, g, epsilon, constants, interacting, exponent) -> List[Tuple[float, float]]:
    gamma = 0.5 + epsilon if exponent is None else exponent
    norm = sobolev_norm(model, g, epsilon)
    energies, vectors = scipy.linalg.eigh(model.hamiltonian(interacting).toarray())
    energies = np.maximum(energies, 0.0)
    keep = np.nonzero(model.total_occupation <= model.occ_cut - 2)[0]
    phi = field_operator(model, g).toarray()[np.ix_(keep, keep)]
    projected = vectors[keep]
    results = []
    for c1, c2 in constants:
        power = (projected * (energies + c2) ** gamma) @ projected.T
        base = c1 * norm * power
        plus = float(scipy.linalg.eigvalsh(base - phi)[0])
        minus = float(scipy.linalg.eigvalsh(base + phi)[0])
        results.append((plus, minus))
    return results


def phi_bound_check(
    model: FockModel,
    g: Sequence[float],
    epsilon: float,
    c1: Optional[float] = None,
    c2: Optional[float] = None,
    interacting: bool = False,
    exponent: Optional[float] = None,
) -> PhiBoundReport:
    """+-phi_C(g) <= c1 ||g||_{-1/2-eps/2} (H + c2)^{1/2+eps} on the truncation-safe subspace.

    Without explicit constants the grid c1, c2 in [1, 100] is scanned in
    increasing (c1, c2) order and the first pair that works is reported.
    ``exponent`` replaces 1/2 + eps (use 1 for the linear form).

    Raises:
        NoConstantsFound: no grid pair satisfies both inequalities.
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")
    gamma = 0.5 + epsilon if exponent is None else exponent
    norm = sobolev_norm(model, g, epsilon)
    if c1 is not None and c2 is not None:
        candidates = [(c1, c2)]
    else:
        candidates = [(a, b) for a in CONSTANT_GRID for b in CONSTANT_GRID]
    for (a, b), (plus, minus) in zip(candidates, _phi_bound_scan(model, g, epsilon, candidates, interacting, exponent)):
        if min(plus, minus) >= -PHI_BOUND_TOLERANCE:
            return PhiBoundReport(a, b, gamma, norm, plus, minus, True)
    if len(candidates) == 1:
        return PhiBoundReport(c1, c2, gamma, norm, plus, minus, False)
    raise NoConstantsFound(f"no (c1, c2) on the grid bounds phi(g) for epsilon={epsilon}")


def euclidean_two_point(model: FockModel, g: Sequence[float], s: float, interacting: bool = True) -> float:
    """<Omega, phi(g) e^{-s H} phi(g) Omega> with Omega the ground state of H (vacuum when free)."""
    if s < 0:
        raise ValueError(f"Euclidean time must be non-negative, got {s}")
    hamiltonian = model.hamiltonian(interacting).toarray()
    if interacting and model.ground_state is not None:
        ground = model.ground_state
    else:
        ground = np.zeros(model.dim)
        ground[0] = 1.0
    vector = field_operator(model, g) @ ground
    propagated = scipy.linalg.expm(-s * hamiltonian) @ vector
    return float(vector @ propagated)


@dataclass(frozen=True)
class GibbsSpec:
    """Finite-dimensional Gibbs state omega(A) = tr(e^{-beta H} A) / tr(e^{-beta H})."""

    hamiltonian: np.ndarray
    beta: float

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=float)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("hamiltonian must be a square matrix")
        if np.max(np.abs(h - h.T), initial=0.0) > 1e-12:
            raise ValueError("hamiltonian must be symmetric to 1e-12")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "hamiltonian", 0.5 * (h + h.T))

    def propagator(self, fraction: float) -> np.ndarray:
        """e^{-fraction beta (H - E_min)}."""
        energies, vectors = np.linalg.eigh(self.hamiltonian)
        return (vectors * np.exp(-fraction * self.beta * (energies - energies[0]))) @ vectors.T

    @property
    def partition(self) -> float:
        energies = np.linalg.eigvalsh(self.hamiltonian)
        return float(np.sum(np.exp(-self.beta * (energies - energies[0]))))


def gibbs_expectation(spec: GibbsSpec, observable: np.ndarray) -> float:
    return float(np.trace(spec.propagator(1.0) @ observable) / spec.partition)


def gibbs_norm(spec: GibbsSpec, A: np.ndarray, p: int) -> float:
    """||A||_p = (tr((e^{-beta H / p} A)^p) / Z)^{1/p} for PSD A."""
    scale = float(np.linalg.norm(A, 2))
    if scale == 0.0:
        return 0.0
    step = spec.propagator(1.0 / p) @ (A / scale)
    value = float(np.trace(np.linalg.matrix_power(step, p)).real) / spec.partition
    return scale * max(value, 0.0) ** (1.0 / p)


def gibbs_exponents(z_list: Sequence[float]) -> List[int]:
    """p_j from the imaginary-time circle: A_j sits at z_1 + ... + z_j and the wrap gap is 1 - sum z.

    Each p_j is the smallest positive even integer with 1/p_j <= the smaller adjacent gap.
    """
    gaps = list(z_list) + [1.0 - float(sum(z_list))]
    exponents = []
    for j in range(len(gaps)):
        gap = min(gaps[j - 1], gaps[j])
        if gap <= 0:
            raise ExponentInfeasible(f"factor {j} has a zero imaginary-time gap")
        p = 2
        while 1.0 / p > gap * (1 + 1e-12):
            p += 2
        exponents.append(p)
    return exponents


@dataclass(frozen=True)
class GibbsHolderReport:
    lhs: float
    rhs: float
    exponents: Tuple[int, ...]
    norms: Tuple[float, ...]
    passed: bool


def gibbs_correlator(spec: GibbsSpec, A_list: Sequence[np.ndarray], z_list: Sequence[float]) -> float:
    """|tr(e^{-(1 - sum z) beta H} A_n e^{-z_n beta H} ... A_1 e^{-z_1 beta H} A_0)| / Z."""
    product = spec.propagator(1.0 - float(sum(z_list)))
    for A, z in zip(reversed(A_list[1:]), reversed(list(z_list))):
        product = product @ A @ spec.propagator(z)
    product = product @ A_list[0]
    return float(abs(np.trace(product))) / spec.partition


def gibbs_holder_check(spec: GibbsSpec, A_list: Sequence[np.ndarray], z_list: Sequence[float]) -> GibbsHolderReport:
    """LHS <= prod ||A_j||_{p_j} (1 + 1e-10).

    Raises:
        ExponentInfeasible: some imaginary-time gap is zero.
    """
    if len(A_list) != len(z_list) + 1:
        raise ValueError(f"{len(A_list)} operators need {len(A_list) - 1} imaginary-time steps")
    if any(z < 0 for z in z_list) or sum(z_list) > 1.0 + 1e-12:
        raise ValueError("imaginary-time steps must be non-negative and sum to at most 1")
    for A in A_list:
        if np.linalg.eigvalsh(0.5 * (A + A.T))[0] < -1e-10:
            raise ValueError("operators must be positive semidefinite")
    exponents = gibbs_exponents(z_list)
    norms = tuple(gibbs_norm(spec, A, p) for A, p in zip(A_list, exponents))
    lhs = gibbs_correlator(spec, A_list, z_list)
    rhs = float(np.prod(norms))
    return GibbsHolderReport(lhs, rhs, tuple(exponents), norms, bool(lhs <= rhs * (1 + 1e-10)))


def random_holder_trial(
    rng: np.random.Generator, max_dim: int = 40, max_factors: int = 4
) -> Tuple[GibbsSpec, List[np.ndarray], List[float]]:
    """A random symmetric H, random PSD operators and random feasible imaginary-time steps."""
    dim = int(rng.integers(2, max_dim + 1))
    n = int(rng.integers(0, max_factors))
    raw = rng.standard_normal((dim, dim))
    hamiltonian = 0.5 * (raw + raw.T)
    operators = []
    for _ in range(n + 1):
        factor = rng.standard_normal((dim, dim))
        operators.append(factor @ factor.T / dim)
    gaps = MIN_TRIAL_GAP + (1.0 - MIN_TRIAL_GAP * (n + 1)) * rng.dirichlet(np.ones(n + 1))
    steps = [float(z) for z in gaps[:n]]
    return GibbsSpec(hamiltonian=hamiltonian, beta=float(rng.uniform(0.2, 3.0))), operators, steps


def vacuum_overlap(model: FockModel) -> float:
    """(Omega_C, Omega_0)^2."""
    if model.ground_state is None:
        return 1.0
    return float(model.ground_state[0] ** 2)


def free_euclidean_two_point(model: FockModel, g: Sequence[float], s: float) -> float:
    """sum_n g_n^2 e^{-nu_n s} / (2 nu_n)."""
    g = np.asarray(g, dtype=float)
    return float(np.sum(g**2 * np.exp(-model.energies * s) / (2.0 * model.energies)))


def momentum_commutator(model: FockModel) -> float:
    """max |[V, P]| entry; zero when V conserves momentum."""
    if model.interaction is None:
        return 0.0
    commutator = model.interaction @ model.momentum - model.momentum @ model.interaction
    return float(np.max(np.abs(commutator.toarray()), initial=0.0))

