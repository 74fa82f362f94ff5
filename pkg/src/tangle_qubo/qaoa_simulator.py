"""Statevector simulation of QAOA on QUBO-derived Ising Hamiltonians.

Qubit ``i`` holds variable ``x_i`` and is bit ``i`` of the basis-state
index (little-endian). Because the cost Hamiltonian is diagonal, each cost
layer is a per-amplitude phase ``exp(-i gamma E(x))``; the transverse-field
mixer factorises into one ``exp(-i beta X)`` rotation per qubit.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .qubo_builder import QuboModel

DEFAULT_QUBIT_CAP = 20


class QubitCapExceeded(ValueError):
    pass


@dataclass
class IsingHamiltonian:
    n: int
    constant: Fraction | float
    h: dict[int, Fraction | float]
    J: dict[tuple[int, int], Fraction | float]

    def energy_of_spins(self, z) -> float:
        e = self.constant
        for i, c in self.h.items():
            e += c * z[i]
        for (i, j), c in self.J.items():
            e += c * z[i] * z[j]
        return e

    def energy_of_bits(self, x) -> float:
        return self.energy_of_spins([1 - 2 * int(b) for b in x])

    def diagonal(self) -> np.ndarray:
        """Energies of all 2^n basis states."""
        idx = np.arange(2 ** self.n, dtype=np.int64)
        z = [1.0 - 2.0 * ((idx >> i) & 1) for i in range(self.n)]
        e = np.full(2 ** self.n, float(self.constant))
        for i, c in self.h.items():
            e += float(c) * z[i]
        for (i, j), c in self.J.items():
            e += float(c) * z[i] * z[j]
        return e

    def packed_energies(self, codes: np.ndarray) -> np.ndarray:
        """Energies of basis states given as packed integers (bit i = x_i).

        Works directly on the packed words: each term is evaluated with
        shifts and masks over the whole batch at once.
        """
        codes = np.asarray(codes, dtype=np.uint64)
        e = np.full(codes.shape, float(self.constant))
        one = np.uint64(1)
        bits = {}

        def bit(i):
            if i not in bits:
                bits[i] = ((codes >> np.uint64(i)) & one).astype(np.int8)
            return bits[i]

        for i, c in self.h.items():
            e += float(c) * (1 - 2 * bit(i))
        for (i, j), c in self.J.items():
            # z_i z_j = +1 when the bits agree, -1 otherwise
            parity = ((codes >> np.uint64(i)) ^ (codes >> np.uint64(j))) & one
            e += float(c) * (1.0 - 2.0 * parity.astype(np.float64))
        return e


def qubo_to_ising(m: QuboModel) -> IsingHamiltonian:
    """Substitute x_i = (1 - z_i)/2 and collect terms."""
    const = Fraction(m.offset)
    h: dict[int, Fraction] = {}
    J: dict[tuple[int, int], Fraction] = {}
    for i, c in m.linear.items():
        c = Fraction(c)
        const += c / 2
        h[i] = h.get(i, 0) - c / 2
    for (i, j), c in m.quadratic.items():
        c = Fraction(c)
        # c x_i x_j = c/4 (1 - z_i - z_j + z_i z_j)
        const += c / 4
        h[i] = h.get(i, 0) - c / 4
        h[j] = h.get(j, 0) - c / 4
        J[(i, j)] = J.get((i, j), 0) + c / 4
    h = {i: v for i, v in h.items() if v}
    J = {k: v for k, v in J.items() if v}
    return IsingHamiltonian(m.n, const, h, J)


@dataclass
class QaoaParams:
    gammas: list[float]
    betas: list[float]

    def __post_init__(self):
        if len(self.gammas) != len(self.betas):
            raise ValueError("gammas and betas must have the same length")

    @property
    def p(self) -> int:
        return len(self.gammas)


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise QubitCapExceeded(f"{n} qubits exceeds the simulator cap of {cap}")


def apply_mixer(state: np.ndarray, n: int, beta: float) -> np.ndarray:
    c, s = math.cos(beta), -1j * math.sin(beta)
    for q in range(n):
        v = state.reshape(-1, 2, 2 ** q)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :]
        v[:, 0, :] = c * a0 + s * a1
        v[:, 1, :] = s * a0 + c * a1
    return state


def run_qaoa_circuit(H: IsingHamiltonian, theta: QaoaParams, cap: int = DEFAULT_QUBIT_CAP,
                     diagonal: np.ndarray | None = None) -> np.ndarray:
    """Prepare ``prod_l U_M(beta_l) U_C(gamma_l) H^n |0>``."""
    _check_cap(H.n, cap)
    diag = H.diagonal() if diagonal is None else diagonal
    state = np.full(2 ** H.n, 2 ** (-H.n / 2), dtype=np.complex128)
    for gamma, beta in zip(theta.gammas, theta.betas):
        state *= np.exp(-1j * gamma * diag)
        apply_mixer(state, H.n, beta)
    return state


@dataclass
class SampleBatch:
    shots: int
    codes: np.ndarray  # packed basis states, one per distinct outcome
    counts: np.ndarray
    energies: np.ndarray
    n_bits: int
    seed: int | None = None

    @property
    def samples(self) -> list[tuple[list[int], int]]:
        n = self.n_bits
        return [([(int(c) >> i) & 1 for i in range(n)], int(k)) for c, k in zip(self.codes, self.counts)]

    def expanded_energies(self) -> np.ndarray:
        return np.repeat(self.energies, self.counts)


def sample_state(state: np.ndarray, shots: int, seed, H: IsingHamiltonian) -> SampleBatch:
    """Multinomial measurement of ``state`` in the computational basis."""
    probs = np.abs(state) ** 2
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, probs)
    codes = np.nonzero(counts)[0].astype(np.uint64)
    return SampleBatch(shots, codes, counts[codes.astype(np.int64)], H.packed_energies(codes),
                       H.n, seed if isinstance(seed, int) else None)


def cvar(batch: SampleBatch, alpha: float) -> float:
    """Mean of the lowest ceil(alpha * shots) sampled energies."""
    if batch.shots <= 0:
        raise ValueError("empty batch")
    if not 0 < alpha <= 1:
        raise ValueError("alpha must be in (0, 1]")
    keep = math.ceil(alpha * batch.shots - 1e-12)
    order = np.argsort(batch.energies, kind="stable")
    taken = 0
    total = 0.0
    for i in order:
        k = min(int(batch.counts[i]), keep - taken)
        total += k * float(batch.energies[i])
        taken += k
        if taken >= keep:
            break
    return total / keep


@dataclass
class QaoaResult:
    params: QaoaParams
    batch: SampleBatch
    best_x: list[int]
    best_energy: float
    trace: list[dict] = field(default_factory=list)
    first_cvar: float = math.nan
    final_cvar: float = math.nan

    def to_json(self) -> str:
        return json.dumps({
            "gammas": self.params.gammas, "betas": self.params.betas,
            "best_x": self.best_x, "best_energy": self.best_energy,
            "first_cvar": self.first_cvar, "final_cvar": self.final_cvar,
            "trace": self.trace,
            "histogram": [[int(c), int(k), float(e)] for c, k, e in
                          zip(self.batch.codes, self.batch.counts, self.batch.energies)],
        })

    def trace_csv(self) -> str:
        """One row per circuit evaluation: iteration, cvar, incumbent, angles."""
        buf = io.StringIO()
        p = self.params.p
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "cvar", "incumbent"] + [f"gamma{i}" for i in range(p)] + [f"beta{i}" for i in range(p)])
        for row in self.trace:
            w.writerow([row["iteration"], row["cvar"], row["incumbent"], *row["theta"]])
        return buf.getvalue()


def _initial_params(p: int, diag: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # linear ramp; gamma scaled so the typical phase spread is O(1) radian
    spread = float(np.std(diag)) or 1.0
    frac = (np.arange(p) + 0.5) / p
    gammas = (0.5 / spread) * frac
    betas = (math.pi / 4) * (1 - frac)
    return gammas, betas


def optimize_qaoa(m: QuboModel, p: int = 2, shots: int = 1000, max_iters: int = 100,
                  alpha_cvar: float = 0.1, seed: int = 0, cap: int = DEFAULT_QUBIT_CAP,
                  initial: QaoaParams | None = None) -> QaoaResult:
    """Pattern-search the QAOA angles to minimise CVaR of sampled energies.

    One iteration is one circuit evaluation with a fresh batch of ``shots``
    samples. A trial point replaces the incumbent only if its CVaR is lower,
    so the incumbent's CVaR never increases. Each coordinate is probed in
    both directions; when a full sweep fails, all steps are halved.
    """
    if not 1 <= p <= 20:
        raise ValueError("p must be between 1 and 20")
    _check_cap(m.n, cap)
    H = qubo_to_ising(m)
    diag = H.diagonal()

    def batch_for(theta: np.ndarray, it: int) -> SampleBatch:
        state = run_qaoa_circuit(H, QaoaParams(list(theta[:p]), list(theta[p:])), cap, diag)
        child = np.random.SeedSequence(seed, spawn_key=(it,))
        return sample_state(state, shots, child, H)

    if initial is not None:
        theta = np.array(list(initial.gammas) + list(initial.betas), dtype=float)
    else:
        g0, b0 = _initial_params(p, diag)
        theta = np.concatenate([g0, b0])
    upper = np.array([2 * math.pi] * p + [math.pi] * p)
    steps = np.concatenate([np.full(p, max(theta[:p].max(), 1e-3) / 2), np.full(p, math.pi / 16)])

    best_code, best_e = None, math.inf
    trace: list[dict] = []
    it = 0

    def evaluate(th):
        nonlocal it, best_code, best_e
        b = batch_for(th, it)
        it += 1
        j = int(np.argmin(b.energies))
        if b.energies[j] < best_e:
            best_e, best_code = float(b.energies[j]), int(b.codes[j])
        return cvar(b, alpha_cvar), b

    inc_val, inc_batch = evaluate(theta)
    first = inc_val
    trace.append({"iteration": it, "cvar": inc_val, "incumbent": inc_val, "theta": theta.tolist()})
    while it < max_iters and steps.max() > 1e-4:
        improved = False
        for k in range(2 * p):
            for sign in (1, -1):
                if it >= max_iters:
                    break
                trial = theta.copy()
                trial[k] = (trial[k] + sign * steps[k]) % upper[k]
                val, b = evaluate(trial)
                if val < inc_val:
                    theta, inc_val, inc_batch = trial, val, b
                    improved = True
                trace.append({"iteration": it, "cvar": val, "incumbent": inc_val, "theta": trial.tolist()})
                if improved:
                    break
        if not improved:
            steps = steps / 2

    params = QaoaParams(list(theta[:p]), list(theta[p:]))
    final = batch_for(theta, it)
    j = int(np.argmin(final.energies))
    if final.energies[j] < best_e:
        best_e, best_code = float(final.energies[j]), int(final.codes[j])
    best_x = [(best_code >> i) & 1 for i in range(m.n)]
    return QaoaResult(params, final, best_x, best_e, trace, first, cvar(final, alpha_cvar))
