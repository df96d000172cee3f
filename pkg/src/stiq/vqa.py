"""Variational eigensolver flavor of the pair protocol.

Instead of logits, each circuit contributes a scalar Hamiltonian
expectation; the pair objective averages the two energies and subtracts a
penalty times the squared energy gap:

    total = 0.5 * (e1 + e2) - penalty * (e1 - e2)^2

so minimizing drives the combined (mean) energy down while the penalty
rewards keeping the individual energies apart. Pauli strings are written
left to right over ascending qubit index: "XZ" puts X on qubit 0, Z on
qubit 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import simulator, training
from .simulator import CircuitTemplate, StateVector
from .templates import EncoderSpec, PqcSpec, expand_template

_PAULI_MATRICES = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}


@dataclass(frozen=True)
class Hamiltonian:
    """Weighted Pauli strings, e.g. ((1.0, "ZZ"), (0.5, "XI"))."""

    terms: tuple[tuple[float, str], ...]

    def __post_init__(self) -> None:
        if not self.terms:
            raise ValueError("hamiltonian needs at least one term")
        width = len(self.terms[0][1])
        for coef, pauli in self.terms:
            if not np.isfinite(coef):
                raise ValueError("term coefficients must be finite")
            if len(pauli) != width or not pauli:
                raise ValueError("all pauli strings must share one nonzero length")
            if any(ch not in "IXYZ" for ch in pauli):
                raise ValueError(f"bad pauli string {pauli!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.terms[0][1])


def parse_hamiltonian(text: str) -> Hamiltonian:
    """Parse terms like "Z", "0.5*ZZ + -0.25*XI". '+' separates terms,
    each term is either a pauli string or coef*string."""
    terms = []
    for chunk in text.split("+"):
        chunk = chunk.strip()
        if not chunk:
            raise ValueError("empty hamiltonian term")
        if "*" in chunk:
            coef_text, pauli = chunk.split("*", 1)
            coef = float(coef_text.strip())
            pauli = pauli.strip()
        else:
            coef, pauli = 1.0, chunk
        terms.append((coef, pauli.upper()))
    return Hamiltonian(tuple(terms))


def term_expectation(state: StateVector, pauli: str) -> float:
    """Expectation of one Pauli string: rotate X/Y supports into the Z
    basis on a copy, then sum sign-weighted probabilities over the
    string's support."""
    if len(pauli) != state.n_qubits:
        raise ValueError("pauli string length does not match qubit count")
    rotated = state
    for q, ch in enumerate(pauli):
        if ch == "X":
            rotated = simulator.apply_gate(rotated, simulator.GateOp("h", target=q))
        elif ch == "Y":
            rotated = simulator.apply_gate(
                rotated,
                simulator.GateOp(
                    "rz", target=q, angle=simulator.Angle.fixed(-0.5 * np.pi)
                ),
            )
            rotated = simulator.apply_gate(rotated, simulator.GateOp("h", target=q))
    mask = 0
    for q, ch in enumerate(pauli):
        if ch != "I":
            mask |= 1 << q
    if mask == 0:
        return 1.0
    probs = rotated.probabilities()
    idx = np.arange(probs.shape[0], dtype=np.uint64)
    signs = 1.0 - 2.0 * (np.bitwise_count(idx & np.uint64(mask)) & 1)
    return float((probs * signs).sum())


def ham_expectation(
    template: CircuitTemplate, params: np.ndarray, ham: Hamiltonian
) -> float:
    if ham.n_qubits != template.n_qubits:
        raise ValueError("hamiltonian and template qubit counts differ")
    state = simulator.run_circuit(template, params)
    return float(
        sum(coef * term_expectation(state, pauli) for coef, pauli in ham.terms)
    )


def hamiltonian_matrix(ham: Hamiltonian) -> np.ndarray:
    """Dense matrix with qubit 0 as the least significant index bit."""
    dim = 2**ham.n_qubits
    out = np.zeros((dim, dim), dtype=np.complex128)
    for coef, pauli in ham.terms:
        m = np.array([[1.0 + 0j]])
        for ch in reversed(pauli):  # leftmost char is qubit 0 -> innermost kron
            m = np.kron(m, _PAULI_MATRICES[ch])
        out += coef * m
    return out


def ground_energy(ham: Hamiltonian) -> float:
    return float(np.linalg.eigvalsh(hamiltonian_matrix(ham))[0])


def vqa_total_loss(e1: float, e2: float, penalty_lambda: float) -> float:
    """Mean energy plus the (negative squared gap) divergence penalty."""
    if not 0.0 <= penalty_lambda <= 1.0:
        raise ValueError("penalty_lambda must be in [0, 1]")
    return 0.5 * (e1 + e2) - penalty_lambda * (e1 - e2) ** 2


def default_vqa_template(n_qubits: int) -> CircuitTemplate:
    pqc = PqcSpec(template_id="circuit1" if n_qubits == 1 else "circuit4", n_layers=1)
    encoder = EncoderSpec(h_prefix=False)
    return expand_template(n_qubits, encoder, pqc, n_features=0)


def vqa_train_demo(
    ham: Hamiltonian,
    template: CircuitTemplate | None = None,
    steps: int = 200,
    penalty_lambda: float = 0.1,
    seed: int = 0,
    lr: float = 0.1,
    engine: training.GradientEngine | None = None,
) -> dict:
    """Train two circuits on the paired energy objective and report the
    trajectory plus the exact ground energy from the dense matrix.

    Returns a dict with keys energy_a, energy_b, combined_energy,
    ground_energy, params_a, params_b and a per-step trace."""
    template = template or default_vqa_template(ham.n_qubits)
    engine = engine or training.GradientEngine(kind="exact")
    rng = np.random.default_rng(seed)
    n = template.n_params
    params = rng.uniform(0.0, 2.0 * np.pi, size=2 * n)

    def energies(vec: np.ndarray) -> tuple[float, float]:
        return (
            ham_expectation(template, vec[:n], ham),
            ham_expectation(template, vec[n:], ham),
        )

    def loss_at(vec: np.ndarray) -> float:
        e1, e2 = energies(vec)
        return vqa_total_loss(e1, e2, penalty_lambda)

    opt = training.adam_init(2 * n, lr)
    trace = []
    for step in range(1, steps + 1):
        grad = training.gradient(loss_at, params, engine)
        params, opt = training.adam_step(opt, params, grad)
        e1, e2 = energies(params)
        trace.append(
            {
                "step": step,
                "energy_a": e1,
                "energy_b": e2,
                "combined_energy": 0.5 * (e1 + e2),
                "total_loss": vqa_total_loss(e1, e2, penalty_lambda),
            }
        )
    e1, e2 = energies(params)
    return {
        "energy_a": e1,
        "energy_b": e2,
        "combined_energy": 0.5 * (e1 + e2),
        "ground_energy": ground_energy(ham),
        "params_a": params[:n].copy(),
        "params_b": params[n:].copy(),
        "penalty_lambda": penalty_lambda,
        "steps": steps,
        "trace": trace,
    }
