"""Circuit construction: feature encoding plus a small catalog of layered
parameterized circuits.

The catalog ids (circuit1, circuit4, circuit6, circuit8, circuit19) follow
the usual expressibility-benchmark numbering. Gate order inside a layer is
fixed and documented here because parameter slots are assigned in emission
order; tests pin the expansions structurally, so any reordering is a
breaking change.

Per layer, on n qubits:

* circuit1: RX column, RZ column. 2n parameters.
* circuit4: RX column, RZ column, CRX ladder (control q+1 -> target q,
  q = n-2 .. 0). 3n - 1 parameters.
* circuit6: RX column, RZ column, CRX all-to-all (control c = n-1 .. 0,
  target t = n-1 .. 0, t != c), RX column, RZ column. n^2 + 3n parameters.
* circuit8: RX column, RZ column, CRX on even-start adjacent pairs
  (control q+1 -> target q for even q, descending), RX column, RZ column,
  CRX on odd-start adjacent pairs (descending). 5n - 1 parameters.
* circuit19: RX column, RZ column, CRX ring (control q -> target
  (q+1) mod n, q ascending). 3n parameters.

Columns always run over qubits in ascending order. Encoding slots come
before all layer parameters: feature f lands on qubit f mod n via one
rotation gate per feature, emitted in ascending feature order (round-robin
layout), optionally preceded by one H per qubit so that phase-only encodings
still move the measured expectations.
"""

from __future__ import annotations

from dataclasses import dataclass

from .simulator import Angle, CircuitTemplate, GateOp

TEMPLATE_IDS = ("circuit1", "circuit4", "circuit6", "circuit8", "circuit19")

ENCODER_GATE_KINDS = ("rx", "ry", "rz")


@dataclass(frozen=True)
class EncoderSpec:
    gate_kind: str = "rz"
    features_per_qubit: int = 2
    layout: str = "round_robin"
    h_prefix: bool = True

    def validate(self) -> None:
        if self.gate_kind not in ENCODER_GATE_KINDS:
            raise ValueError(f"encoder gate must be one of {ENCODER_GATE_KINDS}")
        if self.features_per_qubit < 1:
            raise ValueError("features_per_qubit must be >= 1")
        if self.layout != "round_robin":
            raise ValueError(f"unknown encoder layout {self.layout!r}")


@dataclass(frozen=True)
class PqcSpec:
    template_id: str = "circuit4"
    n_layers: int = 1

    def validate(self) -> None:
        if self.template_id not in TEMPLATE_IDS:
            raise ValueError(f"unknown template {self.template_id!r}")
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")


def params_per_layer(template_id: str, n_qubits: int) -> int:
    if template_id == "circuit1":
        return 2 * n_qubits
    if template_id == "circuit4":
        return 3 * n_qubits - 1
    if template_id == "circuit6":
        return n_qubits * n_qubits + 3 * n_qubits
    if template_id == "circuit8":
        return 5 * n_qubits - 1
    if template_id == "circuit19":
        if n_qubits < 2:
            raise ValueError("circuit19 needs at least 2 qubits")
        return 3 * n_qubits
    raise ValueError(f"unknown template {template_id!r}")


def _rotation_column(kind: str, n_qubits: int, base: int) -> list[GateOp]:
    return [
        GateOp(kind, target=q, angle=Angle.param(base + q)) for q in range(n_qubits)
    ]


def _layer_ops(template_id: str, n_qubits: int, base: int) -> list[GateOp]:
    n = n_qubits
    ops: list[GateOp] = []
    slot = base

    def crx(control: int, target: int) -> None:
        nonlocal slot
        ops.append(GateOp("crx", target=target, control=control, angle=Angle.param(slot)))
        slot += 1

    ops += _rotation_column("rx", n, slot)
    slot += n
    ops += _rotation_column("rz", n, slot)
    slot += n

    if template_id == "circuit1":
        pass
    elif template_id == "circuit4":
        for q in range(n - 2, -1, -1):
            crx(q + 1, q)
    elif template_id == "circuit6":
        for c in range(n - 1, -1, -1):
            for t in range(n - 1, -1, -1):
                if t != c:
                    crx(c, t)
        ops += _rotation_column("rx", n, slot)
        slot += n
        ops += _rotation_column("rz", n, slot)
        slot += n
    elif template_id == "circuit8":
        for q in range(n - 2, -1, -1):
            if q % 2 == 0:
                crx(q + 1, q)
        ops += _rotation_column("rx", n, slot)
        slot += n
        ops += _rotation_column("rz", n, slot)
        slot += n
        for q in range(n - 2, -1, -1):
            if q % 2 == 1:
                crx(q + 1, q)
    elif template_id == "circuit19":
        for q in range(n):
            crx(q, (q + 1) % n)
    else:
        raise ValueError(f"unknown template {template_id!r}")

    assert slot - base == params_per_layer(template_id, n)
    return ops


def encoding_ops(n_qubits: int, encoder: EncoderSpec, n_features: int) -> list[GateOp]:
    encoder.validate()
    capacity = n_qubits * encoder.features_per_qubit
    if n_features > capacity:
        raise ValueError(
            f"{n_features} features exceed capacity {capacity} "
            f"({n_qubits} qubits x {encoder.features_per_qubit} per qubit)"
        )
    ops: list[GateOp] = []
    if encoder.h_prefix:
        ops += [GateOp("h", target=q) for q in range(n_qubits)]
    ops += [
        GateOp(encoder.gate_kind, target=f % n_qubits, angle=Angle.feature(f))
        for f in range(n_features)
    ]
    return ops


def expand_template(
    n_qubits: int, encoder: EncoderSpec, pqc: PqcSpec, n_features: int
) -> CircuitTemplate:
    """Encoding ops first, then n_layers repetitions of the chosen pattern
    with consecutive parameter slots (layer-major)."""
    pqc.validate()
    ppl = params_per_layer(pqc.template_id, n_qubits)
    ops = encoding_ops(n_qubits, encoder, n_features)
    for layer in range(pqc.n_layers):
        ops += _layer_ops(pqc.template_id, n_qubits, layer * ppl)
    return CircuitTemplate(
        n_qubits=n_qubits,
        ops=tuple(ops),
        n_params=pqc.n_layers * ppl,
        n_features=n_features,
    )
