"""Seeded random circuits for property and acceptance tests."""

import random

ONE_QUBIT = ("H", "T", "Tdag", "S")


def random_circuit(rng: random.Random, max_qubits=6, max_instr=12, io_prob=0.3, min_instr=1) -> str:
    nq = rng.randint(2, max_qubits)
    lines = [f"QUBIT q{i}, 0{' io' if rng.random() < io_prob else ''}" for i in range(nq)]
    for _ in range(rng.randint(min_instr, max_instr)):
        if rng.random() < 0.5:
            a, b = rng.sample(range(nq), 2)
            lines.append(f"CNOT q{a}, q{b}")
        else:
            lines.append(f"{rng.choice(ONE_QUBIT)} q{rng.randrange(nq)}")
    return "\n".join(lines) + "\n"
