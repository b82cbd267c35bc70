"""Named test problems shared by the test suite and the CLI."""

from __future__ import annotations

from dataclasses import dataclass

from .problem import Problem

DYADIC_GRID = tuple(2.0**-k for k in range(4, 11))


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    alpha: str
    beta: str
    f: str
    eps_list: tuple[float, ...]
    note: str = ""

    def problem(self) -> Problem:
        return Problem(self.alpha, self.beta, self.f)


CORPUS = {
    e.name: e
    for e in (
        CorpusEntry("unit", "1", "1", "1", DYADIC_GRID,
                    "closed-form solution; only eps <= q = 0.015 is admissible"),
        CorpusEntry("constant", "4.5", "1", "1",
                    (1 / 16, 1 / 18, 1 / 20, 1 / 22, 1 / 24, 1 / 28),
                    "constant data with a dense eps grid inside the admissible range"),
        CorpusEntry("variable", "2 + sin(x)", "1", "exp(x)", DYADIC_GRID,
                    "variable alpha with different layer rates at the two ends"),
        CorpusEntry("oscillatory", "4.5", "1", "sin(20*x)", DYADIC_GRID,
                    "large outer derivatives keep the remainder above rounding"),
        CorpusEntry("graded", "1 + x^2", "exp(-x)", "cos(x)", DYADIC_GRID,
                    "all three data functions vary"),
    )
}


def get(name: str) -> CorpusEntry:
    try:
        return CORPUS[name]
    except KeyError:
        raise KeyError(f"unknown corpus problem {name!r}; known: {', '.join(CORPUS)}") from None
