"""Two-way finite-state transducers used as exact task oracles.

A machine walks an endmarker-delimited tape ``⋊ w ⋉`` with a head that
may move both ways, emitting an output chunk on each transition. The
plain machines cover echoing, reversal, and total reduplication; a
single-counter extension covers quadratic copying, whose copy count
depends on the input length.

These interpreters share no code with the direct string functions they
mirror, so agreement between the two is a meaningful check.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .errors import SeqductError
from .tasks import ALPHABET

LEFT_MARK = "⋊"
RIGHT_MARK = "⋉"

# Step budget factor: every builder halts well within 4*(|w|+2)^2 steps
# (the quadratic machine makes |w|+1 round trips of at most 2(|w|+2) steps).
DEFAULT_STEP_FACTOR = 4


class RejectionError(SeqductError):
    """The machine had no transition for the current (state, symbol)."""


class NonHaltingError(SeqductError):
    """The machine exceeded its step budget without reaching the final state."""


@dataclass
class TwoWayFST:
    """Deterministic two-way transducer.

    ``transitions`` maps (state, symbol) to (output, move, next state)
    where symbol is a letter or an endmarker, output may be empty, and
    move is +1 or -1.
    """

    initial: str
    final: str
    transitions: dict[tuple[str, str], tuple[str, int, str]]


@dataclass
class CountingTwoWayFST:
    """Two-way transducer with one nonnegative counter register.

    Transition keys carry a zero-test: (state, symbol, flag) where flag
    is True (register must be zero), False (must be nonzero), or None
    (don't care). Values add a register op in {"inc", "dec", "none"}.
    """

    initial: str
    final: str
    transitions: dict[tuple[str, str, bool | None], tuple[str, int, str, str]]


def run_2way(machine, w: str, step_limit: int | None = None) -> str:
    """Output along the unique run of the machine on ``⋊ w ⋉``."""
    out, _ = run_2way_trace(machine, w, step_limit)
    return out


def run_2way_trace(machine, w: str, step_limit: int | None = None) -> tuple[str, int]:
    """Like :func:`run_2way` but also returns the number of steps taken."""
    if step_limit is None:
        step_limit = DEFAULT_STEP_FACTOR * (len(w) + 2) ** 2
    counting = isinstance(machine, CountingTwoWayFST)
    tape = LEFT_MARK + w + RIGHT_MARK
    state = machine.initial
    head = 0
    register = 0
    pieces: list[str] = []
    steps = 0
    while state != machine.final:
        steps += 1
        if steps > step_limit:
            raise NonHaltingError(f"no halt within {step_limit} steps on input of length {len(w)}")
        if not 0 <= head < len(tape):
            raise RejectionError(f"head left the tape in state {state}")
        symbol = tape[head]
        if counting:
            entry = machine.transitions.get((state, symbol, register == 0))
            if entry is None:
                entry = machine.transitions.get((state, symbol, None))
            if entry is None:
                raise RejectionError(f"no transition from ({state}, {symbol!r}, "
                                     f"zero={register == 0})")
            output, move, state, reg_op = entry
            if reg_op == "inc":
                register += 1
            elif reg_op == "dec":
                if register == 0:
                    raise RejectionError(f"decrement of zero register in state {state}")
                register -= 1
        else:
            entry = machine.transitions.get((state, symbol))
            if entry is None:
                raise RejectionError(f"no transition from ({state}, {symbol!r})")
            output, move, state = entry
        if output:
            pieces.append(output)
        head += move
    return "".join(pieces), steps


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def _echo_all(trans: dict, state: str, move: int, next_state: str) -> None:
    for ch in ALPHABET:
        trans[(state, ch)] = (ch, move, next_state)


def _skip_all(trans: dict, state: str, move: int, next_state: str) -> None:
    for ch in ALPHABET:
        trans[(state, ch)] = ("", move, next_state)


def build_identity_fst() -> TwoWayFST:
    """One left-to-right pass echoing every symbol."""
    trans: dict = {("q0", LEFT_MARK): ("", 1, "q1"),
                   ("q1", RIGHT_MARK): ("", 1, "qf")}
    _echo_all(trans, "q1", 1, "q1")
    return TwoWayFST(initial="q0", final="qf", transitions=trans)


def build_reversal_fst() -> TwoWayFST:
    """Silent forward scan, then a backward scan emitting each symbol."""
    trans: dict = {("q0", LEFT_MARK): ("", 1, "q1"),
                   ("q1", RIGHT_MARK): ("", -1, "q2"),
                   ("q2", LEFT_MARK): ("", 1, "qf")}
    _skip_all(trans, "q1", 1, "q1")
    _echo_all(trans, "q2", -1, "q2")
    return TwoWayFST(initial="q0", final="qf", transitions=trans)


def build_total_red_fst() -> TwoWayFST:
    """Echo forward, rewind silently, echo forward again (three scans)."""
    trans: dict = {("q0", LEFT_MARK): ("", 1, "q1"),
                   ("q1", RIGHT_MARK): ("", -1, "q2"),
                   ("q2", LEFT_MARK): ("", 1, "q3"),
                   ("q3", RIGHT_MARK): ("", 1, "qf")}
    _echo_all(trans, "q1", 1, "q1")
    _skip_all(trans, "q2", -1, "q2")
    _echo_all(trans, "q3", 1, "q3")
    return TwoWayFST(initial="q0", final="qf", transitions=trans)


def build_quadratic_machine() -> CountingTwoWayFST:
    """Count the input length, then emit that many echo passes.

    The first forward pass increments the register per symbol. Each
    later round echoes the input left to right, rewinds, and decrements;
    the machine halts when it returns to the left marker with the
    register at zero.
    """
    trans: dict = {
        ("q0", LEFT_MARK, None): ("", 1, "q1", "none"),
        ("q1", RIGHT_MARK, None): ("", -1, "q2", "none"),
        # At the left marker: zero register means done, otherwise spend
        # one count on another echo pass.
        ("q2", LEFT_MARK, True): ("", 1, "qf", "none"),
        ("q2", LEFT_MARK, False): ("", 1, "q3", "dec"),
        ("q3", RIGHT_MARK, None): ("", -1, "q2", "none"),
    }
    for ch in ALPHABET:
        trans[("q1", ch, None)] = ("", 1, "q1", "inc")
        trans[("q2", ch, None)] = ("", -1, "q2", "none")
        trans[("q3", ch, None)] = (ch, 1, "q3", "none")
    return CountingTwoWayFST(initial="q0", final="qf", transitions=trans)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def parse_fst(text: str, initial: str = "q0", final: str = "qf") -> TwoWayFST:
    """Parse a machine from one-transition-per-line text.

    Line shape: ``state symbol → output move state``. The symbol Σ
    stands for every letter at once; as an output it echoes the symbol
    read, and λ is the empty output. Moves are +1 or -1. Blank lines
    and ``#`` comments are skipped.
    """

    transitions: dict[tuple[str, str], tuple[str, int, str]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        line = line.replace("->", "→")
        if "→" not in line:
            raise SeqductError(f"line {lineno}: missing arrow")
        left, right = line.split("→", 1)
        left_parts = left.split()
        right_parts = right.split()
        if len(left_parts) != 2 or len(right_parts) != 3:
            raise SeqductError(f"line {lineno}: expected 'state symbol → output move state'")
        state, symbol = left_parts
        output, move_text, next_state = right_parts
        if move_text not in ("+1", "-1", "−1"):
            raise SeqductError(f"line {lineno}: move must be +1 or -1, got {move_text!r}")
        move = 1 if move_text == "+1" else -1
        if symbol == "Σ":
            reads = list(ALPHABET)
        elif symbol in (LEFT_MARK, RIGHT_MARK) or (len(symbol) == 1 and symbol in ALPHABET):
            reads = [symbol]
        else:
            raise SeqductError(f"line {lineno}: bad symbol {symbol!r}")
        for ch in reads:
            if output == "Σ":
                emitted = ch
            elif output == "λ":
                emitted = ""
            elif len(output) == 1 and output in ALPHABET:
                emitted = output
            else:
                raise SeqductError(f"line {lineno}: bad output {output!r}")
            key = (state, ch)
            if key in transitions:
                raise SeqductError(f"line {lineno}: duplicate transition for ({state}, {ch!r})")
            transitions[key] = (emitted, move, next_state)
    return TwoWayFST(initial=initial, final=final, transitions=transitions)


def load_fst(path) -> TwoWayFST:
    return parse_fst(Path(path).read_text(encoding="utf-8"))
