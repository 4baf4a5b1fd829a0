"""The eight published policies of the reference learning trial.

Each row lists the actions for states 0-6 and the number of moves the
policy was in force during the 502-move trial. States 7 and 8 were too
rare to learn and stay random in every row.
"""

from .behavior import RAND, Policy

_ROWS = [
    (6, ["RAND", "RAND", "RAND", "RAND", "RAND", "RAND", "RAND"]),
    (2, ["F", "RAND", "RAND", "RAND", "RAND", "RAND", "RAND"]),
    (3, ["F", "RAND", "RAND", "A", "RAND", "RAND", "RAND"]),
    (2, ["F", "RAND", "A", "A", "RAND", "RAND", "RAND"]),
    (1, ["F", "R", "A", "A", "RAND", "RAND", "RAND"]),
    (52, ["F", "R", "A", "A", "F", "RAND", "RAND"]),
    (26, ["F", "R", "L", "A", "F", "RAND", "RAND"]),
    (410, ["F", "R", "L", "A", "F", "RAND", "F"]),
]

PUBLISHED_MOVES_USED = tuple(t for t, _ in _ROWS)

PUBLISHED_POLICIES = tuple(
    Policy.from_tokens(tokens + [RAND, RAND], id=i) for i, (_, tokens) in enumerate(_ROWS, start=1)
)
