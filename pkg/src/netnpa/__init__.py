"""netnpa: moment-matrix hierarchies for quantum network compatibility.

The package tests whether a given multipartite probability distribution
admits a quantum model on a network (Bell, bilocal, triangle, four-party
star) by building and solving finite levels of several moment-matrix
hierarchies, and reconstructs explicit finite-dimensional operator models
when a rank loop occurs.
"""

from .words import (
    Alphabet,
    AlphabetMismatchError,
    EMPTY_WORD,
    Letter,
    Word,
    WordParseError,
    act_permutation,
    concat,
    enumerate_words,
    involute,
    parse_word,
    render_word,
    scalar_letter,
    word,
)

__all__ = [
    "Alphabet",
    "AlphabetMismatchError",
    "EMPTY_WORD",
    "Letter",
    "Word",
    "WordParseError",
    "act_permutation",
    "concat",
    "enumerate_words",
    "involute",
    "parse_word",
    "render_word",
    "scalar_letter",
    "word",
]

__version__ = "0.1.0"
