"""Canonical singing-technique label set.

The order is fixed; every roll, activation matrix and metrics report
indexes classes in this order.
"""

TECHNIQUE_LABELS = (
    "bend",
    "breathy",
    "drop",
    "falsetto",
    "hiccup",
    "rasp",
    "scooping",
    "vibrato",
    "vocal_fry",
)

N_CLASSES = len(TECHNIQUE_LABELS)

LABEL_TO_INDEX = {name: i for i, name in enumerate(TECHNIQUE_LABELS)}


def label_index(name: str) -> int:
    """Index of a technique label, raising ``ValueError`` for unknown names."""
    try:
        return LABEL_TO_INDEX[name]
    except KeyError:
        raise ValueError(f"unknown technique label: {name!r}") from None
