"""Security label vocabulary and taint-set algebra.

Taints are sets of label names drawn from a deployment-configured, ordered
vocabulary.  The ordering matters because signed tokens encode taints as a
fixed-order bit vector; bit i corresponds to ``vocabulary[i]``.
"""

from __future__ import annotations

from dataclasses import dataclass


DEFAULT_VOCABULARY: tuple[str, ...] = (
    "NDA",
    "PII",
    "SALARY",
    "CUSTOMER_DATA",
    "EXPORT_CONTROLLED",
    "LEGAL_PRIVILEGE",
    "CREDENTIAL",
    "EXTERNAL",
)


class UnknownLabel(ValueError):
    """A label is not part of the configured vocabulary."""


@dataclass(frozen=True)
class Vocabulary:
    """Ordered label vocabulary for one deployment."""

    labels: tuple[str, ...] = DEFAULT_VOCABULARY

    def __post_init__(self) -> None:
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("vocabulary contains duplicate labels")

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: str) -> bool:
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownLabel(label) from None

    def validate(self, labels) -> frozenset[str]:
        labels = frozenset(labels)
        unknown = labels - set(self.labels)
        if unknown:
            raise UnknownLabel(", ".join(sorted(unknown)))
        return labels

    def to_bits(self, labels) -> list[int]:
        """Encode a label set as the fixed-order bit vector."""
        present = self.validate(labels)
        return [1 if name in present else 0 for name in self.labels]

    def from_bits(self, bits) -> frozenset[str]:
        if len(bits) != len(self.labels):
            raise ValueError(
                f"bit vector length {len(bits)} != vocabulary size {len(self.labels)}"
            )
        return frozenset(name for name, bit in zip(self.labels, bits) if bit)


# A taint set is just a frozenset of label names; the helpers below keep the
# merge semantics (most-restrictive union) in one place.

TaintSet = frozenset


def merge_taints(a: frozenset[str], b: frozenset[str]) -> frozenset[str]:
    """Merge two taint sets: plain set union, so no constraint is ever lost."""
    return frozenset(a) | frozenset(b)


def merge_all(taint_sets) -> frozenset[str]:
    merged: frozenset[str] = frozenset()
    for taints in taint_sets:
        merged = merge_taints(merged, taints)
    return merged
