import pytest

from sentinelmesh.vocab import UnknownLabel, Vocabulary, merge_all, merge_taints

VOCAB = Vocabulary()


def test_default_vocabulary_order():
    assert VOCAB.labels == (
        "NDA", "PII", "SALARY", "CUSTOMER_DATA", "EXPORT_CONTROLLED",
        "LEGAL_PRIVILEGE", "CREDENTIAL", "EXTERNAL",
    )
    assert len(VOCAB) == 8


def test_bit_round_trip():
    labels = frozenset({"PII", "CREDENTIAL"})
    bits = VOCAB.to_bits(labels)
    assert bits == [0, 1, 0, 0, 0, 0, 1, 0]
    assert VOCAB.from_bits(bits) == labels


def test_to_bits_is_order_stable():
    assert VOCAB.to_bits({"NDA"}) == [1, 0, 0, 0, 0, 0, 0, 0]
    assert VOCAB.to_bits({"EXTERNAL"}) == [0, 0, 0, 0, 0, 0, 0, 1]
    assert VOCAB.to_bits(()) == [0] * 8


def test_unknown_label_rejected():
    with pytest.raises(UnknownLabel):
        VOCAB.to_bits({"TOTALLY_NEW"})
    with pytest.raises(UnknownLabel):
        VOCAB.index("nope")


def test_from_bits_length_checked():
    with pytest.raises(ValueError):
        VOCAB.from_bits([1, 0])


def test_duplicate_vocabulary_rejected():
    with pytest.raises(ValueError):
        Vocabulary(labels=("A", "A"))


def test_merge_is_union():
    a = frozenset({"PII"})
    b = frozenset({"SALARY", "PII"})
    assert merge_taints(a, b) == {"PII", "SALARY"}
    assert merge_all([a, b, frozenset({"NDA"})]) == {"PII", "SALARY", "NDA"}
    # merging never removes taint
    assert merge_taints(a, frozenset()) == a
