import pytest

from sentinelmesh.privacy import (
    InputError,
    PaillierPublicKey,
    decrypt_aggregate,
    generate_keypair,
    he_aggregate_count,
    zk_predicate_prove,
    zk_predicate_verify,
)


@pytest.fixture(scope="module")
def keypair():
    return generate_keypair(bits=512)


def test_keypair_size_floor():
    with pytest.raises(InputError):
        generate_keypair(bits=64)


def test_encrypt_decrypt_round_trip(keypair):
    public, private = keypair
    for m in (0, 1, 42, public.n - 1):
        assert private.decrypt(public.encrypt(m)) == m


def test_encryption_is_randomized(keypair):
    public, _ = keypair
    assert public.encrypt(7) != public.encrypt(7)


def test_homomorphic_add_and_scale(keypair):
    public, private = keypair
    c = public.add(public.encrypt(11), public.encrypt(31))
    assert private.decrypt(c) == 42
    assert private.decrypt(public.scale(public.encrypt(6), 7)) == 42


def test_input_validation(keypair):
    public, private = keypair
    with pytest.raises(InputError):
        public.encrypt(-1)
    with pytest.raises(InputError):
        public.encrypt(public.n)
    with pytest.raises(InputError):
        public.encrypt("7")
    with pytest.raises(InputError):
        public.encrypt(7, r=public.n)  # randomness must be a unit mod n
    with pytest.raises(InputError):
        public.add(0, public.encrypt(1))
    with pytest.raises(InputError):
        public.scale(public.encrypt(1), -2)
    with pytest.raises(InputError):
        private.decrypt(public.n_sq)


def test_aggregate_count_transcript(keypair):
    public, private = keypair
    flags = [public.encrypt(b) for b in (1, 0, 1, 1, 0)]
    transcript = he_aggregate_count(public, flags, manifest={"queries": ["q1", "q2"]})
    assert set(transcript) == {"manifest_hash", "ciphertexts", "response"}
    assert len(transcript["manifest_hash"]) == 64
    assert len(transcript["ciphertexts"]) == 5
    assert decrypt_aggregate(private, transcript) == 3
    # manifest hash binds the query set
    other = he_aggregate_count(public, flags, manifest={"queries": ["q1"]})
    assert other["manifest_hash"] != transcript["manifest_hash"]
    with pytest.raises(InputError):
        he_aggregate_count(public, [])


def test_zk_interface_is_declared_only():
    with pytest.raises(NotImplementedError):
        zk_predicate_prove({"pred": "x"}, {"graph": "y"})
    with pytest.raises(NotImplementedError):
        zk_predicate_verify({"pred": "x"}, b"proof")


def test_public_key_arithmetic_shortcut():
    # g = n + 1 means g^m = 1 + m*n (mod n^2); spot-check against pow()
    public = PaillierPublicKey(n=187)  # 11 * 17, tiny but valid structure
    for m in (0, 1, 5):
        assert (1 + m * public.n) % public.n_sq == pow(public.g, m, public.n_sq)
