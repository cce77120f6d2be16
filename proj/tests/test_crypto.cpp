#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "uavsfc/crypto.hpp"

using namespace uavsfc;

namespace {

Bytes seed_from(std::uint8_t fill) { return Bytes(kSeedBytes, fill); }

Bytes random_message(std::mt19937_64& rng, std::size_t max_len = 200) {
    Bytes m(rng() % (max_len + 1));
    for (auto& b : m) b = static_cast<std::uint8_t>(rng() & 0xff);
    return m;
}

}  // namespace

TEST_CASE("keygen is deterministic in the seed and distinguishes kinds") {
    auto a1 = keygen(seed_from(7), KeyKind::Signing);
    auto a2 = keygen(seed_from(7), KeyKind::Signing);
    CHECK(a1.public_part == a2.public_part);
    CHECK(a1.secret_part == a2.secret_part);

    auto b = keygen(seed_from(8), KeyKind::Signing);
    CHECK(a1.public_part != b.public_part);

    auto c = keygen(seed_from(7), KeyKind::Sealing);
    CHECK(c.public_part != a1.public_part);
}

TEST_CASE("keygen rejects short and long seeds") {
    Bytes short_seed(31, 0x01);
    Bytes long_seed(33, 0x01);
    CHECK_THROWS_AS(keygen(short_seed, KeyKind::Signing), InvalidSeed);
    CHECK_THROWS_AS(keygen(long_seed, KeyKind::Sealing), InvalidSeed);
}

TEST_CASE("sign/verify round trip and bit-flip rejection") {
    auto kp = keygen(seed_from(1), KeyKind::Signing);
    std::mt19937_64 rng(42);
    for (int i = 0; i < 100; ++i) {
        Bytes m = random_message(rng);
        auto sig = sign(kp.secret_part, m, "node-a");
        CHECK(verify(kp.public_part, m, sig));
        CHECK(sig.signer_id == "node-a");

        if (!m.empty()) {
            Bytes tampered = m;
            std::size_t at = rng() % tampered.size();
            tampered[at] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
            CHECK_FALSE(verify(kp.public_part, tampered, sig));
        }
        Signature bad_sig = sig;
        std::size_t at = rng() % bad_sig.bytes.size();
        bad_sig.bytes[at] ^= 0x01;
        CHECK_FALSE(verify(kp.public_part, m, bad_sig));
    }
}

TEST_CASE("verify with the wrong key fails, malformed key throws") {
    auto kp = keygen(seed_from(2), KeyKind::Signing);
    auto other = keygen(seed_from(3), KeyKind::Signing);
    Bytes m = bytes_of("handover");
    auto sig = sign(kp.secret_part, m, "node-a");
    CHECK_FALSE(verify(other.public_part, m, sig));

    Bytes stub(5, 0x00);
    CHECK_THROWS_AS(verify(stub, m, sig), InvalidKey);
    CHECK_THROWS_AS(sign(stub, m, "x"), InvalidKey);
}

TEST_CASE("seal/open round trip including empty plaintext") {
    auto kp = keygen(seed_from(4), KeyKind::Sealing);
    std::mt19937_64 rng(43);
    for (int i = 0; i < 50; ++i) {
        Bytes m = random_message(rng);
        auto box = seal(kp.public_part, m);
        auto opened = open_sealed(kp.secret_part, box);
        REQUIRE(opened.has_value());
        CHECK(*opened == m);
    }
    Bytes empty;
    auto box = seal(kp.public_part, empty);
    auto opened = open_sealed(kp.secret_part, box);
    REQUIRE(opened.has_value());
    CHECK(opened->empty());
}

TEST_CASE("sealing is deterministic per (recipient, plaintext)") {
    auto kp = keygen(seed_from(5), KeyKind::Sealing);
    Bytes m = bytes_of("route segment");
    auto b1 = seal(kp.public_part, m);
    auto b2 = seal(kp.public_part, m);
    CHECK(b1.bytes == b2.bytes);

    auto other = keygen(seed_from(6), KeyKind::Sealing);
    auto b3 = seal(other.public_part, m);
    CHECK(b1.bytes != b3.bytes);
}

TEST_CASE("opening with the wrong key or tampered box fails closed") {
    auto kp = keygen(seed_from(9), KeyKind::Sealing);
    auto other = keygen(seed_from(10), KeyKind::Sealing);
    Bytes m = bytes_of("only for the first hop");
    auto box = seal(kp.public_part, m);

    CHECK_FALSE(open_sealed(other.secret_part, box).has_value());

    std::mt19937_64 rng(44);
    for (int i = 0; i < 50; ++i) {
        SealedBox bad = box;
        std::size_t at = rng() % bad.bytes.size();
        bad.bytes[at] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
        CHECK_FALSE(open_sealed(kp.secret_part, bad).has_value());
    }

    SealedBox truncated;
    truncated.bytes = Bytes(10, 0xaa);
    CHECK_FALSE(open_sealed(kp.secret_part, truncated).has_value());
}

TEST_CASE("digest matches SHA-256 and is collision-free over a scan") {
    CHECK(to_hex(digest(std::string_view(""))) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(to_hex(digest(std::string_view("abc"))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

    std::mt19937_64 rng(45);
    std::set<std::string> seen;
    for (int i = 0; i < 500; ++i) {
        Bytes m(32);
        for (auto& b : m) b = static_cast<std::uint8_t>(rng() & 0xff);
        seen.insert(to_hex(digest(m)));
    }
    CHECK(seen.size() == 500);

    Bytes m = bytes_of("feedback");
    auto d = digest(m);
    Bytes once(d.begin(), d.end());
    CHECK(digest(once) != d);
}
