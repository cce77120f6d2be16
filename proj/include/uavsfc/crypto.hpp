#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include <sodium.h>

#include "uavsfc/bytes.hpp"

namespace uavsfc {

class CryptoError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class InvalidSeed : public CryptoError {
  public:
    InvalidSeed() : CryptoError("key seed must be exactly 32 bytes") {}
};

class InvalidKey : public CryptoError {
  public:
    explicit InvalidKey(const std::string& what) : CryptoError(what) {}
};

enum class KeyKind { Signing, Sealing };

struct KeyPair {
    Bytes public_part;
    Bytes secret_part;
    KeyKind kind{KeyKind::Signing};
};

struct Signature {
    Bytes bytes;
    std::string signer_id;
};

struct SealedBox {
    Bytes bytes;
};

namespace detail {
inline void sodium_ready() {
    static const int rc = sodium_init();
    if (rc < 0) throw CryptoError("libsodium initialization failed");
}
}  // namespace detail

inline constexpr std::size_t kSeedBytes = 32;

inline Digest32 digest(std::span<const std::uint8_t> data) {
    detail::sodium_ready();
    Digest32 out;
    crypto_hash_sha256(out.data(), data.data(), data.size());
    return out;
}

inline Digest32 digest(std::string_view data) {
    return digest(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
}

inline KeyPair keygen(std::span<const std::uint8_t> seed, KeyKind kind) {
    detail::sodium_ready();
    if (seed.size() != kSeedBytes) throw InvalidSeed();
    KeyPair kp;
    kp.kind = kind;
    if (kind == KeyKind::Signing) {
        kp.public_part.resize(crypto_sign_PUBLICKEYBYTES);
        kp.secret_part.resize(crypto_sign_SECRETKEYBYTES);
        crypto_sign_seed_keypair(kp.public_part.data(), kp.secret_part.data(), seed.data());
    } else {
        kp.public_part.resize(crypto_box_PUBLICKEYBYTES);
        kp.secret_part.resize(crypto_box_SECRETKEYBYTES);
        crypto_box_seed_keypair(kp.public_part.data(), kp.secret_part.data(), seed.data());
    }
    return kp;
}

inline Signature sign(const Bytes& signing_secret, std::span<const std::uint8_t> message,
                      std::string signer_id) {
    detail::sodium_ready();
    if (signing_secret.size() != crypto_sign_SECRETKEYBYTES)
        throw InvalidKey("signing key has wrong length");
    Signature sig;
    sig.bytes.resize(crypto_sign_BYTES);
    sig.signer_id = std::move(signer_id);
    crypto_sign_detached(sig.bytes.data(), nullptr, message.data(), message.size(),
                         signing_secret.data());
    return sig;
}

inline bool verify(const Bytes& verify_key, std::span<const std::uint8_t> message,
                   const Signature& sig) {
    detail::sodium_ready();
    if (verify_key.size() != crypto_sign_PUBLICKEYBYTES)
        throw InvalidKey("verify key has wrong length");
    if (sig.bytes.size() != crypto_sign_BYTES) return false;
    return crypto_sign_verify_detached(sig.bytes.data(), message.data(), message.size(),
                                       verify_key.data()) == 0;
}

// Sealed box in the standard libsodium layout (ephemeral pk || box), except the
// ephemeral keypair is derived from the recipient key and plaintext so that a
// whole run is reproducible from its seed. Opening uses the stock primitive.
inline SealedBox seal(const Bytes& seal_public, std::span<const std::uint8_t> plaintext) {
    detail::sodium_ready();
    if (seal_public.size() != crypto_box_PUBLICKEYBYTES)
        throw InvalidKey("sealing key has wrong length");

    Bytes material = bytes_of("uavsfc.seal.v1");
    append(material, seal_public);
    append(material, plaintext);
    Digest32 eph_seed = digest(material);

    std::uint8_t epk[crypto_box_PUBLICKEYBYTES];
    std::uint8_t esk[crypto_box_SECRETKEYBYTES];
    crypto_box_seed_keypair(epk, esk, eph_seed.data());

    std::uint8_t nonce[crypto_box_NONCEBYTES];
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, sizeof nonce);
    crypto_generichash_update(&st, epk, sizeof epk);
    crypto_generichash_update(&st, seal_public.data(), seal_public.size());
    crypto_generichash_final(&st, nonce, sizeof nonce);

    SealedBox box;
    box.bytes.resize(crypto_box_SEALBYTES + plaintext.size());
    std::copy(epk, epk + sizeof epk, box.bytes.begin());
    if (crypto_box_easy(box.bytes.data() + sizeof epk, plaintext.data(), plaintext.size(), nonce,
                        seal_public.data(), esk) != 0)
        throw CryptoError("seal failed");
    return box;
}

// Returns the plaintext, or nullopt on tamper / wrong recipient.
inline std::optional<Bytes> open_sealed(const Bytes& seal_secret, const SealedBox& box) {
    detail::sodium_ready();
    if (seal_secret.size() != crypto_box_SECRETKEYBYTES)
        throw InvalidKey("opening key has wrong length");
    if (box.bytes.size() < crypto_box_SEALBYTES) return std::nullopt;
    std::uint8_t pk[crypto_box_PUBLICKEYBYTES];
    crypto_scalarmult_base(pk, seal_secret.data());
    Bytes plain(box.bytes.size() - crypto_box_SEALBYTES);
    if (crypto_box_seal_open(plain.data(), box.bytes.data(), box.bytes.size(), pk,
                             seal_secret.data()) != 0)
        return std::nullopt;
    return plain;
}

}  // namespace uavsfc
