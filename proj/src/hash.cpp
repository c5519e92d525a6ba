#include "tabreason/hash.hpp"

#include "tabreason/rng.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace tabreason {

namespace {
std::array<unsigned char, 32> digest(std::string_view bytes) {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
        throw std::runtime_error("sha256: EVP_Digest failed");
    }
    return out;
}
} // namespace

std::string sha256_hex(std::string_view bytes) {
    static constexpr char hex[] = "0123456789abcdef";
    const auto d = digest(bytes);
    std::string out;
    out.reserve(64);
    for (unsigned char b : d) {
        out.push_back(hex[b >> 4]);
        out.push_back(hex[b & 0x0F]);
    }
    return out;
}

std::uint64_t sha256_u64(std::string_view bytes) {
    const auto d = digest(bytes);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(i)];
    return v;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    std::string material = "tabreason-seed\n" + std::to_string(base) + "\n";
    material.append(label);
    return sha256_u64(material);
}

} // namespace tabreason
