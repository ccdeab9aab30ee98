#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stego/core/rng.hpp"

namespace stego {

// Fixed-length binary payload. Every element is exactly 0 or 1.
class Message {
public:
    Message() = default;
    explicit Message(std::vector<std::uint8_t> bits);

    std::size_t size() const noexcept { return bits_.size(); }
    std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
    std::span<const std::uint8_t> bits() const noexcept { return bits_; }

    friend bool operator==(const Message&, const Message&) = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// d i.i.d. uniform bits drawn from `rng`.
Message generate_message(int d, Rng& rng);

/// MSB-first, lowercase hex, right-padded with zero bits to a whole byte.
std::string message_to_hex(const Message& m);

/// Inverse of message_to_hex. Trailing hex beyond the first d bits is ignored.
Message hex_to_message(std::string_view text, int d);

/// Number of hex characters message_to_hex produces for d bits.
inline std::size_t hex_length(int d) { return 2 * ((static_cast<std::size_t>(d) + 7) / 8); }

}  // namespace stego
