#include "stego/core/message.hpp"

#include "stego/core/errors.hpp"

namespace stego {

Message::Message(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    if (bits_.empty()) fail(ErrorKind::InvalidArgument, "message must have at least one bit");
    for (auto b : bits_) {
        if (b > 1) fail(ErrorKind::InvalidArgument, "message element is not binary");
    }
}

Message generate_message(int d, Rng& rng) {
    if (d <= 0) fail(ErrorKind::InvalidArgument, "message length must be >= 1");
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(d));
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng() >> 63);
    return Message(std::move(bits));
}

std::string message_to_hex(const Message& m) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::vector<std::uint8_t> bytes((m.size() + 7) / 8, 0);
    for (std::size_t i = 0; i < m.size(); ++i) {
        if (m[i]) bytes[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
    }
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto byte : bytes) {
        out.push_back(kDigits[byte >> 4]);
        out.push_back(kDigits[byte & 0xf]);
    }
    return out;
}

namespace {
int nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}
}  // namespace

Message hex_to_message(std::string_view text, int d) {
    if (d <= 0) fail(ErrorKind::InvalidArgument, "message length must be >= 1");
    if (text.size() % 2 != 0) fail(ErrorKind::Parse, "hex string must have an even number of digits");
    if (text.size() * 4 < static_cast<std::size_t>(d)) {
        fail(ErrorKind::Parse, "hex string encodes " + std::to_string(text.size() * 4) + " bits, need " +
                                   std::to_string(d));
    }
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (nibble(text[i]) < 0) fail(ErrorKind::Parse, std::string("invalid hex digit '") + text[i] + "'");
    }
    for (std::size_t i = 0; i < bits.size(); ++i) {
        int v = nibble(text[i / 4]);
        bits[i] = static_cast<std::uint8_t>((v >> (3 - i % 4)) & 1);
    }
    return Message(std::move(bits));
}

}  // namespace stego
