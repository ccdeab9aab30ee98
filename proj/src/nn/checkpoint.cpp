#include "stego/nn/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <openssl/evp.h>

#include "stego/core/errors.hpp"

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

namespace stego::nn {

namespace {

constexpr char kMagic[8] = {'S', 'T', 'E', 'G', 'C', 'K', 'P', 'T'};
using Digest = std::array<std::uint8_t, 32>;

Digest sha256(std::span<const std::uint8_t> bytes) {
    Digest out{};
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
        fail(ErrorKind::Io, "sha256 failed");
    }
    return out;
}

class Writer {
public:
    template <typename T>
    void pod(T v) {
        auto p = reinterpret_cast<const std::uint8_t*>(&v);
        buf.insert(buf.end(), p, p + sizeof(T));
    }
    void raw(const void* data, std::size_t n) {
        auto p = static_cast<const std::uint8_t*>(data);
        buf.insert(buf.end(), p, p + n);
    }
    std::vector<std::uint8_t> buf;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes(b) {}
    template <typename T>
    T pod() {
        T v;
        std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
        return v;
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        if (n > bytes.size() - pos) fail(ErrorKind::Io, "checkpoint truncated");
        auto s = bytes.subspan(pos, n);
        pos += n;
        return s;
    }
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;
};

}  // namespace

bool Checkpoint::has(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return true;
    return false;
}

const CheckpointSection& Checkpoint::section(const std::string& name) const {
    for (const auto& s : sections)
        if (s.name == name) return s;
    fail(ErrorKind::Io, "checkpoint has no section '" + name + "'");
}

void Checkpoint::put(CheckpointSection s) {
    for (auto& existing : sections) {
        if (existing.name == s.name) {
            existing = std::move(s);
            return;
        }
    }
    sections.push_back(std::move(s));
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.raw(kMagic, sizeof(kMagic));
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(ckpt.sections.size()));
    for (const auto& s : ckpt.sections) {
        const std::size_t start = w.buf.size();
        const std::string meta = s.meta.dump();
        w.pod<std::uint32_t>(static_cast<std::uint32_t>(s.name.size()));
        w.raw(s.name.data(), s.name.size());
        w.pod<std::uint64_t>(meta.size());
        w.raw(meta.data(), meta.size());
        w.pod<std::uint64_t>(s.params.size());
        w.raw(s.params.data(), s.params.size() * sizeof(double));
        const Digest d = sha256(std::span(w.buf).subspan(start));
        w.raw(d.data(), d.size());
    }
    const Digest total = sha256(w.buf);
    w.raw(total.data(), total.size());
    return std::move(w.buf);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof(kMagic) + 8 + 32) fail(ErrorKind::Io, "checkpoint truncated");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) fail(ErrorKind::Io, "not a checkpoint file");
    const auto body = bytes.first(bytes.size() - 32);
    const Digest total = sha256(body);
    if (std::memcmp(total.data(), bytes.data() + body.size(), 32) != 0) {
        fail(ErrorKind::Io, "checkpoint content hash mismatch");
    }
    Reader r(body);
    r.take(sizeof(kMagic));
    const auto version = r.pod<std::uint32_t>();
    if (version != kCheckpointVersion) {
        fail(ErrorKind::Io, "unsupported checkpoint version " + std::to_string(version));
    }
    const auto count = r.pod<std::uint32_t>();
    Checkpoint ckpt;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::size_t start = r.pos;
        CheckpointSection s;
        const auto name_len = r.pod<std::uint32_t>();
        auto name = r.take(name_len);
        s.name.assign(name.begin(), name.end());
        const auto meta_len = r.pod<std::uint64_t>();
        auto meta = r.take(meta_len);
        const auto n_params = r.pod<std::uint64_t>();
        if (n_params > (body.size() - r.pos) / sizeof(double)) fail(ErrorKind::Io, "checkpoint truncated");
        auto blob = r.take(n_params * sizeof(double));
        const Digest d = sha256(body.subspan(start, r.pos - start));
        auto stored = r.take(32);
        if (std::memcmp(d.data(), stored.data(), 32) != 0) {
            fail(ErrorKind::Io, "checkpoint section '" + s.name + "' hash mismatch");
        }
        try {
            s.meta = nlohmann::json::parse(meta.begin(), meta.end());
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::Io, std::string("checkpoint metadata is not valid JSON: ") + e.what());
        }
        s.params.resize(n_params);
        std::memcpy(s.params.data(), blob.data(), blob.size());
        ckpt.sections.push_back(std::move(s));
    }
    if (r.pos != body.size()) fail(ErrorKind::Io, "trailing bytes in checkpoint");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = serialize_checkpoint(ckpt);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) fail(ErrorKind::Io, "cannot write checkpoint " + path.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) fail(ErrorKind::Io, "short write to " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::Io, "cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

std::string params_hash(std::span<const double> params) {
    const Digest d = sha256({reinterpret_cast<const std::uint8_t*>(params.data()), params.size() * sizeof(double)});
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    for (auto b : d) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xf]);
    }
    return out;
}

}  // namespace stego::nn
