#include "lobnet/nn/checkpoint.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace lobnet::nn {

namespace {

constexpr char kMagic[8] = {'L', 'O', 'B', 'N', 'E', 'T', 'C', 'K'};

static_assert(std::endian::native == std::endian::little, "checkpoint code assumes a little-endian host");

class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        out.insert(out.end(), b, b + n);
    }
    void u8(std::uint8_t v) { out.push_back(v); }
    void u32(std::uint32_t v) { bytes(&v, sizeof v); }
    void u64(std::uint64_t v) { bytes(&v, sizeof v); }
    void text(std::string_view s) {
        u32(static_cast<std::uint32_t>(s.size()));
        bytes(s.data(), s.size());
    }
    std::vector<std::uint8_t> out;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : buf(b) {}
    void bytes(void* p, std::size_t n) {
        if (n > buf.size() - pos) throw Error(Errc::CorruptCheckpoint, "checkpoint truncated");
        std::memcpy(p, buf.data() + pos, n);
        pos += n;
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, sizeof v);
        return v;
    }
    std::uint64_t u64() {
        std::uint64_t v;
        bytes(&v, sizeof v);
        return v;
    }
    std::string text() {
        const std::uint32_t n = u32();
        std::string s(n, '\0');
        bytes(s.data(), n);
        return s;
    }
    std::span<const std::uint8_t> buf;
    std::size_t pos = 0;
};

}  // namespace

void Checkpoint::add(std::string name, Tensor value) {
    if (contains(name)) throw Error(Errc::PreconditionViolation, "duplicate checkpoint array " + name);
    arrays.push_back({std::move(name), std::move(value)});
}

bool Checkpoint::contains(std::string_view name) const noexcept {
    for (const auto& e : arrays) {
        if (e.name == name) return true;
    }
    return false;
}

const Tensor& Checkpoint::get(std::string_view name) const {
    for (const auto& e : arrays) {
        if (e.name == name) return e.value;
    }
    throw Error(Errc::CorruptCheckpoint, "checkpoint has no array " + std::string(name));
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
    Writer w;
    w.bytes(kMagic, sizeof kMagic);
    w.u32(Checkpoint::kVersion);
    w.text(ckpt.metadata);
    w.u32(static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& e : ckpt.arrays) {
        w.text(e.name);
        w.u8(Checkpoint::kDtypeF64);
        w.u32(static_cast<std::uint32_t>(e.value.shape().size()));
        for (auto d : e.value.shape()) w.u64(d);
    }
    for (const auto& e : ckpt.arrays) w.bytes(e.value.data().data(), e.value.size() * sizeof(double));
    const auto digest = sha256(w.out);
    w.bytes(digest.data(), digest.size());
    return std::move(w.out);
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof kMagic + 32) throw Error(Errc::CorruptCheckpoint, "checkpoint truncated");
    const auto body = bytes.first(bytes.size() - 32);
    const auto digest = sha256(body);
    if (std::memcmp(digest.data(), bytes.data() + body.size(), 32) != 0) {
        throw Error(Errc::CorruptCheckpoint, "checkpoint hash mismatch");
    }
    Reader r(body);
    char magic[8];
    r.bytes(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(Errc::CorruptCheckpoint, "bad checkpoint magic");
    if (r.u32() != Checkpoint::kVersion) throw Error(Errc::CorruptCheckpoint, "unsupported checkpoint version");
    Checkpoint ckpt;
    ckpt.metadata = r.text();
    const std::uint32_t count = r.u32();
    std::vector<std::pair<std::string, std::vector<std::size_t>>> headers;
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = r.text();
        if (r.u8() != Checkpoint::kDtypeF64) throw Error(Errc::CorruptCheckpoint, "unsupported dtype for " + name);
        const std::uint32_t ndim = r.u32();
        if (ndim > 8) throw Error(Errc::CorruptCheckpoint, "implausible rank for " + name);
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) d = r.u64();
        headers.emplace_back(std::move(name), std::move(shape));
    }
    for (auto& [name, shape] : headers) {
        const std::size_t n = Tensor::element_count(shape);
        if (n > (body.size() - r.pos) / sizeof(double)) throw Error(Errc::CorruptCheckpoint, "checkpoint truncated");
        std::vector<double> data(n);
        r.bytes(data.data(), n * sizeof(double));
        ckpt.arrays.push_back({name, Tensor(shape, std::move(data))});
    }
    if (r.pos != body.size()) throw Error(Errc::CorruptCheckpoint, "trailing bytes in checkpoint");
    return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto bytes = encode_checkpoint(ckpt);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(Errc::DiskFull, "cannot open " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error(Errc::DiskFull, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::CorruptCheckpoint, "cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::PreconditionViolation, "sha256 init failed");
    }
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::span<const std::uint8_t> bytes) {
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), bytes.data(), bytes.size());
}

void Sha256::update(std::string_view text) {
    update_u64(text.size());
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), text.data(), text.size());
}

void Sha256::update_u64(std::uint64_t v) { EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), &v, sizeof v); }

void Sha256::update_f64(std::span<const double> values) {
    update_u64(values.size());
    EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), values.data(), values.size() * sizeof(double));
}

Sha256Digest Sha256::finish() {
    Sha256Digest out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len);
    return out;
}

Sha256Digest sha256(std::span<const std::uint8_t> bytes) {
    Sha256 h;
    h.update(bytes);
    return h.finish();
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

}  // namespace lobnet::nn
