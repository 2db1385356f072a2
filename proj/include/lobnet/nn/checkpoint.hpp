#pragma once

#include "lobnet/nn/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lobnet::nn {

/// Self-describing container of named f64 arrays.
///
/// Layout (all integers little-endian):
///   "LOBNETCK" | u32 version | u32 meta_len | meta (UTF-8 text)
///   u32 count | count x { u32 name_len | name | u8 dtype | u32 ndim | ndim x u64 dim }
///   payload: every array's f64 values in header order
///   32-byte SHA-256 of everything above
struct Checkpoint {
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::uint8_t kDtypeF64 = 1;

    struct Entry {
        std::string name;
        Tensor value;
        friend bool operator==(const Entry&, const Entry&) = default;
    };

    std::string metadata;
    std::vector<Entry> arrays;

    void add(std::string name, Tensor value);
    const Tensor& get(std::string_view name) const;
    bool contains(std::string_view name) const noexcept;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws CorruptCheckpoint on truncation, bad magic/version or hash mismatch.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Writes via a temporary file and rename.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

using Sha256Digest = std::array<std::uint8_t, 32>;

class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    void update(std::span<const std::uint8_t> bytes);
    void update(std::string_view text);
    void update_u64(std::uint64_t v);
    void update_f64(std::span<const double> values);
    Sha256Digest finish();

private:
    void* ctx_;
};

Sha256Digest sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace lobnet::nn
