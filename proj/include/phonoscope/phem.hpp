#pragma once

// PHEM: pooled phone-embedding matrix.
//
//   bytes 0-3   "PHEM"
//   bytes 4-7   u32 LE version (1)
//   bytes 8-11  u32 LE n_rows
//   bytes 12-15 u32 LE dim
//   then n_rows*dim binary32 LE, row-major. No padding, no footer.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace phonoscope {

inline constexpr std::uint32_t kPhemVersion = 1;
inline constexpr std::size_t kPhemHeaderSize = 16;

class EmbeddingMatrix {
public:
    EmbeddingMatrix() = default;
    EmbeddingMatrix(std::uint32_t n_rows, std::uint32_t dim)
        : n_rows_(n_rows), dim_(dim), data_(static_cast<std::size_t>(n_rows) * dim, 0.0f) {}
    EmbeddingMatrix(std::uint32_t n_rows, std::uint32_t dim, std::vector<float> data);

    std::uint32_t n_rows() const noexcept { return n_rows_; }
    std::uint32_t dim() const noexcept { return dim_; }

    std::span<const float> row(std::size_t i) const noexcept {
        return {data_.data() + i * dim_, dim_};
    }
    std::span<float> row(std::size_t i) noexcept { return {data_.data() + i * dim_, dim_}; }

    const std::vector<float>& data() const noexcept { return data_; }

    bool operator==(const EmbeddingMatrix&) const = default;

private:
    std::uint32_t n_rows_ = 0;
    std::uint32_t dim_ = 0;
    std::vector<float> data_;
};

std::string encode_phem(const EmbeddingMatrix& m);
EmbeddingMatrix decode_phem(std::string_view bytes);

EmbeddingMatrix read_phem(const std::filesystem::path& path);
void write_phem(const std::filesystem::path& path, const EmbeddingMatrix& m);

} // namespace phonoscope
