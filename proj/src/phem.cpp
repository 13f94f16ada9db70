#include "phonoscope/phem.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "phonoscope/error.hpp"

namespace phonoscope {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view bytes, std::size_t offset) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
    return v;
}

} // namespace

EmbeddingMatrix::EmbeddingMatrix(std::uint32_t n_rows, std::uint32_t dim, std::vector<float> data)
    : n_rows_(n_rows), dim_(dim), data_(std::move(data)) {
    if (data_.size() != static_cast<std::size_t>(n_rows) * dim)
        fail(ErrorKind::InvalidArgument, "embedding data size does not match n_rows x dim");
}

std::string encode_phem(const EmbeddingMatrix& m) {
    std::string out;
    out.reserve(kPhemHeaderSize + m.data().size() * 4);
    out.append("PHEM");
    put_u32(out, kPhemVersion);
    put_u32(out, m.n_rows());
    put_u32(out, m.dim());
    for (float f : m.data()) put_u32(out, std::bit_cast<std::uint32_t>(f));
    return out;
}

EmbeddingMatrix decode_phem(std::string_view bytes) {
    if (bytes.size() < kPhemHeaderSize || bytes.substr(0, 4) != "PHEM")
        fail(ErrorKind::MalformedFile, "not a PHEM file (bad magic)");
    const std::uint32_t version = get_u32(bytes, 4);
    if (version != kPhemVersion)
        fail(ErrorKind::MalformedFile, "unsupported PHEM version " + std::to_string(version));
    const std::uint32_t n_rows = get_u32(bytes, 8);
    const std::uint32_t dim = get_u32(bytes, 12);
    if (dim == 0) fail(ErrorKind::MalformedFile, "PHEM dim must be positive");
    const std::uint64_t expected =
        kPhemHeaderSize + static_cast<std::uint64_t>(n_rows) * dim * 4;
    if (bytes.size() != expected)
        fail(ErrorKind::MalformedFile, "PHEM payload is " + std::to_string(bytes.size()) +
                                           " bytes, header implies " + std::to_string(expected));
    std::vector<float> data(static_cast<std::size_t>(n_rows) * dim);
    for (std::size_t i = 0; i < data.size(); ++i)
        data[i] = std::bit_cast<float>(get_u32(bytes, kPhemHeaderSize + 4 * i));
    return EmbeddingMatrix(n_rows, dim, std::move(data));
}

EmbeddingMatrix read_phem(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::MissingFile, path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_phem(bytes);
}

void write_phem(const std::filesystem::path& path, const EmbeddingMatrix& m) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + path.string());
    const std::string bytes = encode_phem(m);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::IoError, "short write to " + path.string());
}

} // namespace phonoscope
