#include "siaa/serial.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "siaa/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace siaa {

void BinaryWriter::raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    buf_.insert(buf_.end(), b, b + n);
}

void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::i32(std::int32_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64(double v) { raw(&v, sizeof v); }

void BinaryWriter::str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
}

void BinaryWriter::vec(const std::vector<double>& v) {
    u64(v.size());
    raw(v.data(), v.size() * sizeof(double));
}

void BinaryWriter::matrix(const Eigen::MatrixXd& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
}

void BinaryWriter::vector(const Eigen::VectorXd& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
}

void BinaryWriter::finish(const std::filesystem::path& path) {
    const std::uint64_t checksum = fnv1a64(buf_.data(), buf_.size());
    u64(checksum);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingArtifactError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(buf_.data()),
              static_cast<std::streamsize>(buf_.size()));
    if (!out) throw MissingArtifactError("write failed: " + path.string());
}

BinaryReader::BinaryReader(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open: " + path.string());
    buf_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    if (buf_.size() < sizeof(std::uint64_t))
        throw MissingArtifactError("truncated file: " + path.string());
    std::uint64_t stored;
    std::memcpy(&stored, buf_.data() + buf_.size() - sizeof stored, sizeof stored);
    buf_.resize(buf_.size() - sizeof stored);
    if (stored != fnv1a64(buf_.data(), buf_.size()))
        throw MissingArtifactError("checksum mismatch: " + path.string());
}

void BinaryReader::raw(void* p, std::size_t n) {
    if (pos_ + n > buf_.size()) throw MissingArtifactError("unexpected end of file");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
}

std::uint32_t BinaryReader::u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
std::uint64_t BinaryReader::u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
std::int32_t BinaryReader::i32() { std::int32_t v; raw(&v, sizeof v); return v; }
double BinaryReader::f64() { double v; raw(&v, sizeof v); return v; }

std::string BinaryReader::str() {
    const std::uint32_t n = u32();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}

std::vector<double> BinaryReader::vec() {
    const std::uint64_t n = u64();
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
}

Eigen::MatrixXd BinaryReader::matrix() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    Eigen::MatrixXd m(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
        for (std::uint32_t c = 0; c < cols; ++c) m(r, c) = f64();
    return m;
}

Eigen::VectorXd BinaryReader::vector() {
    const std::uint32_t n = u32();
    Eigen::VectorXd v(n);
    for (std::uint32_t i = 0; i < n; ++i) v(i) = f64();
    return v;
}

std::uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char chunk[4096];
    while (in.read(chunk, sizeof chunk) || in.gcount() > 0)
        h = fnv1a64(chunk, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) s[i] = digits[h & 0xf];
    return s;
}

std::uint64_t hash_matrix(const Eigen::MatrixXd& m, std::uint64_t h) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const double v = m(r, c);
            h = fnv1a64(&v, sizeof v, h);
        }
    return h;
}

std::uint64_t hash_vector(const Eigen::VectorXd& v, std::uint64_t h) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double x = v(i);
        h = fnv1a64(&x, sizeof x, h);
    }
    return h;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw MissingArtifactError("cannot open for writing: " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("cannot open: " + path.string());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace siaa
