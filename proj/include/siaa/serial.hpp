#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "siaa/rng.hpp"

namespace siaa {

// Little-endian binary container with a trailing FNV-1a checksum.
// All checkpoint formats are built on this so that identical inputs produce
// byte-identical files.
class BinaryWriter {
public:
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v);
    void f64(double v);
    void str(const std::string& s);                  // u32 length + bytes
    void vec(const std::vector<double>& v);          // u64 length + doubles
    void matrix(const Eigen::MatrixXd& m);           // rows, cols, row-major doubles
    void vector(const Eigen::VectorXd& v);

    // appends checksum of everything written so far and flushes to disk
    void finish(const std::filesystem::path& path);

    const std::vector<unsigned char>& bytes() const { return buf_; }

private:
    void raw(const void* p, std::size_t n);
    std::vector<unsigned char> buf_;
};

class BinaryReader {
public:
    // loads the file, verifies the trailing checksum, throws MissingArtifactError on failure
    explicit BinaryReader(const std::filesystem::path& path);

    std::uint32_t u32();
    std::uint64_t u64();
    std::int32_t i32();
    double f64();
    std::string str();
    std::vector<double> vec();
    Eigen::MatrixXd matrix();
    Eigen::VectorXd vector();

private:
    void raw(void* p, std::size_t n);
    std::vector<unsigned char> buf_;
    std::size_t pos_ = 0;
};

std::uint64_t hash_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

std::uint64_t hash_matrix(const Eigen::MatrixXd& m, std::uint64_t h = 0xcbf29ce484222325ull);
std::uint64_t hash_vector(const Eigen::VectorXd& v, std::uint64_t h = 0xcbf29ce484222325ull);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace siaa
