#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "gsne/errors.hpp"

namespace gsne {

// Little-endian binary writer/reader for versioned artifacts. Doubles are
// stored as raw IEEE-754 bits so round trips are exact.

class bin_writer {
public:
    explicit bin_writer(const std::string& path) : path_(path), out_(path, std::ios::binary) {
        if (!out_) throw input_error("cannot write file: " + path);
    }

    void magic(const char tag[8]) { out_.write(tag, 8); }
    void u32(std::uint32_t v) { raw(&v, sizeof v); }
    void u64(std::uint64_t v) { raw(&v, sizeof v); }
    void i64(std::int64_t v) { raw(&v, sizeof v); }
    void f64(double v) { raw(&v, sizeof v); }

    void str(const std::string& s) {
        u64(s.size());
        out_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

    void vec_i64(const std::vector<std::int64_t>& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(std::int64_t));
    }

    void vec_f64(const std::vector<double>& v) {
        u64(v.size());
        raw(v.data(), v.size() * sizeof(double));
    }

    void matrix(const Eigen::MatrixXd& m) {
        u64(static_cast<std::uint64_t>(m.rows()));
        u64(static_cast<std::uint64_t>(m.cols()));
        raw(m.data(), static_cast<size_t>(m.size()) * sizeof(double));
    }

    void close() {
        out_.flush();
        if (!out_) throw input_error("short write: " + path_);
        out_.close();
    }

private:
    void raw(const void* p, size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }

    std::string path_;
    std::ofstream out_;
};

class bin_reader {
public:
    explicit bin_reader(const std::string& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw load_error("cannot open file: " + path);
    }

    void expect_magic(const char tag[8]) {
        char buf[8] = {};
        raw(buf, 8);
        if (std::memcmp(buf, tag, 8) != 0) {
            throw load_error(path_ + ": bad magic header (wrong or corrupt file)");
        }
    }

    std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
    std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
    std::int64_t i64() { std::int64_t v; raw(&v, sizeof v); return v; }
    double f64() { double v; raw(&v, sizeof v); return v; }

    std::string str() {
        const std::uint64_t n = u64();
        check_len(n);
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }

    std::vector<std::int64_t> vec_i64() {
        const std::uint64_t n = u64();
        check_len(n * sizeof(std::int64_t));
        std::vector<std::int64_t> v(n);
        raw(v.data(), n * sizeof(std::int64_t));
        return v;
    }

    std::vector<double> vec_f64() {
        const std::uint64_t n = u64();
        check_len(n * sizeof(double));
        std::vector<double> v(n);
        raw(v.data(), n * sizeof(double));
        return v;
    }

    Eigen::MatrixXd matrix() {
        const std::uint64_t rows = u64();
        const std::uint64_t cols = u64();
        check_len(rows * cols * sizeof(double));
        Eigen::MatrixXd m(rows, cols);
        raw(m.data(), static_cast<size_t>(rows * cols) * sizeof(double));
        return m;
    }

    void expect_eof() {
        char c;
        in_.read(&c, 1);
        if (!in_.eof()) throw load_error(path_ + ": trailing bytes after payload");
    }

private:
    void raw(void* p, size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (static_cast<size_t>(in_.gcount()) != n) {
            throw load_error(path_ + ": truncated file");
        }
    }

    void check_len(std::uint64_t bytes) {
        // Guards against absurd lengths from corrupt headers.
        if (bytes > (1ULL << 40)) throw load_error(path_ + ": corrupt length field");
    }

    std::string path_;
    std::ifstream in_;
};

} // namespace gsne
