#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "recfg/vec.hpp"

namespace recfg {

// Compensated (Neumaier) accumulator: keeps parallel reductions over fixed
// chunks bit-reproducible and accurate at large n.
struct Accumulator {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    double value() const { return sum + comp; }
};

// Shortest exact decimal rendering used for every numeric output: 17
// significant digits round-trip IEEE doubles bit-exactly.
std::string format_g17(double v);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

// Row-major [rows x cols] tensor <-> base64 of little-endian 64-bit floats.
std::string encode_f64_tensor(const std::vector<Vec>& tensor);
std::vector<Vec> decode_f64_tensor(const std::string& text, std::size_t rows, std::size_t cols);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace recfg
