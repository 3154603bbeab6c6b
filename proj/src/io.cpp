#include "recfg/io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "recfg/errors.hpp"

namespace recfg {

std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    std::string out;
    out.reserve((bytes.size() + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= bytes.size(); i += 3) {
        const std::uint32_t n = (std::uint32_t(bytes[i]) << 16) |
                                (std::uint32_t(bytes[i + 1]) << 8) |
                                std::uint32_t(bytes[i + 2]);
        out += kB64Alphabet[(n >> 18) & 63];
        out += kB64Alphabet[(n >> 12) & 63];
        out += kB64Alphabet[(n >> 6) & 63];
        out += kB64Alphabet[n & 63];
    }
    const std::size_t rem = bytes.size() - i;
    if (rem == 1) {
        const std::uint32_t n = std::uint32_t(bytes[i]) << 16;
        out += kB64Alphabet[(n >> 18) & 63];
        out += kB64Alphabet[(n >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        const std::uint32_t n = (std::uint32_t(bytes[i]) << 16) |
                                (std::uint32_t(bytes[i + 1]) << 8);
        out += kB64Alphabet[(n >> 18) & 63];
        out += kB64Alphabet[(n >> 12) & 63];
        out += kB64Alphabet[(n >> 6) & 63];
        out += '=';
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    require(text.size() % 4 == 0, ErrorKind::validation,
            "base64 payload length must be a multiple of 4, got " + std::to_string(text.size()));
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                // Padding is only legal in the last two positions of the stream.
                require(i + 4 == text.size() && j >= 2, ErrorKind::validation,
                        "base64 padding in illegal position " + std::to_string(i + j));
                vals[j] = 0;
                ++pad;
            } else {
                require(pad == 0, ErrorKind::validation,
                        "base64 data after padding at position " + std::to_string(i + j));
                vals[j] = b64_value(c);
                require(vals[j] >= 0, ErrorKind::validation,
                        std::string("invalid base64 character '") + c + "' at position " +
                            std::to_string(i + j));
            }
        }
        const std::uint32_t n = (std::uint32_t(vals[0]) << 18) | (std::uint32_t(vals[1]) << 12) |
                                (std::uint32_t(vals[2]) << 6) | std::uint32_t(vals[3]);
        out.push_back(std::uint8_t((n >> 16) & 0xFF));
        if (pad < 2) out.push_back(std::uint8_t((n >> 8) & 0xFF));
        if (pad < 1) out.push_back(std::uint8_t(n & 0xFF));
    }
    return out;
}

std::string encode_f64_tensor(const std::vector<Vec>& tensor) {
    std::vector<std::uint8_t> bytes;
    std::size_t cols = tensor.empty() ? 0 : tensor.front().size();
    bytes.reserve(tensor.size() * cols * 8);
    for (const Vec& row : tensor) {
        require(row.size() == cols, ErrorKind::validation, "ragged tensor rows cannot be encoded");
        for (double v : row) {
            const std::uint64_t u = std::bit_cast<std::uint64_t>(v);
            for (int b = 0; b < 8; ++b) bytes.push_back(std::uint8_t((u >> (8 * b)) & 0xFF));
        }
    }
    return base64_encode(bytes);
}

std::vector<Vec> decode_f64_tensor(const std::string& text, std::size_t rows, std::size_t cols) {
    const std::vector<std::uint8_t> bytes = base64_decode(text);
    require(bytes.size() == rows * cols * 8, ErrorKind::validation,
            "tensor payload holds " + std::to_string(bytes.size()) + " bytes, expected " +
                std::to_string(rows * cols * 8) + " for " + std::to_string(rows) + "x" +
                std::to_string(cols));
    std::vector<Vec> tensor(rows, Vec(cols));
    std::size_t p = 0;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            std::uint64_t u = 0;
            for (int b = 0; b < 8; ++b) u |= std::uint64_t(bytes[p++]) << (8 * b);
            tensor[r][c] = std::bit_cast<double>(u);
        }
    }
    return tensor;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::validation, "cannot open file for reading: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    require(!in.bad(), ErrorKind::validation, "read failure on file: " + path);
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::validation, "cannot open file for writing: " + path);
    out << content;
    out.flush();
    require(out.good(), ErrorKind::validation, "write failure on file: " + path);
}

}  // namespace recfg
