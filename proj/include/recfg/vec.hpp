#pragma once

#include <string>
#include <vector>

#include "recfg/errors.hpp"

namespace recfg {

using Vec = std::vector<double>;

inline void require_same_dim(const Vec& a, const Vec& b, const char* what) {
    if (a.size() != b.size()) {
        fail_validation(std::string(what) + ": dimension mismatch (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
    }
}

inline void require_dim(const Vec& a, std::size_t d, const char* what) {
    if (a.size() != d) {
        fail_validation(std::string(what) + ": expected dimension " + std::to_string(d) +
                        ", got " + std::to_string(a.size()));
    }
}

}  // namespace recfg
