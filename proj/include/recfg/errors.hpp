#pragma once

#include <stdexcept>
#include <string>

namespace recfg {

// Error taxonomy mirrored by the CLI exit codes: bad inputs/config (1),
// numeric breakdown (2), violated invariants (3).
enum class ErrorKind {
    validation,      // domain/ordering/dimension/config problems
    lookup,          // condition missing from a table with fallback disabled
    schema,          // table file version not understood
    incomplete,      // prediction cache does not cover the grid
    numeric,         // NaN/inf states, quadrature tolerance not reached
    invariant,       // verification failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, msg); }
[[noreturn]] inline void fail_validation(const std::string& msg) { fail(ErrorKind::validation, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { fail(ErrorKind::numeric, msg); }

inline void require(bool cond, ErrorKind kind, const std::string& msg) {
    if (!cond) fail(kind, msg);
}
inline void require_valid(bool cond, const std::string& msg) { require(cond, ErrorKind::validation, msg); }

}  // namespace recfg
