#pragma once

#include <string>

#include <doctest.h>

#include "recfg/errors.hpp"

// Asserts that running f throws a recfg::Error of the given kind whose
// message contains the needle.
template <typename F>
void check_error_contains(F&& f, recfg::ErrorKind kind, const std::string& needle) {
    try {
        f();
        FAIL_CHECK("expected an error mentioning '" << needle << "', none was thrown");
    } catch (const recfg::Error& e) {
        CHECK(e.kind() == kind);
        const std::string what = e.what();
        if (what.find(needle) == std::string::npos) {
            FAIL_CHECK("error message '" << what << "' lacks '" << needle << "'");
        }
    }
}
