#pragma once

#include <stdexcept>
#include <string>

namespace manta {

/// Base class for all errors raised by the library.
struct error : std::runtime_error {
	using std::runtime_error::runtime_error;
};

/// Malformed annotation text. Positions are 1-based.
struct parse_error : error {
	parse_error(int line, int col, const std::string& what)
	    : error("parse error at " + std::to_string(line) + ":" + std::to_string(col) + ": " + what), line(line), col(col) {}
	int line;
	int col;
};

/// Invalid user input: bad scenario, bad launch arguments, bad configuration.
struct validation_error : error {
	using error::error;
};

/// Planner-detected problem: write conflicts, reads of never-filled chunks, unknown kernels.
struct plan_error : error {
	using error::error;
};

/// Failure while executing a plan: kernel out-of-bounds access, transport protocol violation,
/// or a task whose footprint can never be satisfied by the configured memory tiers.
struct execution_error : error {
	using error::error;
};

} // namespace manta
