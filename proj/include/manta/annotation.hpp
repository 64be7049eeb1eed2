#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace manta {

/// Integer-linear combination of bound index variables plus a constant.
/// Duplicate variables are folded at parse time, so interval evaluation is exact.
struct linear_expr {
	std::int64_t constant = 0;
	std::vector<std::pair<std::string, std::int64_t>> terms; // (variable, coefficient), first-occurrence order

	void add_term(const std::string& var, std::int64_t coeff);
	interval evaluate(const std::map<std::string, interval>& env) const;

	friend bool operator==(const linear_expr&, const linear_expr&) = default;
};

std::string to_string(const linear_expr& e);

/// One index position of an access: a single expression or an inclusive slice.
/// Omitted slice bounds default to the array extent at evaluation time.
struct index_spec {
	enum class kind_t { single, slice };
	kind_t kind = kind_t::single;
	std::optional<linear_expr> single;
	std::optional<linear_expr> slice_lower;
	std::optional<linear_expr> slice_upper;

	static index_spec make_single(linear_expr e);
	static index_spec make_slice(std::optional<linear_expr> lower, std::optional<linear_expr> upper);

	friend bool operator==(const index_spec&, const index_spec&) = default;
};

enum class reduce_op { plus, times, min, max };

std::string to_string(reduce_op op);

struct access_mode {
	enum class kind_t { read, write, readwrite, reduce };
	kind_t kind = kind_t::read;
	reduce_op op = reduce_op::plus; // meaningful for kind == reduce only

	bool is_read() const { return kind == kind_t::read || kind == kind_t::readwrite; }
	bool is_write() const { return kind == kind_t::write || kind == kind_t::readwrite; }
	bool is_reduce() const { return kind == kind_t::reduce; }

	friend bool operator==(const access_mode&, const access_mode&) = default;
};

std::string to_string(const access_mode& m);

enum class binding_space { global, block, local };

/// Binds one index variable per grid axis to the global thread index, the thread-block
/// index, or the block-local thread index.
struct binding {
	binding_space space = binding_space::global;
	std::vector<std::string> variables; // variable k binds grid axis k

	friend bool operator==(const binding&, const binding&) = default;
};

struct access {
	std::string argument;
	access_mode mode;
	std::vector<index_spec> indices; // one per array axis

	friend bool operator==(const access&, const access&) = default;
};

/// Parsed data annotation: variable bindings plus per-argument access declarations.
struct access_annotation {
	std::vector<binding> bindings;
	std::vector<access> accesses;

	const access* find_access(const std::string& argument) const;

	friend bool operator==(const access_annotation&, const access_annotation&) = default;
};

/// Rectangular bounding box of the elements one superblock touches on one argument.
struct access_region {
	std::string argument;
	access_mode mode;
	rect region;
};

/// Parses the annotation DSL. Throws parse_error (1-based line/column) on syntax errors,
/// nonlinear expressions, unbound/duplicate variables, or duplicate arguments.
access_annotation parse_annotation(const std::string& text);

/// Renders an annotation back to DSL text; parse(to_string(parse(t))) == parse(t).
std::string to_string(const access_annotation& a);

/// Evaluates all accesses of an annotation for one superblock.
///
/// `superblock_threads` is the superblock's range in global-thread space, `block_size` the
/// thread-block extents. Each bound variable is assigned a closed interval (global: the
/// thread range; block: the covering block-index range; local: [0, block_size-1]) and each
/// linear expression is evaluated with interval arithmetic. Results are converted to
/// half-open boxes and clipped to the array domain. A slice whose computed lower bound
/// exceeds its upper bound yields an empty region.
std::vector<access_region> evaluate_region(const access_annotation& annotation, const rect& superblock_threads, const point& block_size,
    const std::map<std::string, rect>& array_domains);

/// One overlapping pair of plain-write regions from two superblocks of the same launch.
struct write_conflict {
	std::size_t superblock_a = 0;
	std::size_t superblock_b = 0;
	std::string argument;
	rect overlap;
};

std::string to_string(const write_conflict& c);

/// Checks that no two superblocks of a launch declare overlapping write or readwrite
/// regions on the same argument. Reduce regions are exempt.
std::optional<write_conflict> check_write_disjointness(const std::vector<std::vector<access_region>>& per_superblock);

} // namespace manta
