#pragma once

#include <array>
#include <cassert>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <string>
#include <vector>

#include "errors.hpp"

namespace manta {

inline constexpr int max_rank = 3;

/// n-dimensional integer index with 1 to 3 axes. Used for thread indices, block indices,
/// block sizes and array coordinates alike.
struct point {
	int rank = 1;
	std::array<std::int64_t, max_rank> v{0, 0, 0};

	point() = default;
	point(std::initializer_list<std::int64_t> coords);
	static point zeros(int rank);
	static point splat(int rank, std::int64_t value);

	std::int64_t& operator[](int axis) { return v[static_cast<std::size_t>(axis)]; }
	std::int64_t operator[](int axis) const { return v[static_cast<std::size_t>(axis)]; }

	friend bool operator==(const point& a, const point& b) {
		if(a.rank != b.rank) return false;
		for(int k = 0; k < a.rank; ++k) {
			if(a[k] != b[k]) return false;
		}
		return true;
	}
};

std::string to_string(const point& p);

/// Half-open n-dimensional integer box [lo, hi). The universal geometry type for thread
/// grids, superblocks, chunks and access regions. `lo[k] == hi[k]` on any axis makes the
/// box empty; empty boxes compare equal regardless of their coordinates.
struct rect {
	point lo;
	point hi;

	rect() = default;
	rect(point lo, point hi);

	/// Canonical empty box of the given rank.
	static rect empty(int rank);
	/// [0, extents) box.
	static rect from_extents(const point& extents);

	int rank() const { return lo.rank; }
	bool is_empty() const;
	std::int64_t extent(int axis) const { return hi[axis] - lo[axis]; }
	point extents() const;
	/// Number of cells; throws on multiplication overflow.
	std::int64_t volume() const;
	bool contains_point(const point& p) const;

	friend bool operator==(const rect& a, const rect& b) {
		if(a.rank() != b.rank()) return false;
		if(a.is_empty() && b.is_empty()) return true;
		return a.lo == b.lo && a.hi == b.hi;
	}
};

std::string to_string(const rect& r);

/// Component-wise max of lo and min of hi; canonical empty box when disjoint.
rect intersect(const rect& a, const rect& b);

/// True iff every point of `inner` lies in `outer`. An empty inner box is contained in
/// anything (including another empty box).
bool contains(const rect& outer, const rect& inner);

/// Equals intersect(region, domain).
rect clip(const rect& region, const rect& domain);

/// Smallest box covering both inputs. Empty inputs are ignored.
rect bounding_box(const rect& a, const rect& b);

/// Invokes `fn(row_start, length)` for every contiguous innermost-axis run of the box,
/// in row-major order.
void for_each_row(const rect& r, const std::function<void(const point&, std::int64_t)>& fn);

/// Closed integer interval [lo, hi], or empty. Carrier for linear-expression evaluation.
struct interval {
	std::int64_t lo = 0;
	std::int64_t hi = -1; // lo > hi encodes empty

	interval() = default;
	interval(std::int64_t lo, std::int64_t hi) : lo(lo), hi(hi) {}
	static interval empty() { return {}; }

	bool is_empty() const { return lo > hi; }

	friend interval operator+(const interval& a, const interval& b) {
		if(a.is_empty() || b.is_empty()) return empty();
		return {a.lo + b.lo, a.hi + b.hi};
	}

	/// Multiplication by a constant; a negative coefficient swaps the endpoints.
	friend interval operator*(std::int64_t c, const interval& i) {
		if(i.is_empty()) return empty();
		if(c < 0) return {c * i.hi, c * i.lo};
		return {c * i.lo, c * i.hi};
	}

	friend bool operator==(const interval& a, const interval& b) {
		if(a.is_empty() && b.is_empty()) return true;
		return a.lo == b.lo && a.hi == b.hi;
	}
};

} // namespace manta
