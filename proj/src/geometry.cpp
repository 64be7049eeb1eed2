#include "manta/geometry.hpp"

#include <sstream>

namespace manta {

namespace {
	void check_rank(int rank) {
		if(rank < 1 || rank > max_rank) throw validation_error("axis count must be between 1 and 3, got " + std::to_string(rank));
	}

	void check_same_rank(const rect& a, const rect& b) {
		if(a.rank() != b.rank()) {
			throw validation_error("axis-count mismatch: " + std::to_string(a.rank()) + " vs " + std::to_string(b.rank()));
		}
	}
} // namespace

point::point(std::initializer_list<std::int64_t> coords) {
	check_rank(static_cast<int>(coords.size()));
	rank = static_cast<int>(coords.size());
	int k = 0;
	for(auto c : coords) {
		v[static_cast<std::size_t>(k++)] = c;
	}
}

point point::zeros(int rank) {
	check_rank(rank);
	point p;
	p.rank = rank;
	return p;
}

point point::splat(int rank, std::int64_t value) {
	point p = zeros(rank);
	for(int k = 0; k < rank; ++k) {
		p[k] = value;
	}
	return p;
}

std::string to_string(const point& p) {
	std::ostringstream os;
	os << "(";
	for(int k = 0; k < p.rank; ++k) {
		os << (k ? "," : "") << p[k];
	}
	os << ")";
	return os.str();
}

rect::rect(point lo_, point hi_) : lo(lo_), hi(hi_) {
	if(lo.rank != hi.rank) throw validation_error("rect lo/hi axis counts differ");
	for(int k = 0; k < lo.rank; ++k) {
		if(lo[k] > hi[k]) throw validation_error("rect has lo > hi on axis " + std::to_string(k));
	}
}

rect rect::empty(int rank) { return rect(point::zeros(rank), point::zeros(rank)); }

rect rect::from_extents(const point& extents) { return rect(point::zeros(extents.rank), extents); }

bool rect::is_empty() const {
	for(int k = 0; k < rank(); ++k) {
		if(hi[k] <= lo[k]) return true;
	}
	return false;
}

point rect::extents() const {
	point e = point::zeros(rank());
	for(int k = 0; k < rank(); ++k) {
		e[k] = extent(k);
	}
	return e;
}

std::int64_t rect::volume() const {
	if(is_empty()) return 0;
	std::int64_t vol = 1;
	for(int k = 0; k < rank(); ++k) {
		if(__builtin_mul_overflow(vol, extent(k), &vol)) throw validation_error("rect volume overflows int64: " + to_string(*this));
	}
	return vol;
}

bool rect::contains_point(const point& p) const {
	assert(p.rank == rank());
	for(int k = 0; k < rank(); ++k) {
		if(p[k] < lo[k] || p[k] >= hi[k]) return false;
	}
	return true;
}

std::string to_string(const rect& r) {
	std::ostringstream os;
	for(int k = 0; k < r.rank(); ++k) {
		os << (k ? "x" : "") << "[" << r.lo[k] << "," << r.hi[k] << ")";
	}
	return os.str();
}

rect intersect(const rect& a, const rect& b) {
	check_same_rank(a, b);
	point lo = point::zeros(a.rank());
	point hi = point::zeros(a.rank());
	for(int k = 0; k < a.rank(); ++k) {
		lo[k] = std::max(a.lo[k], b.lo[k]);
		hi[k] = std::min(a.hi[k], b.hi[k]);
		if(hi[k] <= lo[k]) return rect::empty(a.rank());
	}
	return rect(lo, hi);
}

bool contains(const rect& outer, const rect& inner) {
	check_same_rank(outer, inner);
	if(inner.is_empty()) return true;
	for(int k = 0; k < outer.rank(); ++k) {
		if(inner.lo[k] < outer.lo[k] || inner.hi[k] > outer.hi[k]) return false;
	}
	return true;
}

rect clip(const rect& region, const rect& domain) { return intersect(region, domain); }

rect bounding_box(const rect& a, const rect& b) {
	check_same_rank(a, b);
	if(a.is_empty()) return b.is_empty() ? rect::empty(a.rank()) : b;
	if(b.is_empty()) return a;
	point lo = point::zeros(a.rank());
	point hi = point::zeros(a.rank());
	for(int k = 0; k < a.rank(); ++k) {
		lo[k] = std::min(a.lo[k], b.lo[k]);
		hi[k] = std::max(a.hi[k], b.hi[k]);
	}
	return rect(lo, hi);
}

void for_each_row(const rect& r, const std::function<void(const point&, std::int64_t)>& fn) {
	if(r.is_empty()) return;
	const int rk = r.rank();
	const std::int64_t run = r.extent(rk - 1);
	point cur = r.lo;
	for(;;) {
		fn(cur, run);
		// advance the outer axes odometer-style
		int axis = rk - 2;
		while(axis >= 0) {
			if(++cur[axis] < r.hi[axis]) break;
			cur[axis] = r.lo[axis];
			--axis;
		}
		if(axis < 0) return;
	}
}

} // namespace manta
