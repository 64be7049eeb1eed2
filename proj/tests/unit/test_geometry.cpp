#include <doctest.h>

#include <random>

#include "manta/geometry.hpp"

using namespace manta;

namespace {

rect box1(std::int64_t lo, std::int64_t hi) { return rect({lo}, {hi}); }

rect random_rect(std::mt19937_64& rng, int rank, std::int64_t limit) {
	point lo = point::zeros(rank);
	point hi = point::zeros(rank);
	for(int k = 0; k < rank; ++k) {
		std::uniform_int_distribution<std::int64_t> d(0, limit);
		const auto a = d(rng);
		const auto b = d(rng);
		lo[k] = std::min(a, b);
		hi[k] = std::max(a, b);
	}
	return rect(lo, hi);
}

// membership-based reference for intersect
std::int64_t count_common_cells(const rect& a, const rect& b) {
	if(a.rank() != b.rank()) return 0;
	std::int64_t count = 0;
	if(a.is_empty() || b.is_empty()) return 0;
	point g = a.lo;
	for(;;) {
		if(b.contains_point(g)) ++count;
		int axis = a.rank() - 1;
		while(axis >= 0) {
			if(++g[axis] < a.hi[axis]) break;
			g[axis] = a.lo[axis];
			--axis;
		}
		if(axis < 0) break;
	}
	return count;
}

} // namespace

TEST_CASE("intersect of overlapping squares") {
	const rect a({0, 0}, {4, 4});
	const rect b({2, 2}, {6, 6});
	CHECK(intersect(a, b) == rect({2, 2}, {4, 4}));
}

TEST_CASE("touching boxes are disjoint under the half-open convention") {
	CHECK(intersect(box1(0, 4), box1(4, 8)).is_empty());
}

TEST_CASE("intersect matches cell membership on the 12x12 partition geometry") {
	// rows 3..6 of a 12x12 array against a chunk of rows 4..8
	const rect access({3, 0}, {6, 12});
	const rect chunk({4, 0}, {8, 12});
	const rect result = intersect(access, chunk);
	CHECK(result == rect({4, 0}, {6, 12}));
	CHECK(result.volume() == count_common_cells(access, chunk));
}

TEST_CASE("contains") {
	CHECK(contains(box1(0, 8), box1(2, 5)));
	CHECK(!contains(box1(0, 8), box1(2, 9)));
	CHECK(contains(rect::empty(1), rect::empty(1))); // vacuous containment
	CHECK(contains(box1(3, 3), box1(5, 5)));         // any empty inside any empty
}

TEST_CASE("axis-count mismatch is rejected") {
	CHECK_THROWS_AS(intersect(box1(0, 4), rect({0, 0}, {4, 4})), validation_error);
	CHECK_THROWS_AS(contains(box1(0, 4), rect({0, 0}, {4, 4})), validation_error);
}

TEST_CASE("clip") {
	CHECK(clip(box1(-1, 9), box1(0, 8)) == box1(0, 8));
	CHECK(clip(box1(63999, 128001), box1(0, 1000000)) == box1(63999, 128001));
	CHECK(clip(box1(999999, 1000002), box1(0, 1000000)) == box1(999999, 1000000));
}

TEST_CASE("clip equals element-wise membership") {
	std::mt19937_64 rng(7);
	for(int i = 0; i < 200; ++i) {
		const rect region = random_rect(rng, 1, 40);
		const rect domain = random_rect(rng, 1, 40);
		const rect clipped = clip(region, domain);
		std::int64_t member = 0;
		for(std::int64_t x = 0; x < 41; ++x) {
			if(region.contains_point({x}) && domain.contains_point({x})) ++member;
		}
		CHECK(clipped.volume() == member);
	}
}

TEST_CASE("intersect is commutative, associative and idempotent") {
	std::mt19937_64 rng(42);
	for(int i = 0; i < 500; ++i) {
		const int rank = static_cast<int>(std::uniform_int_distribution<int>(1, 3)(rng));
		const rect a = random_rect(rng, rank, 8);
		const rect b = random_rect(rng, rank, 8);
		const rect c = random_rect(rng, rank, 8);
		CHECK(intersect(a, b) == intersect(b, a));
		CHECK(intersect(intersect(a, b), c) == intersect(a, intersect(b, c)));
		CHECK(intersect(a, a) == a);
		CHECK(intersect(a, b).volume() == count_common_cells(a, b));
	}
}

TEST_CASE("mutual containment means equality") {
	std::mt19937_64 rng(43);
	for(int i = 0; i < 500; ++i) {
		const int rank = static_cast<int>(std::uniform_int_distribution<int>(1, 2)(rng));
		const rect a = random_rect(rng, rank, 6);
		const rect b = random_rect(rng, rank, 6);
		const bool mutual = contains(a, b) && contains(b, a);
		CHECK(mutual == (a == b));
	}
}

TEST_CASE("intersection volume is bounded by both inputs") {
	std::mt19937_64 rng(44);
	for(int i = 0; i < 500; ++i) {
		const rect a = random_rect(rng, 2, 10);
		const rect b = random_rect(rng, 2, 10);
		CHECK(intersect(a, b).volume() <= std::min(a.volume(), b.volume()));
	}
}

TEST_CASE("degenerate axes make a box empty") {
	const rect flat({0, 3}, {5, 3});
	CHECK(flat.is_empty());
	CHECK(flat.volume() == 0);
	CHECK(intersect(flat, rect({0, 0}, {5, 5})).is_empty());
}

TEST_CASE("volume overflow is detected") {
	const rect huge({0, 0, 0}, {std::int64_t{1} << 31, std::int64_t{1} << 31, std::int64_t{1} << 31});
	CHECK_THROWS_AS(huge.volume(), validation_error);
}

TEST_CASE("for_each_row iterates rows in order") {
	const rect r({1, 2}, {3, 5});
	std::vector<std::pair<point, std::int64_t>> rows;
	for_each_row(r, [&](const point& p, std::int64_t len) { rows.emplace_back(p, len); });
	REQUIRE(rows.size() == 2);
	CHECK(rows[0].first == point{1, 2});
	CHECK(rows[0].second == 3);
	CHECK(rows[1].first == point{2, 2});
}

TEST_CASE("interval arithmetic honors coefficient signs") {
	const interval i{2, 5};
	CHECK(3 * i == interval{6, 15});
	CHECK(-2 * i == interval{-10, -4});
	CHECK((i + interval{-1, 1}) == interval{1, 6});
	CHECK((interval::empty() + i).is_empty());
}
