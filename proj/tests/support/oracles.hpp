#pragma once

// Test-only reference implementations, kept independent of the production code paths they
// check: region evaluation by per-thread enumeration, and a random generator for
// (annotation, superblock, domains) triples.

#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "manta/annotation.hpp"
#include "manta/geometry.hpp"

namespace manta_test {

using namespace manta;

/// Enumerates every thread of the superblock, evaluates each access's per-thread index box
/// directly (no interval arithmetic), unions the boxes, and clips the bounding box to the
/// array domain. The reference for evaluate_region.
inline std::vector<rect> brute_force_regions(const access_annotation& annotation, const rect& superblock_threads, const point& block_size,
    const std::map<std::string, rect>& array_domains) {
	const int rank = superblock_threads.rank();

	struct bbox {
		bool any = false;
		point lo, hi; // inclusive
	};
	std::vector<bbox> boxes(annotation.accesses.size());

	// iterate all threads
	point g = superblock_threads.lo;
	for(;;) {
		std::map<std::string, std::int64_t> env;
		for(const auto& b : annotation.bindings) {
			for(std::size_t v = 0; v < b.variables.size(); ++v) {
				const int axis = static_cast<int>(v);
				std::int64_t value = 0;
				switch(b.space) {
				case binding_space::global: value = g[axis]; break;
				case binding_space::block: value = g[axis] / block_size[axis]; break;
				case binding_space::local: value = g[axis] % block_size[axis]; break;
				}
				env[b.variables[v]] = value;
			}
		}
		const auto eval = [&](const linear_expr& e) {
			std::int64_t v = e.constant;
			for(const auto& [var, coeff] : e.terms) {
				v += coeff * env.at(var);
			}
			return v;
		};

		for(std::size_t a = 0; a < annotation.accesses.size(); ++a) {
			const auto& acc = annotation.accesses[a];
			const rect& domain = array_domains.at(acc.argument);
			point lo = point::zeros(domain.rank());
			point hi = point::zeros(domain.rank());
			bool empty = false;
			for(int axis = 0; axis < domain.rank(); ++axis) {
				const auto& ix = acc.indices[static_cast<std::size_t>(axis)];
				std::int64_t l = 0, u = 0;
				if(ix.kind == index_spec::kind_t::single) {
					l = u = eval(*ix.single);
				} else {
					l = ix.slice_lower ? eval(*ix.slice_lower) : domain.lo[axis];
					u = ix.slice_upper ? eval(*ix.slice_upper) : domain.hi[axis] - 1;
				}
				if(l > u) {
					empty = true;
					break;
				}
				lo[axis] = l;
				hi[axis] = u;
			}
			if(empty) continue;
			auto& box = boxes[a];
			if(!box.any) {
				box.any = true;
				box.lo = lo;
				box.hi = hi;
			} else {
				for(int axis = 0; axis < domain.rank(); ++axis) {
					box.lo[axis] = std::min(box.lo[axis], lo[axis]);
					box.hi[axis] = std::max(box.hi[axis], hi[axis]);
				}
			}
		}

		int axis = rank - 1;
		while(axis >= 0) {
			if(++g[axis] < superblock_threads.hi[axis]) break;
			g[axis] = superblock_threads.lo[axis];
			--axis;
		}
		if(axis < 0) break;
	}

	std::vector<rect> result;
	for(std::size_t a = 0; a < annotation.accesses.size(); ++a) {
		const rect& domain = array_domains.at(annotation.accesses[a].argument);
		if(!boxes[a].any) {
			result.push_back(rect::empty(domain.rank()));
			continue;
		}
		point hi_open = boxes[a].hi;
		for(int axis = 0; axis < domain.rank(); ++axis) {
			hi_open[axis] += 1;
		}
		result.push_back(clip(rect(boxes[a].lo, hi_open), domain));
	}
	return result;
}

/// One random (annotation, superblock, block size, domains) triple with grids of at most
/// ~10^4 threads. Two-sided slices are centered on a common expression so no per-thread
/// slice is inverted (interval evaluation and enumeration agree on those by construction;
/// one-sided and single forms may still produce empty per-thread boxes).
struct region_case {
	std::string annotation_text;
	access_annotation annotation;
	rect superblock_threads;
	point block_size;
	std::map<std::string, rect> domains;
};

inline region_case make_random_region_case(std::mt19937_64& rng) {
	const auto pick = [&](int lo, int hi) { return static_cast<int>(std::uniform_int_distribution<int>(lo, hi)(rng)); };

	const int rank = pick(1, 3);
	const char* vars[] = {"i", "j", "k"};
	const char* block_vars[] = {"bi", "bj", "bk"};
	const char* local_vars[] = {"li", "lj", "lk"};

	point block_size = point::zeros(rank);
	point grid_extents = point::zeros(rank);
	for(int k = 0; k < rank; ++k) {
		block_size[k] = pick(1, 4);
		const std::int64_t max_extent = rank == 1 ? 512 : rank == 2 ? 40 : 12;
		grid_extents[k] = pick(2, static_cast<int>(max_extent));
	}

	// random aligned superblock inside the block grid; lanes come in whole blocks
	point sb_lo = point::zeros(rank);
	point sb_hi = point::zeros(rank);
	for(int k = 0; k < rank; ++k) {
		const std::int64_t blocks = (grid_extents[k] + block_size[k] - 1) / block_size[k];
		const std::int64_t b0 = pick(0, static_cast<int>(blocks - 1));
		const std::int64_t b1 = pick(static_cast<int>(b0 + 1), static_cast<int>(blocks));
		sb_lo[k] = b0 * block_size[k];
		sb_hi[k] = b1 * block_size[k];
	}
	const rect superblock(sb_lo, sb_hi);

	const bool use_block = pick(0, 2) == 0;
	const bool use_local = pick(0, 2) == 0;
	std::vector<std::string> available;
	std::ostringstream bindings;
	bindings << "global ";
	if(rank == 1) {
		bindings << vars[0];
	} else {
		bindings << "[" << vars[0];
		for(int k = 1; k < rank; ++k) {
			bindings << ", " << vars[k];
		}
		bindings << "]";
	}
	for(int k = 0; k < rank; ++k) {
		available.push_back(vars[k]);
	}
	if(use_block) {
		bindings << ", block ";
		if(rank == 1) {
			bindings << block_vars[0];
		} else {
			bindings << "[" << block_vars[0];
			for(int k = 1; k < rank; ++k) {
				bindings << ", " << block_vars[k];
			}
			bindings << "]";
		}
		for(int k = 0; k < rank; ++k) {
			available.push_back(block_vars[k]);
		}
	}
	if(use_local) {
		bindings << ", local ";
		if(rank == 1) {
			bindings << local_vars[0];
		} else {
			bindings << "[" << local_vars[0];
			for(int k = 1; k < rank; ++k) {
				bindings << ", " << local_vars[k];
			}
			bindings << "]";
		}
		for(int k = 0; k < rank; ++k) {
			available.push_back(local_vars[k]);
		}
	}

	std::vector<std::vector<std::string>> spaces;
	spaces.emplace_back(available.begin(), available.begin() + rank);
	if(use_block) spaces.emplace_back(available.begin() + rank, available.begin() + 2 * rank);
	if(use_local) spaces.emplace_back(available.end() - rank, available.end());

	// variable ranges, for validating generated slice bounds
	std::map<std::string, interval> env;
	for(int k = 0; k < rank; ++k) {
		env[vars[k]] = {sb_lo[k], sb_hi[k] - 1};
		env[block_vars[k]] = {sb_lo[k] / block_size[k], (sb_hi[k] - 1) / block_size[k]};
		env[local_vars[k]] = {0, block_size[k] - 1};
	}

	struct expr {
		std::vector<std::pair<std::string, int>> terms;
		int constant = 0;

		std::string text() const {
			std::ostringstream os;
			bool first = true;
			for(const auto& [var, coeff] : terms) {
				if(coeff >= 0 && !first) os << "+";
				os << coeff << "*" << var;
				first = false;
			}
			if(constant >= 0 && !first) os << "+";
			os << constant;
			return os.str();
		}
	};

	// one binding space per expression: an expression coupling one axis through two spaces
	// (say i and bi) has correlated variables, where interval bounds are sound but not tight
	const auto random_expr = [&]() {
		const auto& pool = spaces[static_cast<std::size_t>(pick(0, static_cast<int>(spaces.size()) - 1))];
		expr e;
		const int terms = pick(1, 2);
		for(int t = 0; t < terms; ++t) {
			e.terms.emplace_back(pool[static_cast<std::size_t>(pick(0, static_cast<int>(pool.size()) - 1))], pick(-3, 3));
		}
		e.constant = pick(-5, 5);
		return e;
	};
	const auto range_of = [&](const expr& e) {
		std::map<std::string, std::int64_t> folded;
		for(const auto& [var, coeff] : e.terms) {
			folded[var] += coeff;
		}
		interval r{e.constant, e.constant};
		for(const auto& [var, coeff] : folded) {
			r = r + coeff * env.at(var);
		}
		return r;
	};

	std::map<std::string, rect> domains;
	std::ostringstream accesses;
	const int access_count = pick(1, 3);
	const char* names[] = {"A", "B", "C"};
	for(int a = 0; a < access_count; ++a) {
		const int array_rank = pick(1, 3);
		point extents = point::zeros(array_rank);
		for(int k = 0; k < array_rank; ++k) {
			extents[k] = pick(4, array_rank == 1 ? 512 : 32);
		}
		domains.emplace(names[a], rect::from_extents(extents));
		if(a) accesses << ", ";
		accesses << "read " << names[a] << "[";
		for(int k = 0; k < array_rank; ++k) {
			if(k) accesses << ",";
			// a per-thread-empty slice would cull that thread's other axes from the
			// enumerated union, which per-axis interval bounds cannot see; generate slices
			// whose per-thread boxes are never empty
			switch(pick(0, 4)) {
			case 0: accesses << random_expr().text(); break;
			case 1: accesses << ":"; break;
			case 2: {
				// lower-bounded: e(t) <= extent-1 for all threads
				std::optional<expr> e;
				for(int attempt = 0; attempt < 20 && !e; ++attempt) {
					auto candidate = random_expr();
					if(range_of(candidate).hi <= extents[k] - 1) e = candidate;
				}
				if(e) {
					accesses << e->text() << ":";
				} else {
					accesses << ":";
				}
				break;
			}
			case 3: {
				// upper-bounded: e(t) >= 0 for all threads
				std::optional<expr> e;
				for(int attempt = 0; attempt < 20 && !e; ++attempt) {
					auto candidate = random_expr();
					if(range_of(candidate).lo >= 0) e = candidate;
				}
				if(e) {
					accesses << ":" << e->text();
				} else {
					accesses << ":";
				}
				break;
			}
			default: {
				// two-sided around a common center: lower <= upper for every thread
				const auto center = random_expr().text();
				accesses << center << "-" << pick(0, 3) << ":" << center << "+" << pick(0, 3);
				break;
			}
			}
		}
		accesses << "]";
	}

	region_case rc;
	rc.annotation_text = bindings.str() + " => " + accesses.str();
	rc.annotation = parse_annotation(rc.annotation_text);
	rc.superblock_threads = superblock;
	rc.block_size = block_size;
	rc.domains = domains;
	return rc;
}

} // namespace manta_test
