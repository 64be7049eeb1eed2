#include "manta/distribution.hpp"

#include <algorithm>
#include <cassert>

namespace manta {

std::string to_string(const device_id& d) { return "w" + std::to_string(d.worker) + "d" + std::to_string(d.device); }

void work_distribution::validate(const rect& block_grid) const {
	std::int64_t covered = 0;
	for(std::size_t i = 0; i < superblocks.size(); ++i) {
		const rect& r = superblocks[i].blocks;
		if(r.is_empty()) throw validation_error("superblock " + std::to_string(i) + " is empty");
		if(!contains(block_grid, r)) throw validation_error("superblock " + std::to_string(i) + " exceeds the launch grid");
		for(std::size_t j = i + 1; j < superblocks.size(); ++j) {
			if(!intersect(r, superblocks[j].blocks).is_empty()) {
				throw validation_error("superblocks " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
			}
		}
		covered += r.volume();
	}
	if(covered != block_grid.volume()) throw validation_error("superblocks do not cover the launch grid");
}

void data_distribution::validate(const rect& domain) const {
	if(chunks.empty()) throw validation_error("data distribution has no chunks");
	for(const auto& c : chunks) {
		if(c.region.is_empty()) throw validation_error("chunk " + std::to_string(c.id) + " is empty");
		if(!contains(domain, c.region)) throw validation_error("chunk " + std::to_string(c.id) + " exceeds the array domain");
	}
	// coverage: every cell in >= 1 chunk. Chunks may overlap, so count distinct covered
	// cells by sweeping the grid of region boundaries per axis.
	std::vector<std::int64_t> cuts[max_rank];
	const int rank = domain.rank();
	for(int k = 0; k < rank; ++k) {
		cuts[k].push_back(domain.lo[k]);
		cuts[k].push_back(domain.hi[k]);
		for(const auto& c : chunks) {
			cuts[k].push_back(c.region.lo[k]);
			cuts[k].push_back(c.region.hi[k]);
		}
		std::sort(cuts[k].begin(), cuts[k].end());
		cuts[k].erase(std::unique(cuts[k].begin(), cuts[k].end()), cuts[k].end());
	}
	std::int64_t covered = 0;
	const auto cell_count = [&](int axis) { return static_cast<std::int64_t>(cuts[axis].size()) - 1; };
	point idx = point::zeros(rank);
	const std::function<void(int)> sweep = [&](int axis) {
		if(axis == rank) {
			point lo = point::zeros(rank);
			point hi = point::zeros(rank);
			for(int k = 0; k < rank; ++k) {
				lo[k] = cuts[k][static_cast<std::size_t>(idx[k])];
				hi[k] = cuts[k][static_cast<std::size_t>(idx[k]) + 1];
			}
			const rect cell(lo, hi);
			if(!contains(domain, cell)) return;
			for(const auto& c : chunks) {
				if(contains(c.region, cell)) {
					covered += cell.volume();
					return;
				}
			}
			return;
		}
		for(idx[axis] = 0; idx[axis] < cell_count(axis); ++idx[axis]) {
			sweep(axis + 1);
		}
	};
	sweep(0);
	if(covered != domain.volume()) throw validation_error("data distribution does not cover the array domain");
}

namespace {

	std::int64_t div_ceil(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

	/// Tiles `domain` into boxes of `extents`, invoking fn(tile_index, interior) in
	/// row-major tile order.
	void for_each_tile(const rect& domain, const point& extents, const std::function<void(std::int64_t, const rect&)>& fn) {
		const int rank = domain.rank();
		point counts = point::zeros(rank);
		for(int k = 0; k < rank; ++k) {
			if(extents[k] <= 0) throw validation_error("chunk/superblock extents must be positive");
			counts[k] = div_ceil(domain.extent(k), extents[k]);
		}
		std::int64_t index = 0;
		point tile = point::zeros(rank);
		const std::function<void(int)> recurse = [&](int axis) {
			if(axis == rank) {
				point lo = point::zeros(rank);
				point hi = point::zeros(rank);
				for(int k = 0; k < rank; ++k) {
					lo[k] = domain.lo[k] + tile[k] * extents[k];
					hi[k] = std::min(domain.hi[k], lo[k] + extents[k]);
				}
				fn(index++, rect(lo, hi));
				return;
			}
			for(tile[axis] = 0; tile[axis] < counts[axis]; ++tile[axis]) {
				recurse(axis + 1);
			}
		};
		recurse(0);
	}

} // namespace

work_distribution block_work_dist(const rect& grid, const point& block_size, const point& threads_per_superblock, const std::vector<device_id>& devices) {
	if(devices.empty()) throw validation_error("no devices");
	if(grid.rank() != block_size.rank || grid.rank() != threads_per_superblock.rank) throw validation_error("axis-count mismatch in work distribution");
	point blocks_per_superblock = point::zeros(grid.rank());
	for(int k = 0; k < grid.rank(); ++k) {
		if(block_size[k] <= 0) throw validation_error("block size must be positive");
		if(threads_per_superblock[k] % block_size[k] != 0) {
			throw validation_error("superblock extent " + std::to_string(threads_per_superblock[k]) + " is not a multiple of block size "
			                       + std::to_string(block_size[k]) + " on axis " + std::to_string(k));
		}
		blocks_per_superblock[k] = threads_per_superblock[k] / block_size[k];
	}
	point block_grid_extents = point::zeros(grid.rank());
	for(int k = 0; k < grid.rank(); ++k) {
		block_grid_extents[k] = div_ceil(grid.extent(k), block_size[k]);
	}
	const rect block_grid = rect::from_extents(block_grid_extents);

	work_distribution dist;
	for_each_tile(block_grid, blocks_per_superblock, [&](std::int64_t index, const rect& tile) {
		dist.superblocks.push_back({tile, devices[static_cast<std::size_t>(index) % devices.size()]});
	});
	dist.validate(block_grid);
	return dist;
}

data_distribution tile_data_dist(const rect& domain, const point& chunk_extents, const point& halo, const std::vector<device_id>& devices,
    chunk_id first_id) {
	if(devices.empty()) throw validation_error("no devices");
	if(domain.rank() != chunk_extents.rank || domain.rank() != halo.rank) throw validation_error("axis-count mismatch in data distribution");
	for(int k = 0; k < domain.rank(); ++k) {
		if(halo[k] < 0) throw validation_error("halo must be non-negative");
	}
	data_distribution dist;
	for_each_tile(domain, chunk_extents, [&](std::int64_t index, const rect& interior) {
		point lo = interior.lo;
		point hi = interior.hi;
		for(int k = 0; k < domain.rank(); ++k) {
			lo[k] -= halo[k];
			hi[k] += halo[k];
		}
		const rect region = clip(rect(lo, hi), domain);
		dist.chunks.push_back({first_id + index, region, devices[static_cast<std::size_t>(index) % devices.size()]});
	});
	dist.validate(domain);
	return dist;
}

data_distribution row_dist(const rect& domain, std::int64_t rows_per_chunk, const std::vector<device_id>& devices, chunk_id first_id) {
	point extents = domain.extents();
	extents[0] = rows_per_chunk;
	return tile_data_dist(domain, extents, point::zeros(domain.rank()), devices, first_id);
}

data_distribution col_dist(const rect& domain, std::int64_t cols_per_chunk, const std::vector<device_id>& devices, chunk_id first_id) {
	if(domain.rank() < 2) throw validation_error("column distribution requires rank >= 2");
	point extents = domain.extents();
	extents[1] = cols_per_chunk;
	return tile_data_dist(domain, extents, point::zeros(domain.rank()), devices, first_id);
}

data_distribution tile_dist(const rect& domain, const point& chunk_extents, const std::vector<device_id>& devices, chunk_id first_id) {
	return tile_data_dist(domain, chunk_extents, point::zeros(domain.rank()), devices, first_id);
}

data_distribution stencil_dist(const rect& domain, const point& chunk_extents, const point& halo, const std::vector<device_id>& devices,
    chunk_id first_id) {
	return tile_data_dist(domain, chunk_extents, halo, devices, first_id);
}

data_distribution replicated_dist(const rect& domain, const std::vector<device_id>& devices, chunk_id first_id) {
	if(devices.empty()) throw validation_error("no devices");
	data_distribution dist;
	for(std::size_t i = 0; i < devices.size(); ++i) {
		dist.chunks.push_back({first_id + static_cast<chunk_id>(i), domain, devices[i]});
	}
	dist.validate(domain);
	return dist;
}

data_distribution single_dist(const rect& domain, device_id home, chunk_id first_id) {
	data_distribution dist;
	dist.chunks.push_back({first_id, domain, home});
	dist.validate(domain);
	return dist;
}

std::vector<chunk_descriptor> chunks_intersecting(const data_distribution& dist, const rect& region) {
	std::vector<chunk_descriptor> out;
	if(region.is_empty()) return out;
	for(const auto& c : dist.chunks) {
		if(!intersect(c.region, region).is_empty()) out.push_back(c);
	}
	std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
	return out;
}

std::optional<chunk_descriptor> select_enclosing_chunk(const std::vector<chunk_descriptor>& candidates, const rect& region, device_id executor) {
	std::optional<chunk_descriptor> best;
	int best_score = -1;
	for(const auto& c : candidates) {
		if(!contains(c.region, region)) continue;
		const int score = c.home == executor ? 2 : c.home.worker == executor.worker ? 1 : 0;
		// ties resolve to the lowest chunk id; candidates arrive in ascending id order
		if(score > best_score) {
			best = c;
			best_score = score;
		}
	}
	return best;
}

} // namespace manta
