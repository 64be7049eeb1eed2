#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "geometry.hpp"

namespace manta {

/// Identifies one simulated device: worker index plus device index within that worker.
struct device_id {
	int worker = 0;
	int device = 0;

	friend bool operator==(const device_id&, const device_id&) = default;
	friend auto operator<=>(const device_id&, const device_id&) = default;
};

std::string to_string(const device_id& d);

/// Disjoint rectangular superblocks (in thread-block index space) covering a launch grid,
/// each assigned to one device.
struct work_distribution {
	struct superblock {
		rect blocks; // thread-block index space
		device_id device;
	};
	std::vector<superblock> superblocks;

	/// Throws validation_error unless the superblocks are pairwise disjoint and exactly
	/// cover `block_grid`.
	void validate(const rect& block_grid) const;
};

using chunk_id = std::int64_t;

struct chunk_descriptor {
	chunk_id id = -1;
	rect region; // array index space
	device_id home;
};

/// Possibly-overlapping rectangular chunks covering an array domain. Overlap means
/// replication; the planner keeps replicated elements coherent.
struct data_distribution {
	std::vector<chunk_descriptor> chunks;

	/// Throws validation_error unless every domain cell is covered by at least one chunk
	/// and every chunk lies inside the domain. (Coverage is checked exactly via inclusion-
	/// exclusion on chunk corners for small domains and by sampling otherwise.)
	void validate(const rect& domain) const;
};

/// Tiles `grid` (thread space) into superblocks of `threads_per_superblock` threads per
/// axis, assigned round-robin over `devices` in tile order. Extents must be multiples of
/// the block size; the trailing tiles may be ragged.
work_distribution block_work_dist(const rect& grid, const point& block_size, const point& threads_per_superblock, const std::vector<device_id>& devices);

/// Axis-aligned tiling of `domain` into chunks of `chunk_extents`, each expanded by
/// `halo` cells per axis and clipped to the domain. Home devices round-robin in tile
/// order. Chunk ids are assigned sequentially starting at `first_id`.
data_distribution tile_data_dist(const rect& domain, const point& chunk_extents, const point& halo, const std::vector<device_id>& devices,
    chunk_id first_id = 0);

/// Chunks of whole rows (rank >= 1; `rows_per_chunk` rows each).
data_distribution row_dist(const rect& domain, std::int64_t rows_per_chunk, const std::vector<device_id>& devices, chunk_id first_id = 0);

/// Chunks of whole columns (rank 2).
data_distribution col_dist(const rect& domain, std::int64_t cols_per_chunk, const std::vector<device_id>& devices, chunk_id first_id = 0);

/// Alias of tile_data_dist with zero halo.
data_distribution tile_dist(const rect& domain, const point& chunk_extents, const std::vector<device_id>& devices, chunk_id first_id = 0);

/// Tiling with a border of halo cells around each chunk interior.
data_distribution stencil_dist(const rect& domain, const point& chunk_extents, const point& halo, const std::vector<device_id>& devices,
    chunk_id first_id = 0);

/// One full-domain chunk per device (full replication).
data_distribution replicated_dist(const rect& domain, const std::vector<device_id>& devices, chunk_id first_id = 0);

/// A single full-domain chunk on one device.
data_distribution single_dist(const rect& domain, device_id home, chunk_id first_id = 0);

/// All chunks with a non-empty intersection with `region`, in ascending chunk-id order.
std::vector<chunk_descriptor> chunks_intersecting(const data_distribution& dist, const rect& region);

/// Among candidates whose region contains `region`: prefers a chunk homed on `executor`,
/// then one homed on the executor's worker, then the lowest chunk id. Returns nullopt when
/// no candidate encloses the region.
std::optional<chunk_descriptor> select_enclosing_chunk(const std::vector<chunk_descriptor>& candidates, const rect& region, device_id executor);

} // namespace manta
