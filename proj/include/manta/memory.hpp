#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kernels.hpp"
#include "task.hpp"

namespace manta {

enum class memory_tier { device, host, disk };

/// First-fit allocator over a fixed-granularity pool. Offsets are byte offsets into the
/// pool; all allocations are rounded up to whole granules.
class pool_allocator {
  public:
	pool_allocator(std::uint64_t capacity, std::uint64_t granularity);

	std::optional<std::uint64_t> allocate(std::uint64_t bytes);
	void release(std::uint64_t offset);
	bool can_allocate(std::uint64_t bytes) const;
	std::uint64_t rounded(std::uint64_t bytes) const;
	std::uint64_t capacity() const { return m_capacity; }
	std::uint64_t used() const { return m_used; }
	std::uint64_t free_bytes() const { return m_capacity - m_used; }

  private:
	struct span {
		std::uint64_t offset;
		std::uint64_t bytes;
	};
	std::uint64_t m_capacity;
	std::uint64_t m_granularity;
	std::uint64_t m_used = 0;
	std::vector<span> m_free;                        // sorted by offset, coalesced
	std::map<std::uint64_t, std::uint64_t> m_sizes; // offset -> allocated bytes
};

struct memory_config {
	int devices = 1;
	std::uint64_t device_capacity = 256ull << 20;
	std::uint64_t host_capacity = 1ull << 30;
	std::uint64_t disk_capacity = 4ull << 30;
	/// Total footprint of simultaneously staged tasks per resource (scaled-down analog of
	/// the 2 GB production heuristic).
	std::uint64_t staging_threshold = 64ull << 20;
	std::uint64_t granularity = 4096;
	bool disk_in_memory = false; // fake the spill file in memory (fast unit tests)
	std::string spill_dir;       // empty: system temp directory
	bool bounds_check = true;
};

struct chunk_create_info {
	chunk_id id = -1;
	rect region;
	dtype type = dtype::f32;
	device_id home;
	fill_spec fill;
};

struct stage_request {
	task_id task = -1;
	device_id resource;
	std::vector<chunk_id> uses;
	std::vector<chunk_create_info> creates;
};

struct memory_counters {
	std::uint64_t evictions = 0;
	std::uint64_t bytes_device_to_host = 0;
	std::uint64_t bytes_host_to_disk = 0;
	std::uint64_t bytes_host_to_device = 0;
	std::uint64_t bytes_disk_to_device = 0;
	std::uint64_t staging_checks = 0;
	std::uint64_t staging_violations = 0;
	std::vector<std::uint64_t> peak_device_bytes;
};

/// Per-worker bookkeeping of chunk buffers across the device/host/disk tiers. Staging
/// materializes and pins all of a task's chunks on their home devices in one atomic action,
/// evicting least-recently-used unpinned buffers downward as needed. Callers serialize
/// externally (the worker scheduler is the only mutator).
class memory_manager {
  public:
	memory_manager(int worker, const memory_config& cfg);
	~memory_manager();

	memory_manager(const memory_manager&) = delete;
	memory_manager& operator=(const memory_manager&) = delete;

	/// Stages a task: allocates created chunks, restores evicted ones, pins everything and
	/// charges the staging throttle. Returns false when the task must wait (throttle or
	/// capacity pressure); throws execution_error when the task could never be staged.
	bool try_stage(const stage_request& request);

	/// Unpins a staged task's chunks, refreshes their LRU stamps and releases its throttle
	/// budget.
	void unstage(task_id task);

	void delete_buffer(chunk_id id);
	bool has_buffer(chunk_id id) const { return m_buffers.count(id) != 0; }

	/// View over a staged (device-resident) buffer.
	array_view view(chunk_id id);

	/// Reads a buffer's bytes wherever it currently lives (device, host or spill file).
	std::vector<std::byte> read_bytes(chunk_id id);

	const memory_counters& counters() const { return m_counters; }
	void debug_dump() const;
	std::uint64_t resource_footprint(device_id resource) const;
	std::uint64_t staging_threshold() const { return m_cfg.staging_threshold; }

  private:
	struct buffer {
		chunk_id id = -1;
		rect region;
		dtype type = dtype::f32;
		device_id home;
		memory_tier tier = memory_tier::device;
		std::uint64_t pool_offset = 0;
		std::uint64_t bytes_size = 0; // exact payload size
		std::vector<std::byte> data;  // resident payload (empty while on disk)
		std::uint64_t last_use = 0;
		int pin_count = 0;
	};

	int m_worker;
	memory_config m_cfg;
	std::vector<pool_allocator> m_device_pools;
	pool_allocator m_host_pool;
	pool_allocator m_disk_pool;
	std::map<chunk_id, buffer> m_buffers;
	std::uint64_t m_clock = 0;
	memory_counters m_counters;

	// throttle accounting: chunks pinned per resource, each counted once
	std::map<device_id, std::map<chunk_id, int>> m_resource_pins;
	std::map<device_id, std::uint64_t> m_resource_bytes;
	std::map<task_id, stage_request> m_staged;

	// spill backing store
	std::FILE* m_spill_file = nullptr;
	std::string m_spill_path;
	std::vector<std::byte> m_spill_memory;

	std::uint64_t touch() { return ++m_clock; }
	pool_allocator& device_pool(int device) { return m_device_pools.at(static_cast<std::size_t>(device)); }
	buffer& get_buffer(chunk_id id);
	std::uint64_t evictable_bytes(int device) const;
	/// Moves the least-recently-used unpinned device buffer of `device` to the host tier
	/// (cascading host contents to disk if the host pool is full). False when everything
	/// device-resident is pinned.
	bool evict_one(int device);
	void spill_host_buffer_to_disk(buffer& b);
	std::optional<std::uint64_t> allocate_on_device(int device, std::uint64_t bytes);
	bool restore_to_device(buffer& b);
	void write_spill(std::uint64_t offset, const std::vector<std::byte>& data);
	std::vector<std::byte> read_spill(std::uint64_t offset, std::uint64_t size);
	void note_device_usage(int device);
};

/// Materializes a fill pattern for `count` elements of the given type.
void apply_fill(std::byte* data, std::size_t count, dtype type, fill_spec fill);

} // namespace manta
