#include "manta/memory.hpp"

#include <algorithm>
#include <cassert>
#include <cstring>
#include <filesystem>
#include <limits>

namespace manta {

pool_allocator::pool_allocator(std::uint64_t capacity, std::uint64_t granularity) : m_capacity(capacity), m_granularity(granularity) {
	if(granularity == 0) throw validation_error("pool granularity must be positive");
	m_free.push_back({0, capacity});
}

std::uint64_t pool_allocator::rounded(std::uint64_t bytes) const { return (bytes + m_granularity - 1) / m_granularity * m_granularity; }

std::optional<std::uint64_t> pool_allocator::allocate(std::uint64_t bytes) {
	const std::uint64_t need = rounded(bytes);
	for(std::size_t i = 0; i < m_free.size(); ++i) {
		if(m_free[i].bytes < need) continue;
		const std::uint64_t offset = m_free[i].offset;
		m_free[i].offset += need;
		m_free[i].bytes -= need;
		if(m_free[i].bytes == 0) m_free.erase(m_free.begin() + static_cast<std::ptrdiff_t>(i));
		m_sizes.emplace(offset, need);
		m_used += need;
		return offset;
	}
	return std::nullopt;
}

bool pool_allocator::can_allocate(std::uint64_t bytes) const {
	const std::uint64_t need = rounded(bytes);
	for(const auto& s : m_free) {
		if(s.bytes >= need) return true;
	}
	return false;
}

void pool_allocator::release(std::uint64_t offset) {
	const auto it = m_sizes.find(offset);
	assert(it != m_sizes.end() && "releasing an unknown allocation");
	const std::uint64_t bytes = it->second;
	m_sizes.erase(it);
	m_used -= bytes;
	span restored{offset, bytes};
	const auto pos = std::lower_bound(m_free.begin(), m_free.end(), restored, [](const span& a, const span& b) { return a.offset < b.offset; });
	const auto inserted = m_free.insert(pos, restored);
	// coalesce with neighbors
	const auto index = static_cast<std::size_t>(inserted - m_free.begin());
	if(index + 1 < m_free.size() && m_free[index].offset + m_free[index].bytes == m_free[index + 1].offset) {
		m_free[index].bytes += m_free[index + 1].bytes;
		m_free.erase(m_free.begin() + static_cast<std::ptrdiff_t>(index) + 1);
	}
	if(index > 0 && m_free[index - 1].offset + m_free[index - 1].bytes == m_free[index].offset) {
		m_free[index - 1].bytes += m_free[index].bytes;
		m_free.erase(m_free.begin() + static_cast<std::ptrdiff_t>(index));
	}
}

void apply_fill(std::byte* data, std::size_t count, dtype type, fill_spec fill) {
	if(fill.kind == fill_spec::kind_t::none) return;
	dispatch_dtype(type, [&](auto tag) {
		using T = decltype(tag);
		T value{};
		switch(fill.kind) {
		case fill_spec::kind_t::none: return;
		case fill_spec::kind_t::zero: value = T{0}; break;
		case fill_spec::kind_t::one: value = T{1}; break;
		case fill_spec::kind_t::reduce_identity:
			switch(fill.op) {
			case reduce_op::plus: value = T{0}; break;
			case reduce_op::times: value = T{1}; break;
			case reduce_op::min: value = std::numeric_limits<T>::max(); break;
			case reduce_op::max: value = std::numeric_limits<T>::lowest(); break;
			}
			break;
		}
		auto* elems = reinterpret_cast<T*>(data);
		std::fill(elems, elems + count, value);
	});
}

memory_manager::memory_manager(int worker, const memory_config& cfg)
    : m_worker(worker), m_cfg(cfg), m_host_pool(cfg.host_capacity, cfg.granularity), m_disk_pool(cfg.disk_capacity, cfg.granularity) {
	for(int d = 0; d < cfg.devices; ++d) {
		m_device_pools.emplace_back(cfg.device_capacity, cfg.granularity);
	}
	m_counters.peak_device_bytes.assign(static_cast<std::size_t>(cfg.devices), 0);
	if(!cfg.disk_in_memory) {
		const auto dir = cfg.spill_dir.empty() ? std::filesystem::temp_directory_path() : std::filesystem::path(cfg.spill_dir);
		m_spill_path = (dir / ("manta-spill-w" + std::to_string(worker) + "-" + std::to_string(reinterpret_cast<std::uintptr_t>(this)) + ".bin")).string();
		m_spill_file = std::fopen(m_spill_path.c_str(), "w+b");
		if(m_spill_file == nullptr) throw execution_error("cannot open spill file " + m_spill_path);
	}
}

memory_manager::~memory_manager() {
	if(m_spill_file != nullptr) {
		std::fclose(m_spill_file);
		std::error_code ec;
		std::filesystem::remove(m_spill_path, ec);
	}
}

memory_manager::buffer& memory_manager::get_buffer(chunk_id id) {
	const auto it = m_buffers.find(id);
	if(it == m_buffers.end()) throw execution_error("worker " + std::to_string(m_worker) + " has no buffer for chunk " + std::to_string(id));
	return it->second;
}

void memory_manager::write_spill(std::uint64_t offset, const std::vector<std::byte>& data) {
	if(m_cfg.disk_in_memory) {
		if(m_spill_memory.size() < offset + data.size()) m_spill_memory.resize(offset + data.size());
		std::memcpy(m_spill_memory.data() + offset, data.data(), data.size());
		return;
	}
	if(std::fseek(m_spill_file, static_cast<long>(offset), SEEK_SET) != 0 || std::fwrite(data.data(), 1, data.size(), m_spill_file) != data.size()) {
		throw execution_error("spill write failed");
	}
	std::fflush(m_spill_file);
}

std::vector<std::byte> memory_manager::read_spill(std::uint64_t offset, std::uint64_t size) {
	std::vector<std::byte> data(size);
	if(m_cfg.disk_in_memory) {
		std::memcpy(data.data(), m_spill_memory.data() + offset, size);
		return data;
	}
	if(std::fseek(m_spill_file, static_cast<long>(offset), SEEK_SET) != 0 || std::fread(data.data(), 1, size, m_spill_file) != size) {
		throw execution_error("spill read failed");
	}
	return data;
}

std::uint64_t memory_manager::evictable_bytes(int device) const {
	std::uint64_t total = 0;
	for(const auto& [id, b] : m_buffers) {
		if(b.home.device == device && b.tier == memory_tier::device && b.pin_count == 0) {
			total += m_device_pools[static_cast<std::size_t>(device)].rounded(b.bytes_size);
		}
	}
	return total;
}

void memory_manager::spill_host_buffer_to_disk(buffer& b) {
	assert(b.tier == memory_tier::host);
	const auto offset = m_disk_pool.allocate(b.bytes_size);
	if(!offset) throw execution_error("disk tier exhausted while spilling chunk " + std::to_string(b.id));
	write_spill(*offset, b.data);
	m_host_pool.release(b.pool_offset);
	b.pool_offset = *offset;
	b.tier = memory_tier::disk;
	m_counters.bytes_host_to_disk += b.bytes_size;
	m_counters.evictions += 1;
	b.data.clear();
	b.data.shrink_to_fit();
}

bool memory_manager::evict_one(int device) {
	buffer* victim = nullptr;
	for(auto& [id, b] : m_buffers) {
		if(b.home.device != device || b.tier != memory_tier::device || b.pin_count != 0) continue;
		if(victim == nullptr || b.last_use < victim->last_use) victim = &b;
	}
	if(victim == nullptr) return false;
	// make room on the host, spilling its least-recently-used contents to disk
	while(!m_host_pool.can_allocate(victim->bytes_size)) {
		buffer* host_victim = nullptr;
		for(auto& [id, b] : m_buffers) {
			if(b.tier != memory_tier::host) continue;
			if(host_victim == nullptr || b.last_use < host_victim->last_use) host_victim = &b;
		}
		if(host_victim == nullptr) throw execution_error("host tier exhausted and nothing left to spill");
		spill_host_buffer_to_disk(*host_victim);
	}
	device_pool(device).release(victim->pool_offset);
	const auto host_offset = m_host_pool.allocate(victim->bytes_size);
	assert(host_offset);
	victim->pool_offset = *host_offset;
	victim->tier = memory_tier::host;
	m_counters.bytes_device_to_host += victim->bytes_size;
	m_counters.evictions += 1;
	return true;
}

/// Allocates on the device, evicting least-recently-used unpinned buffers as needed.
/// Returns nullopt when pinned buffers fragment the pool too much to produce a
/// contiguous span (the caller rolls back and retries once pins are released).
std::optional<std::uint64_t> memory_manager::allocate_on_device(int device, std::uint64_t bytes) {
	for(;;) {
		if(const auto offset = device_pool(device).allocate(bytes)) {
			note_device_usage(device);
			return offset;
		}
		if(!evict_one(device)) return std::nullopt;
	}
}

bool memory_manager::restore_to_device(buffer& b) {
	assert(b.tier != memory_tier::device);
	const auto offset_opt = allocate_on_device(b.home.device, b.bytes_size);
	if(!offset_opt) return false;
	const std::uint64_t offset = *offset_opt;
	if(b.tier == memory_tier::host) {
		m_host_pool.release(b.pool_offset);
		m_counters.bytes_host_to_device += b.bytes_size;
	} else {
		b.data = read_spill(b.pool_offset, b.bytes_size);
		m_disk_pool.release(b.pool_offset);
		m_counters.bytes_disk_to_device += b.bytes_size;
	}
	b.pool_offset = offset;
	b.tier = memory_tier::device;
	return true;
}

void memory_manager::note_device_usage(int device) {
	auto& peak = m_counters.peak_device_bytes[static_cast<std::size_t>(device)];
	peak = std::max(peak, device_pool(device).used());
}

void memory_manager::debug_dump() const {
	for(const auto& [id, b] : m_buffers) {
		std::fprintf(stderr, "  chunk %ld: tier=%d pins=%d bytes=%lu offset=%lu\n", static_cast<long>(id), static_cast<int>(b.tier), b.pin_count,
		    static_cast<unsigned long>(b.bytes_size), static_cast<unsigned long>(b.pool_offset));
	}
	for(std::size_t d = 0; d < m_device_pools.size(); ++d) {
		std::fprintf(stderr, "  pool d%zu: used=%lu free=%lu\n", d, static_cast<unsigned long>(m_device_pools[d].used()),
		    static_cast<unsigned long>(m_device_pools[d].free_bytes()));
	}
	std::fprintf(stderr, "  staged:");
	for(const auto& [t, req] : m_staged) {
		std::fprintf(stderr, " t%ld", static_cast<long>(t));
	}
	std::fprintf(stderr, "\n");
}

std::uint64_t memory_manager::resource_footprint(device_id resource) const {
	const auto it = m_resource_bytes.find(resource);
	return it == m_resource_bytes.end() ? 0 : it->second;
}

bool memory_manager::try_stage(const stage_request& request) {
	assert(!m_staged.count(request.task));

	// distinct chunks of this request with their sizes
	struct need {
		chunk_id id;
		std::uint64_t bytes;
		int device;
		bool create;
	};
	std::vector<need> needs;
	const auto add_need = [&](chunk_id id, std::uint64_t bytes, int device, bool create) {
		for(const auto& n : needs) {
			if(n.id == id) return;
		}
		needs.push_back({id, bytes, device, create});
	};
	for(const auto& c : request.creates) {
		add_need(c.id, static_cast<std::uint64_t>(c.region.volume()) * dtype_size(c.type), c.home.device, true);
	}
	for(const auto id : request.uses) {
		const auto& b = get_buffer(id);
		add_need(id, b.bytes_size, b.home.device, false);
	}

	// fatal configuration errors: this task can never run
	std::uint64_t footprint = 0;
	std::map<int, std::uint64_t> per_device;
	for(const auto& n : needs) {
		const std::uint64_t rounded = device_pool(n.device).rounded(n.bytes);
		footprint += rounded;
		per_device[n.device] += rounded;
	}
	if(footprint > m_cfg.staging_threshold) {
		throw execution_error("task " + std::to_string(request.task) + " footprint " + std::to_string(footprint) + " exceeds the staging threshold "
		                      + std::to_string(m_cfg.staging_threshold));
	}
	for(const auto& [device, bytes] : per_device) {
		if(bytes > m_cfg.device_capacity) {
			throw execution_error("task " + std::to_string(request.task) + " footprint " + std::to_string(bytes) + " exceeds device capacity "
			                      + std::to_string(m_cfg.device_capacity));
		}
	}

	// throttle: the union of pinned chunks per resource may not exceed the threshold
	std::uint64_t new_bytes = 0;
	auto& pins = m_resource_pins[request.resource];
	for(const auto& n : needs) {
		if(!pins.count(n.id)) new_bytes += device_pool(n.device).rounded(n.bytes);
	}
	if(m_resource_bytes[request.resource] + new_bytes > m_cfg.staging_threshold) return false;

	// capacity: everything must be allocatable after evicting unpinned buffers
	for(const auto& [device, bytes] : per_device) {
		std::uint64_t available = device_pool(device).free_bytes() + evictable_bytes(device);
		// chunks of this request that are already device-resident stay put
		for(const auto& n : needs) {
			if(n.device != device || n.create) continue;
			const auto& b = get_buffer(n.id);
			if(b.tier == memory_tier::device && b.pin_count == 0) available -= device_pool(device).rounded(n.bytes);
		}
		std::uint64_t required = 0;
		for(const auto& n : needs) {
			if(n.device != device) continue;
			if(n.create) {
				required += device_pool(device).rounded(n.bytes);
			} else {
				const auto& b = get_buffer(n.id);
				if(b.tier != memory_tier::device) required += device_pool(device).rounded(n.bytes);
			}
		}
		if(required > available) return false;
	}

	// commit: pin existing buffers first so fresh allocations cannot evict them. The byte
	// arithmetic above ignores fragmentation, so contiguous allocation can still fail; in
	// that case undo everything and report the task as blocked (it retries after other
	// tasks unstage, and an otherwise-empty pool always fits a footprint <= capacity).
	const auto rollback = [&](const std::vector<chunk_id>& pinned, const std::vector<chunk_id>& created) {
		for(const auto id : pinned) {
			get_buffer(id).pin_count -= 1;
		}
		for(const auto id : created) {
			auto& b = get_buffer(id);
			device_pool(b.home.device).release(b.pool_offset);
			m_buffers.erase(id);
		}
		return false;
	};
	std::vector<chunk_id> pinned, created;
	for(const auto& n : needs) {
		if(n.create) continue;
		auto& b = get_buffer(n.id);
		b.pin_count += 1;
		b.last_use = touch();
		pinned.push_back(n.id);
	}
	for(const auto& n : needs) {
		if(!n.create) continue;
		const auto& info = *std::find_if(request.creates.begin(), request.creates.end(), [&](const auto& c) { return c.id == n.id; });
		const auto offset = allocate_on_device(info.home.device, n.bytes);
		if(!offset) return rollback(pinned, created);
		buffer b;
		b.id = info.id;
		b.region = info.region;
		b.type = info.type;
		b.home = info.home;
		b.bytes_size = n.bytes;
		b.pool_offset = *offset;
		b.tier = memory_tier::device;
		b.data.resize(n.bytes);
		apply_fill(b.data.data(), static_cast<std::size_t>(info.region.volume()), info.type, info.fill);
		b.last_use = touch();
		b.pin_count = 1;
		m_buffers.emplace(b.id, std::move(b));
		created.push_back(info.id);
	}
	for(const auto& n : needs) {
		auto& b = get_buffer(n.id);
		if(b.tier != memory_tier::device && !restore_to_device(b)) return rollback(pinned, created);
	}

	// throttle accounting + safety monitor
	for(const auto& n : needs) {
		if(pins[n.id]++ == 0) m_resource_bytes[request.resource] += device_pool(n.device).rounded(n.bytes);
	}
	m_counters.staging_checks += 1;
	for(const auto& [resource, bytes] : m_resource_bytes) {
		if(bytes > m_cfg.staging_threshold) m_counters.staging_violations += 1;
	}
	m_staged.emplace(request.task, request);
	return true;
}

void memory_manager::unstage(task_id task) {
	const auto it = m_staged.find(task);
	assert(it != m_staged.end() && "unstaging a task that was never staged");
	const stage_request& request = it->second;
	std::vector<chunk_id> distinct;
	for(const auto& c : request.creates) {
		distinct.push_back(c.id);
	}
	for(const auto id : request.uses) {
		if(std::find(distinct.begin(), distinct.end(), id) == distinct.end()) distinct.push_back(id);
	}
	auto& pins = m_resource_pins[request.resource];
	for(const auto id : distinct) {
		auto& b = get_buffer(id);
		assert(b.pin_count > 0);
		b.pin_count -= 1;
		b.last_use = touch();
		if(--pins[id] == 0) {
			pins.erase(id);
			m_resource_bytes[request.resource] -= device_pool(b.home.device).rounded(b.bytes_size);
		}
	}
	m_staged.erase(it);
}

void memory_manager::delete_buffer(chunk_id id) {
	auto& b = get_buffer(id);
	if(b.pin_count != 0) throw execution_error("deleting chunk " + std::to_string(id) + " while it is pinned");
	switch(b.tier) {
	case memory_tier::device: device_pool(b.home.device).release(b.pool_offset); break;
	case memory_tier::host: m_host_pool.release(b.pool_offset); break;
	case memory_tier::disk: m_disk_pool.release(b.pool_offset); break;
	}
	m_buffers.erase(id);
}

array_view memory_manager::view(chunk_id id) {
	auto& b = get_buffer(id);
	if(b.tier != memory_tier::device) throw execution_error("chunk " + std::to_string(id) + " is not staged on its device");
	return array_view::over_region(b.data.data(), b.type, b.region, m_cfg.bounds_check);
}

std::vector<std::byte> memory_manager::read_bytes(chunk_id id) {
	auto& b = get_buffer(id);
	if(b.tier == memory_tier::disk) return read_spill(b.pool_offset, b.bytes_size);
	return b.data;
}

} // namespace manta
