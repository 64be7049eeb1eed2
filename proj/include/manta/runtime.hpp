#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "kernels.hpp"
#include "memory.hpp"
#include "task.hpp"
#include "transport.hpp"

namespace manta {

struct system_config {
	int workers = 1;
	int devices_per_worker = 1;
	memory_config memory;
	/// Ready-task selection: FIFO when unset, seeded random choice otherwise (test hook;
	/// final array contents must not depend on it).
	std::optional<std::uint64_t> ready_seed;
	/// synchronize() aborts when no task completes for this long (deadlock diagnosis).
	std::chrono::milliseconds progress_timeout{3000};
};

struct task_timing {
	task_id id = -1;
	std::string kind;
	std::uint64_t start_ns = 0;
	std::uint64_t end_ns = 0;
};

struct worker_report {
	int worker = 0;
	memory_counters memory;
	std::uint64_t bytes_sent = 0;
	std::uint64_t bytes_received = 0;
	std::vector<task_timing> tasks;
};

struct run_report {
	std::vector<worker_report> workers;

	std::uint64_t total_evictions() const;
	std::uint64_t total_disk_bytes() const;
	std::uint64_t total_bytes_sent() const;
	std::uint64_t staging_checks() const;
	std::uint64_t staging_violations() const;
	/// Serializes with fixed field names (JSON).
	std::string to_json() const;
};

namespace detail {
	class worker;
}

/// The simulated multi-device system: one scheduler context per worker, one executor
/// context per device, an in-process transport, and per-worker tiered memory managers.
/// Tasks are routed by worker id; dependencies are resolved per worker; send/recv pairs
/// match by tag over the transport.
class system_runtime {
  public:
	system_runtime(const system_config& cfg, const kernel_registry& kernels);
	~system_runtime();

	system_runtime(const system_runtime&) = delete;
	system_runtime& operator=(const system_runtime&) = delete;

	/// Queues tasks with their workers' schedulers; safe to call repeatedly (incremental
	/// plan submission).
	void submit(const std::vector<task>& tasks);

	/// Blocks until every submitted task has completed, then checks that the transport has
	/// no undelivered messages. Throws the first execution error raised by any worker, or
	/// execution_error on deadlock (e.g. an unmatched receive).
	void synchronize();

	/// Reads a chunk's bytes wherever they reside; call after synchronize().
	std::vector<std::byte> read_chunk(chunk_id id);

	run_report report();

  private:
	system_config m_cfg;
	std::unique_ptr<transport> m_transport;
	std::vector<std::unique_ptr<detail::worker>> m_workers;
	std::map<chunk_id, int> m_chunk_worker; // where each chunk was created
	std::mutex m_mutex;
};

} // namespace manta
