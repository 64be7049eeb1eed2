#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "annotation.hpp"
#include "array_registry.hpp"
#include "distribution.hpp"
#include "kernels.hpp"
#include "task.hpp"

namespace manta {

struct driver_config {
	int workers = 1;
	int devices_per_worker = 1;
	/// Fault-injection hook: drop every dependency edge produced by conflict tracking.
	/// Exists so tests can demonstrate that those edges carry the coherence guarantees.
	bool suppress_conflict_deps = false;
};

struct launch_arg {
	enum class kind_t { scalar_int, scalar_float, array };
	kind_t kind = kind_t::array;
	std::int64_t i = 0;
	double f = 0.0;
	array_id arr = -1;

	static launch_arg scalar(std::int64_t v) { return {kind_t::scalar_int, v, 0.0, -1}; }
	static launch_arg scalar(double v) { return {kind_t::scalar_float, 0, v, -1}; }
	static launch_arg array(array_id id) { return {kind_t::array, 0, 0.0, id}; }
};

struct launch_result {
	task_id first_task = 0;
	task_id past_last_task = 0;
};

struct chunk_meta {
	chunk_descriptor descriptor;
	dtype type = dtype::f32;
	bool temp = false;
};

/// The driver: accepts array/launch/delete requests, resolves access regions against data
/// distributions, and grows the per-worker task DAGs. Plan construction is deterministic;
/// the same request sequence yields identical task ids, kinds and dependencies.
class driver {
  public:
	driver(driver_config cfg, const kernel_registry& kernels);

	const driver_config& config() const { return m_cfg; }
	/// All devices in worker-major order.
	const std::vector<device_id>& devices() const { return m_devices; }

	/// Registers an array and emits create tasks for its chunks. The distribution's chunk
	/// ids are rebased onto the driver's global id space (preserving order).
	const array_handle& create_array(const rect& domain, dtype type, const data_distribution& distribution, fill_spec fill);

	/// Emits delete tasks ordered after every outstanding task touching the array's chunks.
	void delete_array(array_id id);

	/// Plans one distributed kernel launch.
	launch_result launch(const std::string& kernel, const rect& grid, const point& block_size, const work_distribution& work,
	    const std::vector<launch_arg>& args, const access_annotation& annotation);

	const execution_plan& plan() const { return m_plan; }
	const array_registry& registry() const { return m_registry; }
	const kernel_registry& kernels() const { return *m_kernels; }
	const chunk_meta& chunk(chunk_id id) const;
	bool is_temp_chunk(chunk_id id) const { return chunk(id).temp; }

	/// Tasks emitted since the previous call, in id order (for incremental submission).
	std::vector<task> take_pending();

  private:
	driver_config m_cfg;
	const kernel_registry* m_kernels;
	std::vector<device_id> m_devices;
	array_registry m_registry;
	execution_plan m_plan;
	std::vector<task> m_pending;
	std::vector<int> m_task_worker; // task id -> worker
	chunk_id m_next_chunk = 0;
	std::map<chunk_id, chunk_meta> m_chunks;
	std::map<std::pair<int, int>, std::uint64_t> m_tags;   // (src worker, dst worker) -> next sequence
	std::map<chunk_id, std::vector<task_id>> m_temp_tasks; // same-worker tasks touching a live temp

	task_id next_task_id() const { return static_cast<task_id>(m_task_worker.size()); }
	task_id emit(int worker, device_id resource, std::vector<task_id> deps,
	    std::variant<create_task, delete_task, execute_task, copy_task, send_task, recv_task, reduce_task> op);
	std::uint64_t next_tag(int src_worker, int dst_worker);
	chunk_id new_temp_chunk(const rect& region, device_id home, dtype type);
	void touch_temp(chunk_id id, task_id t);
	/// record_access against the registry, honoring the fault-injection switch.
	std::vector<task_id> record(chunk_id c, task_id t, access_effect effect, bool check_filled = false);

	/// Emits the transfer of `region` from `src` to `dst` (copy, or send/recv across
	/// workers). Returns the task the *destination side* depends on and appends the ids of
	/// all emitted tasks to `emitted`.
	task_id emit_transfer(chunk_id src, chunk_id dst, const rect& region, std::vector<task_id> src_deps, std::vector<task_id> dst_deps,
	    std::vector<task_id>* emitted = nullptr);
};

} // namespace manta
