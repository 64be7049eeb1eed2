#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "annotation.hpp"
#include "distribution.hpp"
#include "dtype.hpp"
#include "geometry.hpp"

namespace manta {

using task_id = std::int64_t;

/// How a freshly created chunk buffer is initialized.
struct fill_spec {
	enum class kind_t { none, zero, one, reduce_identity };
	kind_t kind = kind_t::none;
	reduce_op op = reduce_op::plus; // for reduce_identity

	static fill_spec none() { return {}; }
	static fill_spec zero() { return {kind_t::zero, reduce_op::plus}; }
	static fill_spec one() { return {kind_t::one, reduce_op::plus}; }
	static fill_spec identity_of(reduce_op op) { return {kind_t::reduce_identity, op}; }

	friend bool operator==(const fill_spec&, const fill_spec&) = default;
};

struct create_task {
	chunk_descriptor chunk;
	dtype type = dtype::f32;
	fill_spec fill;
};

struct delete_task {
	chunk_id chunk = -1;
};

/// A scalar kernel argument, an array argument bound to a chunk, or an argument whose
/// access region is empty for this superblock (never dereferenced by a guarded kernel).
struct arg_binding {
	enum class kind_t { scalar_int, scalar_float, chunk, none };
	kind_t kind = kind_t::none;
	std::int64_t scalar_int = 0;
	double scalar_float = 0.0;
	chunk_id chunk = -1;
};

struct execute_task {
	std::string kernel;
	device_id device;
	rect superblock_blocks;  // thread-block index space
	rect superblock_threads; // global thread space, clipped to the launch grid
	point block_size;
	std::vector<arg_binding> args; // one per kernel parameter
};

struct copy_task {
	chunk_id src = -1;
	chunk_id dst = -1;
	rect src_region;
	rect dst_region; // equal extents to src_region
};

struct send_task {
	chunk_id chunk = -1;
	rect region;
	int peer_worker = -1;
	std::uint64_t tag = 0;
};

struct recv_task {
	chunk_id chunk = -1;
	rect region;
	int peer_worker = -1;
	std::uint64_t tag = 0;
};

/// Element-wise combination of equally-shaped chunks, in ascending input order.
struct reduce_task {
	reduce_op op = reduce_op::plus;
	std::vector<chunk_id> inputs;
	chunk_id output = -1;
};

struct task {
	task_id id = -1;
	int worker = 0;
	/// The executor this task occupies for staging/throttling purposes.
	device_id resource;
	std::vector<task_id> deps; // same-worker, ascending, already emitted
	std::variant<create_task, delete_task, execute_task, copy_task, send_task, recv_task, reduce_task> op;

	const char* kind_name() const;
};

/// Per-worker task DAGs. Cross-worker edges exist only as send/recv pairs matched by tag;
/// dependency lists never reference another worker's tasks.
struct execution_plan {
	std::vector<std::vector<task>> per_worker;

	explicit execution_plan(int workers = 0) : per_worker(static_cast<std::size_t>(workers)) {}

	int workers() const { return static_cast<int>(per_worker.size()); }
	std::size_t task_count() const;
	void append(task t);
	/// All tasks of all workers in ascending id order.
	std::vector<const task*> in_id_order() const;
};

/// Renders the plan as a DOT digraph, one cluster per worker, send/recv pairs drawn as
/// dashed cross-cluster edges. Output is deterministic for a given plan.
std::string export_dot(const execution_plan& plan);

} // namespace manta
