#include "manta/runtime.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <random>
#include <type_traits>
#include <sstream>

#include <json.hpp>

namespace manta::detail {

using clock = std::chrono::steady_clock;

namespace {
	std::uint64_t ns_since(clock::time_point start) {
		return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(clock::now() - start).count());
	}
} // namespace

/// One executor context per simulated device: runs kernel bodies block by block.
class device_executor {
  public:
	struct job {
		task_id id = -1;
		const kernel_def* kernel = nullptr;
		kernel_context ctx;
		rect blocks;
	};

	using completion_fn = std::function<void(task_id, std::exception_ptr)>;

	explicit device_executor(completion_fn on_complete) : m_on_complete(std::move(on_complete)), m_thread([this] { run(); }) {}

	~device_executor() {
		{
			std::lock_guard lock(m_mutex);
			m_stop = true;
		}
		m_cv.notify_all();
		m_thread.join();
	}

	void enqueue(job j) {
		{
			std::lock_guard lock(m_mutex);
			m_jobs.push_back(std::move(j));
		}
		m_cv.notify_all();
	}

  private:
	std::mutex m_mutex;
	std::condition_variable m_cv;
	std::deque<job> m_jobs;
	bool m_stop = false;
	completion_fn m_on_complete;
	std::thread m_thread;

	void run() {
		for(;;) {
			job j;
			{
				std::unique_lock lock(m_mutex);
				m_cv.wait(lock, [&] { return m_stop || !m_jobs.empty(); });
				if(m_jobs.empty()) return;
				j = std::move(m_jobs.front());
				m_jobs.pop_front();
			}
			std::exception_ptr error;
			try {
				// one invocation per thread block, ascending block index order
				point block = j.blocks.lo;
				const int rank = j.blocks.rank();
				bool done = j.blocks.is_empty();
				while(!done) {
					j.ctx.virtual_block = block;
					j.kernel->body(j.ctx);
					int axis = rank - 1;
					while(axis >= 0) {
						if(++block[axis] < j.blocks.hi[axis]) break;
						block[axis] = j.blocks.lo[axis];
						--axis;
					}
					if(axis < 0) done = true;
				}
			} catch(...) {
				error = std::current_exception();
			}
			m_on_complete(j.id, error);
		}
	}
};

/// Per-worker scheduler: tracks dependencies, stages ready tasks through the memory
/// manager (parking them when the throttle or capacity blocks), runs data-movement tasks
/// inline and hands kernel executions to the device executors.
class worker {
  public:
	worker(int id, const system_config& cfg, const kernel_registry& kernels, transport& tr)
	    : m_id(id), m_cfg(cfg), m_kernels(&kernels), m_transport(&tr), m_start(clock::now()) {
		memory_config mem = cfg.memory;
		mem.devices = cfg.devices_per_worker;
		m_memory = std::make_unique<memory_manager>(id, mem);
		if(cfg.ready_seed) m_rng.emplace(*cfg.ready_seed + static_cast<std::uint64_t>(id) * 0x9e3779b97f4a7c15ULL);
		tr.set_arrival_callback(id, [this] { wake_transport(); });
		for(int d = 0; d < cfg.devices_per_worker; ++d) {
			m_executors.push_back(std::make_unique<device_executor>([this](task_id t, std::exception_ptr e) { on_device_complete(t, e); }));
		}
		m_thread = std::thread([this] { run(); });
	}

	~worker() {
		{
			std::lock_guard lock(m_signal_mutex);
			m_stop = true;
		}
		m_cv.notify_all();
		m_thread.join();
		m_executors.clear();
	}

	void submit(std::vector<task> tasks) {
		{
			std::lock_guard lock(m_signal_mutex);
			m_submitted += tasks.size();
			for(auto& t : tasks) {
				m_incoming.push_back(std::move(t));
			}
		}
		m_cv.notify_all();
	}

	struct progress {
		std::uint64_t submitted = 0;
		std::uint64_t completed = 0;
		bool has_failed = false;
	};

	progress snapshot() {
		std::lock_guard lock(m_signal_mutex);
		return {m_submitted, m_completed, m_error != nullptr};
	}

	void debug_dump() {
		std::fprintf(stderr, "worker %d: ready=%zu waiting_recvs=%zu pending_deps=%zu running=%d\n", m_id, m_ready.size(), m_waiting_recvs.size(),
		    m_missing_deps.size(), m_running);
		for(const auto& [resource, queue] : m_blocked) {
			std::fprintf(stderr, "  blocked on d%d:", resource.device);
			for(const auto id : queue) {
				const auto& t = m_tasks.at(id);
				std::fprintf(stderr, " t%ld(%s)", static_cast<long>(id), t.kind_name());
			}
			std::fprintf(stderr, "\n");
		}
		std::lock_guard lock(m_mm_mutex);
		std::fprintf(stderr, "  mm: footprint_d0=%lu threshold=%lu\n", static_cast<unsigned long>(m_memory->resource_footprint({m_id, 0})),
		    static_cast<unsigned long>(m_memory->staging_threshold()));
		m_memory->debug_dump();
	}

	std::exception_ptr error() {
		std::lock_guard lock(m_signal_mutex);
		return m_error;
	}

	std::vector<std::byte> read_chunk_bytes(chunk_id id) {
		std::lock_guard lock(m_mm_mutex);
		return m_memory->read_bytes(id);
	}

	bool has_chunk(chunk_id id) {
		std::lock_guard lock(m_mm_mutex);
		return m_memory->has_buffer(id);
	}

	worker_report report() {
		worker_report r;
		r.worker = m_id;
		{
			std::lock_guard signal(m_signal_mutex);
			r.tasks = m_timings;
		}
		{
			std::lock_guard lock(m_mm_mutex);
			r.memory = m_memory->counters();
		}
		r.bytes_sent = m_transport->bytes_sent(m_id);
		r.bytes_received = m_transport->bytes_received(m_id);
		return r;
	}

  private:
	int m_id;
	system_config m_cfg;
	const kernel_registry* m_kernels;
	transport* m_transport;
	clock::time_point m_start;
	std::unique_ptr<memory_manager> m_memory;
	std::mutex m_mm_mutex; // memory manager is serialized per worker; readers wait
	std::vector<std::unique_ptr<device_executor>> m_executors;
	std::optional<std::mt19937_64> m_rng;

	// signal state shared with other threads
	std::mutex m_signal_mutex;
	std::condition_variable m_cv;
	std::deque<task> m_incoming;
	std::deque<std::pair<task_id, std::exception_ptr>> m_device_done;
	bool m_transport_dirty = false;
	bool m_stop = false;
	std::uint64_t m_submitted = 0;
	std::uint64_t m_completed = 0;
	std::exception_ptr m_error;
	std::vector<task_timing> m_timings;

	// scheduler-thread state
	std::map<task_id, task> m_tasks;
	std::map<task_id, int> m_missing_deps;
	std::multimap<task_id, task_id> m_waiters;
	std::set<task_id> m_done;
	std::deque<task_id> m_ready;
	std::map<device_id, std::deque<task_id>> m_blocked; // staged-blocked, FIFO per resource
	std::vector<task_id> m_waiting_recvs;
	std::map<task_id, std::vector<std::byte>> m_recv_payloads;
	std::map<task_id, std::uint64_t> m_started_ns;
	std::map<chunk_id, chunk_create_info> m_chunk_info;
	int m_running = 0;
	bool m_failed = false;
	bool m_retry_blocked = false; // staging budget was released since the last poll

	std::thread m_thread;

	void wake_transport() {
		{
			std::lock_guard lock(m_signal_mutex);
			m_transport_dirty = true;
		}
		m_cv.notify_all();
	}

	void on_device_complete(task_id t, std::exception_ptr e) {
		{
			std::lock_guard lock(m_signal_mutex);
			m_device_done.emplace_back(t, e);
		}
		m_cv.notify_all();
	}

	void run() {
		std::unique_lock signal(m_signal_mutex);
		for(;;) {
			m_cv.wait(signal, [&] { return m_stop || !m_incoming.empty() || !m_device_done.empty() || m_transport_dirty; });
			if(m_stop && m_incoming.empty() && m_device_done.empty()) return;

			std::vector<task> incoming(m_incoming.begin(), m_incoming.end());
			m_incoming.clear();
			std::vector<std::pair<task_id, std::exception_ptr>> device_done(m_device_done.begin(), m_device_done.end());
			m_device_done.clear();
			const bool transport_dirty = m_transport_dirty;
			m_transport_dirty = false;
			signal.unlock();

			try {
				for(auto& t : incoming) {
					integrate(std::move(t));
				}
				for(const auto& [id, error] : device_done) {
					if(error) std::rethrow_exception(error);
					finish(id);
				}
				if(transport_dirty) {
					auto recvs = std::move(m_waiting_recvs);
					m_waiting_recvs.clear();
					for(const auto id : recvs) {
						m_ready.push_back(id);
					}
				}
				pump();
			} catch(...) {
				signal.lock();
				if(!m_error) m_error = std::current_exception();
				m_failed = true;
				// count everything still queued as completed so synchronize() can finish
				m_completed = m_submitted;
				signal.unlock();
			}

			signal.lock();
		}
	}

	void integrate(task t) {
		const task_id id = t.id;
		int missing = 0;
		for(const auto dep : t.deps) {
			if(!m_done.count(dep)) {
				m_waiters.emplace(dep, id);
				++missing;
			}
		}
		if(const auto* c = std::get_if<create_task>(&t.op)) {
			m_chunk_info.emplace(c->chunk.id, chunk_create_info{c->chunk.id, c->chunk.region, c->type, c->chunk.home, c->fill});
		}
		m_tasks.emplace(id, std::move(t));
		if(missing == 0) {
			m_ready.push_back(id);
		} else {
			m_missing_deps.emplace(id, missing);
		}
	}

	task_id pick_ready() {
		std::size_t index = 0;
		if(m_rng && m_ready.size() > 1) index = static_cast<std::size_t>((*m_rng)()) % m_ready.size();
		const task_id id = m_ready[index];
		m_ready.erase(m_ready.begin() + static_cast<std::ptrdiff_t>(index));
		return id;
	}

	void pump() {
		if(m_failed) return;
		for(;;) {
			while(!m_ready.empty()) {
				const task_id id = pick_ready();
				if(!try_start(id)) continue;
			}
			if(!m_retry_blocked) break;
			m_retry_blocked = false;
			retry_blocked();
		}
	}

	/// Attempts to stage and dispatch one task; parks it when its message has not arrived
	/// or the memory manager cannot admit it yet.
	bool try_start(task_id id) {
		const task& t = m_tasks.at(id);

		// receives wait (unstaged) until their message arrives
		if(const auto* r = std::get_if<recv_task>(&t.op)) {
			if(!m_recv_payloads.count(id)) {
				auto payload = m_transport->try_recv(r->peer_worker, m_id, r->tag);
				if(!payload) {
					m_waiting_recvs.push_back(id);
					return false;
				}
				m_recv_payloads.emplace(id, std::move(*payload));
			}
		}

		stage_request request = build_stage_request(t);
		bool staged = false;
		{
			std::lock_guard lock(m_mm_mutex);
			staged = m_memory->try_stage(request);
		}
		if(!staged) {
			m_blocked[t.resource].push_back(id);
			return false;
		}
		dispatch(t);
		return true;
	}

	stage_request build_stage_request(const task& t) {
		stage_request req;
		req.task = t.id;
		req.resource = t.resource;
		if(const auto* c = std::get_if<create_task>(&t.op)) {
			req.creates.push_back(m_chunk_info.at(c->chunk.id));
		} else if(const auto* e = std::get_if<execute_task>(&t.op)) {
			for(const auto& b : e->args) {
				if(b.kind == arg_binding::kind_t::chunk) req.uses.push_back(b.chunk);
			}
		} else if(const auto* c = std::get_if<copy_task>(&t.op)) {
			req.uses = {c->src, c->dst};
		} else if(const auto* s = std::get_if<send_task>(&t.op)) {
			req.uses = {s->chunk};
		} else if(const auto* r = std::get_if<recv_task>(&t.op)) {
			req.uses = {r->chunk};
		} else if(const auto* r = std::get_if<reduce_task>(&t.op)) {
			req.uses = r->inputs;
			req.uses.push_back(r->output);
		}
		return req;
	}

	void dispatch(const task& t) {
		m_started_ns[t.id] = ns_since(m_start);
		if(const auto* e = std::get_if<execute_task>(&t.op)) {
			device_executor::job j;
			j.id = t.id;
			j.kernel = &m_kernels->get(e->kernel);
			j.blocks = e->superblock_blocks;
			j.ctx.block_size = e->block_size;
			// threads beyond the launch grid (ragged trailing blocks) are skipped
			j.ctx.grid = rect(point::zeros(e->superblock_threads.rank()), e->superblock_threads.hi);
			j.ctx.scalars_int.resize(e->args.size());
			j.ctx.scalars_float.resize(e->args.size());
			j.ctx.views.resize(e->args.size());
			{
				std::lock_guard lock(m_mm_mutex);
				for(std::size_t i = 0; i < e->args.size(); ++i) {
					const auto& b = e->args[i];
					switch(b.kind) {
					case arg_binding::kind_t::scalar_int: j.ctx.scalars_int[i] = b.scalar_int; break;
					case arg_binding::kind_t::scalar_float: j.ctx.scalars_float[i] = b.scalar_float; break;
					case arg_binding::kind_t::chunk: j.ctx.views[i] = m_memory->view(b.chunk); break;
					case arg_binding::kind_t::none: break;
					}
				}
			}
			++m_running;
			m_executors[static_cast<std::size_t>(e->device.device)]->enqueue(std::move(j));
			return;
		}
		run_inline(t);
		finish(t.id);
	}

	void run_inline(const task& t) {
		if(std::get_if<create_task>(&t.op) != nullptr) {
			return; // staging already allocated and filled the buffer
		}
		if(const auto* d = std::get_if<delete_task>(&t.op)) {
			std::lock_guard lock(m_mm_mutex);
			m_memory->delete_buffer(d->chunk);
			return;
		}
		if(const auto* c = std::get_if<copy_task>(&t.op)) {
			assert(c->src_region == c->dst_region && "planner emits aligned copies");
			std::lock_guard lock(m_mm_mutex);
			const auto src = m_memory->view(c->src);
			const auto dst = m_memory->view(c->dst);
			copy_region(src, dst, c->dst_region);
			return;
		}
		if(const auto* s = std::get_if<send_task>(&t.op)) {
			// pack under the memory lock, send outside it: the peer's wake callback must
			// never run under this worker's locks
			std::vector<std::byte> payload;
			{
				std::lock_guard lock(m_mm_mutex);
				payload = pack_region(m_memory->view(s->chunk), s->region);
			}
			m_transport->send(m_id, s->peer_worker, s->tag, std::move(payload));
			return;
		}
		if(const auto* r = std::get_if<recv_task>(&t.op)) {
			std::lock_guard lock(m_mm_mutex);
			const auto dst = m_memory->view(r->chunk);
			unpack_region(dst, r->region, m_recv_payloads.at(t.id));
			m_recv_payloads.erase(t.id);
			return;
		}
		if(const auto* r = std::get_if<reduce_task>(&t.op)) {
			std::lock_guard lock(m_mm_mutex);
			run_reduce(*r);
			return;
		}
	}

	void run_reduce(const reduce_task& r) {
		const auto out = m_memory->view(r.output);
		const std::int64_t count = m_chunk_info.at(r.output).region.volume();
		for(std::size_t i = 0; i < r.inputs.size(); ++i) {
			const auto in = m_memory->view(r.inputs[i]);
			if(m_chunk_info.at(r.inputs[i]).region != m_chunk_info.at(r.output).region) {
				throw execution_error("reduce task combines chunks of different regions");
			}
			dispatch_dtype(out.type, [&](auto tag) {
				using T = decltype(tag);
				auto* o = reinterpret_cast<T*>(out.data);
				const auto* x = reinterpret_cast<const T*>(in.data);
				if(i == 0) {
					std::copy(x, x + count, o);
					return;
				}
				// integer sums and products wrap
				const auto add = [](T a, T b) {
					if constexpr(std::is_integral_v<T>) {
						return static_cast<T>(static_cast<std::make_unsigned_t<T>>(a) + static_cast<std::make_unsigned_t<T>>(b));
					} else {
						return a + b;
					}
				};
				const auto mul = [](T a, T b) {
					if constexpr(std::is_integral_v<T>) {
						return static_cast<T>(static_cast<std::make_unsigned_t<T>>(a) * static_cast<std::make_unsigned_t<T>>(b));
					} else {
						return a * b;
					}
				};
				for(std::int64_t e = 0; e < count; ++e) {
					switch(r.op) {
					case reduce_op::plus: o[e] = add(o[e], x[e]); break;
					case reduce_op::times: o[e] = mul(o[e], x[e]); break;
					case reduce_op::min: o[e] = std::min(o[e], x[e]); break;
					case reduce_op::max: o[e] = std::max(o[e], x[e]); break;
					}
				}
			});
		}
	}

	void finish(task_id id) {
		const auto it = m_tasks.find(id);
		assert(it != m_tasks.end());
		if(std::get_if<execute_task>(&it->second.op) != nullptr) --m_running;
		{
			std::lock_guard lock(m_mm_mutex);
			m_memory->unstage(id);
		}
		task_timing timing;
		timing.id = id;
		timing.kind = it->second.kind_name();
		timing.start_ns = m_started_ns.at(id);
		timing.end_ns = ns_since(m_start);
		m_started_ns.erase(id);
		m_done.insert(id);
		m_tasks.erase(it);
		{
			std::lock_guard lock(m_signal_mutex);
			m_timings.push_back(std::move(timing));
			m_completed += 1;
		}
		// wake dependents
		const auto [begin, end] = m_waiters.equal_range(id);
		for(auto w = begin; w != end; ++w) {
			const auto missing = m_missing_deps.find(w->second);
			assert(missing != m_missing_deps.end());
			if(--missing->second == 0) {
				m_missing_deps.erase(missing);
				m_ready.push_back(w->second);
			}
		}
		m_waiters.erase(begin, end);
		// staged budget was released: have the pump re-poll parked tasks. Never re-poll
		// from here: finish() runs inside dispatches made by retry_blocked() itself.
		m_retry_blocked = true;
	}

	void retry_blocked() {
		// FIFO per resource; dispatching may finish tasks inline, which only flags
		// m_retry_blocked and appends to m_ready
		for(auto& [resource, queue] : m_blocked) {
			std::deque<task_id> still_blocked;
			while(!queue.empty()) {
				const task_id id = queue.front();
				queue.pop_front();
				const task& t = m_tasks.at(id);
				stage_request request = build_stage_request(t);
				bool staged = false;
				{
					std::lock_guard lock(m_mm_mutex);
					staged = m_memory->try_stage(request);
				}
				if(staged) {
					dispatch(t);
				} else {
					still_blocked.push_back(id);
				}
			}
			queue = std::move(still_blocked);
		}
	}
};

} // namespace manta::detail

namespace manta {

std::uint64_t run_report::total_evictions() const {
	std::uint64_t n = 0;
	for(const auto& w : workers) {
		n += w.memory.evictions;
	}
	return n;
}

std::uint64_t run_report::total_disk_bytes() const {
	std::uint64_t n = 0;
	for(const auto& w : workers) {
		n += w.memory.bytes_host_to_disk + w.memory.bytes_disk_to_device;
	}
	return n;
}

std::uint64_t run_report::total_bytes_sent() const {
	std::uint64_t n = 0;
	for(const auto& w : workers) {
		n += w.bytes_sent;
	}
	return n;
}

std::uint64_t run_report::staging_checks() const {
	std::uint64_t n = 0;
	for(const auto& w : workers) {
		n += w.memory.staging_checks;
	}
	return n;
}

std::uint64_t run_report::staging_violations() const {
	std::uint64_t n = 0;
	for(const auto& w : workers) {
		n += w.memory.staging_violations;
	}
	return n;
}

std::string run_report::to_json() const {
	nlohmann::json j;
	j["workers"] = nlohmann::json::array();
	for(const auto& w : workers) {
		nlohmann::json wj;
		wj["worker"] = w.worker;
		wj["evictions"] = w.memory.evictions;
		wj["bytes_device_to_host"] = w.memory.bytes_device_to_host;
		wj["bytes_host_to_disk"] = w.memory.bytes_host_to_disk;
		wj["bytes_host_to_device"] = w.memory.bytes_host_to_device;
		wj["bytes_disk_to_device"] = w.memory.bytes_disk_to_device;
		wj["bytes_sent"] = w.bytes_sent;
		wj["bytes_received"] = w.bytes_received;
		wj["staging_checks"] = w.memory.staging_checks;
		wj["staging_violations"] = w.memory.staging_violations;
		wj["peak_device_bytes"] = w.memory.peak_device_bytes;
		wj["tasks"] = nlohmann::json::array();
		for(const auto& t : w.tasks) {
			wj["tasks"].push_back({{"id", t.id}, {"kind", t.kind}, {"start_ns", t.start_ns}, {"end_ns", t.end_ns}});
		}
		j["workers"].push_back(std::move(wj));
	}
	return j.dump(2);
}

system_runtime::system_runtime(const system_config& cfg, const kernel_registry& kernels) : m_cfg(cfg) {
	m_transport = std::make_unique<transport>(cfg.workers);
	for(int w = 0; w < cfg.workers; ++w) {
		m_workers.push_back(std::make_unique<detail::worker>(w, cfg, kernels, *m_transport));
	}
}

system_runtime::~system_runtime() = default;

void system_runtime::submit(const std::vector<task>& tasks) {
	std::vector<std::vector<task>> per_worker(static_cast<std::size_t>(m_cfg.workers));
	{
		std::lock_guard lock(m_mutex);
		for(const auto& t : tasks) {
			if(t.worker < 0 || t.worker >= m_cfg.workers) throw validation_error("task routed to unknown worker " + std::to_string(t.worker));
			if(const auto* c = std::get_if<create_task>(&t.op)) m_chunk_worker[c->chunk.id] = t.worker;
			per_worker[static_cast<std::size_t>(t.worker)].push_back(t);
		}
	}
	for(int w = 0; w < m_cfg.workers; ++w) {
		if(!per_worker[static_cast<std::size_t>(w)].empty()) m_workers[static_cast<std::size_t>(w)]->submit(std::move(per_worker[static_cast<std::size_t>(w)]));
	}
}

void system_runtime::synchronize() {
	using namespace std::chrono_literals;
	std::uint64_t last_completed = 0;
	auto last_progress = std::chrono::steady_clock::now();
	for(;;) {
		std::uint64_t submitted = 0, completed = 0;
		bool failed = false;
		for(const auto& w : m_workers) {
			const auto s = w->snapshot();
			submitted += s.submitted;
			completed += s.completed;
			failed |= s.has_failed;
		}
		if(failed) {
			for(const auto& w : m_workers) {
				if(auto e = w->error()) std::rethrow_exception(e);
			}
		}
		if(completed == submitted) break;
		if(completed != last_completed) {
			last_completed = completed;
			last_progress = std::chrono::steady_clock::now();
		} else if(std::chrono::steady_clock::now() - last_progress > m_cfg.progress_timeout) {
			for(const auto& w : m_workers) {
				w->debug_dump();
			}
			throw execution_error("no scheduler progress with " + std::to_string(submitted - completed)
			                      + " tasks outstanding (deadlock or unmatched send/recv)");
		}
		std::this_thread::sleep_for(200us);
	}
	if(m_transport->undelivered() != 0) {
		throw execution_error(std::to_string(m_transport->undelivered()) + " transport messages were never received (protocol violation)");
	}
}

std::vector<std::byte> system_runtime::read_chunk(chunk_id id) {
	int worker = -1;
	{
		std::lock_guard lock(m_mutex);
		const auto it = m_chunk_worker.find(id);
		if(it == m_chunk_worker.end()) throw validation_error("chunk " + std::to_string(id) + " was never created on this system");
		worker = it->second;
	}
	return m_workers[static_cast<std::size_t>(worker)]->read_chunk_bytes(id);
}

run_report system_runtime::report() {
	run_report r;
	for(const auto& w : m_workers) {
		r.workers.push_back(w->report());
	}
	return r;
}

} // namespace manta
