#include <doctest.h>

#include <map>
#include <set>

#include "manta/planner.hpp"

using namespace manta;

namespace {

struct plan_fixture {
	kernel_registry registry = kernel_registry::with_builtins();
	driver drv;

	explicit plan_fixture(int workers, int devices, bool suppress = false) : drv(driver_config{workers, devices, suppress}, registry) {}
};

std::vector<const task*> tasks_in(const driver& d, launch_result r) {
	std::vector<const task*> out;
	for(const auto* t : d.plan().in_id_order()) {
		if(t->id >= r.first_task && t->id < r.past_last_task) out.push_back(t);
	}
	return out;
}

std::map<std::string, int> count_kinds(const std::vector<const task*>& tasks) {
	std::map<std::string, int> counts;
	for(const auto* t : tasks) {
		counts[t->kind_name()] += 1;
	}
	return counts;
}

bool is_topologically_ordered(const execution_plan& plan) {
	// emission order is id order per worker; every dep must point backwards
	for(const auto& worker : plan.per_worker) {
		std::set<task_id> seen;
		for(const auto& t : worker) {
			for(const auto d : t.deps) {
				if(!seen.count(d)) return false;
			}
			seen.insert(t.id);
		}
	}
	return true;
}

// classifies transfers between two registry (non-temporary) chunks: replica propagation
struct transfer_stats {
	int propagation_copies = 0;
	int propagation_send_recv_pairs = 0;
	int assembly_or_scatter = 0;
};

transfer_stats classify_transfers(const driver& d, const std::vector<const task*>& tasks) {
	transfer_stats stats;
	for(const auto* t : tasks) {
		if(const auto* c = std::get_if<copy_task>(&t->op)) {
			if(!d.is_temp_chunk(c->src) && !d.is_temp_chunk(c->dst)) {
				stats.propagation_copies += 1;
			} else {
				stats.assembly_or_scatter += 1;
			}
		} else if(const auto* s = std::get_if<send_task>(&t->op)) {
			if(!d.is_temp_chunk(s->chunk)) stats.propagation_send_recv_pairs += 1; // counted on the send side
		}
	}
	return stats;
}

} // namespace

TEST_CASE("stencil launch: local binds, halo propagation, worker-boundary send/recv") {
	// 4 superblocks / 4 chunks over 2 workers x 2 devices, halo-1 stencil distribution
	plan_fixture f(2, 2);
	const std::int64_t n = 256000;
	const auto in = f.drv.create_array(rect({0}, {n}), dtype::f32, stencil_dist(rect({0}, {n}), {64000}, {1}, f.drv.devices()), fill_spec::one()).id;
	const auto out = f.drv.create_array(rect({0}, {n}), dtype::f32, stencil_dist(rect({0}, {n}), {64000}, {1}, f.drv.devices()), fill_spec::zero()).id;

	const auto annotation = parse_annotation("global i => read input[i-1:i+1], write output[i]");
	const auto work = block_work_dist(rect({0}, {n}), {16}, {64000}, f.drv.devices());
	const auto result = f.drv.launch("stencil1d", rect({0}, {n}), {16}, work,
	    {launch_arg::scalar(std::int64_t{n}), launch_arg::array(out), launch_arg::array(in)}, annotation);

	const auto tasks = tasks_in(f.drv, result);
	const auto kinds = count_kinds(tasks);
	CHECK(kinds.at("execute") == 4);
	// reads are enclosed by the local chunk: no temporaries at all
	CHECK(kinds.count("create") == 0);
	CHECK(kinds.count("delete") == 0);

	// replica propagation: 2*(4-1) transfers, of which 2 cross the worker boundary
	const auto stats = classify_transfers(f.drv, tasks);
	CHECK(stats.propagation_copies == 4);
	CHECK(stats.propagation_send_recv_pairs == 2);
	CHECK(kinds.at("send") == 2);
	CHECK(kinds.at("recv") == 2);
	CHECK(stats.assembly_or_scatter == 0);
	CHECK(is_topologically_ordered(f.drv.plan()));
}

TEST_CASE("each stencil iteration repeats the same transfer pattern and chains on the last") {
	plan_fixture f(2, 2);
	const std::int64_t n = 256000;
	const auto dist = [&] { return stencil_dist(rect({0}, {n}), {64000}, {1}, f.drv.devices()); };
	auto in = f.drv.create_array(rect({0}, {n}), dtype::f32, dist(), fill_spec::one()).id;
	auto out = f.drv.create_array(rect({0}, {n}), dtype::f32, dist(), fill_spec::zero()).id;

	const auto annotation = parse_annotation("global i => read input[i-1:i+1], write output[i]");
	const auto work = block_work_dist(rect({0}, {n}), {16}, {64000}, f.drv.devices());
	for(int iteration = 0; iteration < 4; ++iteration) {
		const auto result = f.drv.launch("stencil1d", rect({0}, {n}), {16}, work,
		    {launch_arg::scalar(std::int64_t{n}), launch_arg::array(out), launch_arg::array(in)}, annotation);
		const auto stats = classify_transfers(f.drv, tasks_in(f.drv, result));
		CHECK(stats.propagation_copies == 4);
		CHECK(stats.propagation_send_recv_pairs == 2);
		std::swap(in, out);

		// from the second iteration on, the executes depend on the previous iteration
		if(iteration > 0) {
			bool any_cross_launch = false;
			for(const auto* t : tasks_in(f.drv, result)) {
				if(std::get_if<execute_task>(&t->op) == nullptr) continue;
				for(const auto d : t->deps) {
					any_cross_launch |= d < result.first_task;
				}
			}
			CHECK(any_cross_launch);
		}
	}
	CHECK(is_topologically_ordered(f.drv.plan()));
}

TEST_CASE("matmul with row-distributed B assembles a temporary per executing device") {
	plan_fixture f(1, 2);
	const rect dom({0, 0}, {64, 64});
	const auto devices = f.drv.devices();
	const auto a = f.drv.create_array(dom, dtype::f32, row_dist(dom, 32, devices), fill_spec::one()).id;
	const auto b = f.drv.create_array(dom, dtype::f32, row_dist(dom, 32, devices), fill_spec::one()).id;
	const auto c = f.drv.create_array(dom, dtype::f32, row_dist(dom, 32, devices), fill_spec::zero()).id;

	const auto annotation = parse_annotation("global [i, j] => write C[i,j], read A[i,:], read B[:,j]");
	const auto work = block_work_dist(rect({0, 0}, {64, 64}), {4, 4}, {32, 64}, devices);
	REQUIRE(work.superblocks.size() == 2);
	const auto result = f.drv.launch("matmul", rect({0, 0}, {64, 64}), {4, 4}, work,
	    {launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(std::int64_t{64}), launch_arg::array(c),
	        launch_arg::array(a), launch_arg::array(b)},
	    annotation);

	const auto tasks = tasks_in(f.drv, result);
	const auto kinds = count_kinds(tasks);
	CHECK(kinds.at("create") == 2); // one temporary B per device
	CHECK(kinds.at("delete") == 2);
	CHECK(kinds.at("copy") == 4); // two fragments per temporary
	CHECK(kinds.count("send") == 0);

	// every copy feeds a temporary; A and C bind directly
	for(const auto* t : tasks) {
		if(const auto* cp = std::get_if<copy_task>(&t->op)) {
			CHECK(f.drv.is_temp_chunk(cp->dst));
			CHECK(!f.drv.is_temp_chunk(cp->src));
		}
	}
}

TEST_CASE("matmul across two workers exchanges B fragments via send/recv") {
	plan_fixture f(2, 1);
	const rect dom({0, 0}, {64, 64});
	const auto devices = f.drv.devices();
	const auto a = f.drv.create_array(dom, dtype::f32, row_dist(dom, 32, devices), fill_spec::one()).id;
	const auto b = f.drv.create_array(dom, dtype::f32, row_dist(dom, 32, devices), fill_spec::one()).id;
	const auto c = f.drv.create_array(dom, dtype::f32, row_dist(dom, 32, devices), fill_spec::zero()).id;

	const auto annotation = parse_annotation("global [i, j] => write C[i,j], read A[i,:], read B[:,j]");
	const auto work = block_work_dist(rect({0, 0}, {64, 64}), {4, 4}, {32, 64}, devices);
	const auto result = f.drv.launch("matmul", rect({0, 0}, {64, 64}), {4, 4}, work,
	    {launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(std::int64_t{64}), launch_arg::array(c),
	        launch_arg::array(a), launch_arg::array(b)},
	    annotation);

	const auto kinds = count_kinds(tasks_in(f.drv, result));
	CHECK(kinds.at("send") == 2); // each worker ships its B half to the other
	CHECK(kinds.at("recv") == 2);
	CHECK(kinds.at("copy") == 2); // the local half of each temporary

	// send/recv pairs carry matching tags and mirrored peers
	std::map<std::uint64_t, int> send_tags, recv_tags;
	for(const auto* t : tasks_in(f.drv, result)) {
		if(const auto* s = std::get_if<send_task>(&t->op)) send_tags[s->tag] += 1;
		if(const auto* r = std::get_if<recv_task>(&t->op)) recv_tags[r->tag] += 1;
	}
	CHECK(send_tags == recv_tags);
}

TEST_CASE("replicated vectors serve whole-vector reads without any transfer") {
	plan_fixture f(2, 2);
	const std::int64_t rows = 64;
	const rect vec_dom({0}, {rows});
	const rect mat_dom({0, 0}, {rows, 8});
	const auto devices = f.drv.devices();
	const auto y = f.drv.create_array(vec_dom, dtype::f32, replicated_dist(vec_dom, devices), fill_spec::zero()).id;
	const auto vals = f.drv.create_array(mat_dom, dtype::f32, row_dist(mat_dom, 16, devices), fill_spec::one()).id;
	const auto cols = f.drv.create_array(mat_dom, dtype::i64, row_dist(mat_dom, 16, devices), fill_spec::zero()).id;
	const auto x = f.drv.create_array(vec_dom, dtype::f32, replicated_dist(vec_dom, devices), fill_spec::one()).id;

	const auto annotation = parse_annotation("global i => write y[i], read vals[i,:], read cols[i,:], read x[:]");
	const auto work = block_work_dist(rect({0}, {rows}), {4}, {16}, devices);
	const auto result = f.drv.launch("spmv_ell", rect({0}, {rows}), {4}, work,
	    {launch_arg::scalar(rows), launch_arg::scalar(std::int64_t{8}), launch_arg::array(y), launch_arg::array(vals), launch_arg::array(cols),
	        launch_arg::array(x)},
	    annotation);

	// x reads resolve to each device's own replica: no temporaries for x. y's writes
	// propagate to the three other replicas of each written region.
	const auto tasks = tasks_in(f.drv, result);
	CHECK(count_kinds(tasks).count("create") == 0);
	for(const auto* t : tasks) {
		if(const auto* cp = std::get_if<copy_task>(&t->op)) {
			CHECK(!f.drv.is_temp_chunk(cp->src)); // only propagation, never assembly
		}
	}
}

TEST_CASE("column-sum reduction builds the partial/combine/write-back hierarchy") {
	plan_fixture f(1, 2);
	const rect mat({0, 0}, {8, 8});
	const rect vec({0}, {8});
	const auto devices = f.drv.devices();
	// column chunks aligned with the column-split superblocks: reads bind locally
	const auto a = f.drv.create_array(mat, dtype::f32, col_dist(mat, 4, devices), fill_spec::one()).id;
	const auto sum = f.drv.create_array(vec, dtype::f32, single_dist(vec, devices[0]), fill_spec::zero()).id;

	const auto annotation = parse_annotation("global [i, j] => read A[i,j], reduce(+) sums[i]");
	const auto work = block_work_dist(rect({0, 0}, {8, 8}), {2, 2}, {8, 4}, devices); // split columns
	REQUIRE(work.superblocks.size() == 2);
	const auto result = f.drv.launch("row_reduce", rect({0, 0}, {8, 8}), {2, 2}, work,
	    {launch_arg::scalar(std::int64_t{8}), launch_arg::scalar(std::int64_t{8}), launch_arg::array(a), launch_arg::array(sum)}, annotation);

	const auto tasks = tasks_in(f.drv, result);
	const auto kinds = count_kinds(tasks);
	// 2 identity-filled partials + 1 worker-level output + 1 final output
	CHECK(kinds.at("create") == 4);
	CHECK(kinds.at("reduce") == 2); // worker-level combine + final combine
	CHECK(kinds.at("delete") == 4);
	CHECK(kinds.at("copy") == 1); // write-back into the single destination chunk
	CHECK(is_topologically_ordered(f.drv.plan()));
}

TEST_CASE("single-superblock reduction degenerates to one partial and one final reduce") {
	plan_fixture f(1, 1);
	const rect mat({0, 0}, {8, 8});
	const rect vec({0}, {8});
	const auto devices = f.drv.devices();
	const auto a = f.drv.create_array(mat, dtype::f32, single_dist(mat, devices[0]), fill_spec::one()).id;
	const auto sum = f.drv.create_array(vec, dtype::f32, single_dist(vec, devices[0]), fill_spec::zero()).id;

	const auto annotation = parse_annotation("global [i, j] => read A[i,j], reduce(+) sums[i]");
	const auto work = block_work_dist(rect({0, 0}, {8, 8}), {2, 2}, {8, 8}, devices);
	const auto result = f.drv.launch("row_reduce", rect({0, 0}, {8, 8}), {2, 2}, work,
	    {launch_arg::scalar(std::int64_t{8}), launch_arg::scalar(std::int64_t{8}), launch_arg::array(a), launch_arg::array(sum)}, annotation);

	const auto kinds = count_kinds(tasks_in(f.drv, result));
	CHECK(kinds.at("reduce") == 1);
	CHECK(kinds.at("create") == 2); // the partial and the final buffer
}

TEST_CASE("temporary chunks are created before first use and deleted after the last") {
	plan_fixture f(2, 2);
	const rect dom({0, 0}, {64, 64});
	const auto devices = f.drv.devices();
	const auto a = f.drv.create_array(dom, dtype::f32, row_dist(dom, 16, devices), fill_spec::one()).id;
	const auto b = f.drv.create_array(dom, dtype::f32, row_dist(dom, 16, devices), fill_spec::one()).id;
	const auto c = f.drv.create_array(dom, dtype::f32, row_dist(dom, 16, devices), fill_spec::zero()).id;

	const auto annotation = parse_annotation("global [i, j] => write C[i,j], read A[i,:], read B[:,j]");
	const auto work = block_work_dist(rect({0, 0}, {64, 64}), {4, 4}, {16, 64}, devices);
	f.drv.launch("matmul", rect({0, 0}, {64, 64}), {4, 4}, work,
	    {launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(std::int64_t{64}), launch_arg::array(c),
	        launch_arg::array(a), launch_arg::array(b)},
	    annotation);

	// per temporary chunk: exactly one create, one delete; creates precede every use and
	// deletes follow every use on the id axis (emission order is topological)
	std::map<chunk_id, std::vector<task_id>> touches;
	std::map<chunk_id, task_id> created, deleted;
	for(const auto* t : f.drv.plan().in_id_order()) {
		const auto touch = [&](chunk_id id) {
			if(f.drv.is_temp_chunk(id)) touches[id].push_back(t->id);
		};
		if(const auto* cr = std::get_if<create_task>(&t->op)) {
			if(f.drv.is_temp_chunk(cr->chunk.id)) {
				CHECK(!created.count(cr->chunk.id));
				created[cr->chunk.id] = t->id;
			}
		} else if(const auto* de = std::get_if<delete_task>(&t->op)) {
			if(f.drv.is_temp_chunk(de->chunk)) {
				CHECK(!deleted.count(de->chunk));
				deleted[de->chunk] = t->id;
			}
		} else if(const auto* e = std::get_if<execute_task>(&t->op)) {
			for(const auto& arg : e->args) {
				if(arg.kind == arg_binding::kind_t::chunk) touch(arg.chunk);
			}
		} else if(const auto* cp = std::get_if<copy_task>(&t->op)) {
			touch(cp->src);
			touch(cp->dst);
		} else if(const auto* s = std::get_if<send_task>(&t->op)) {
			touch(s->chunk);
		} else if(const auto* r = std::get_if<recv_task>(&t->op)) {
			touch(r->chunk);
		}
	}
	CHECK(!created.empty());
	CHECK(created.size() == deleted.size());
	for(const auto& [id, uses] : touches) {
		for(const auto use : uses) {
			CHECK(created.at(id) < use);
			CHECK(deleted.at(id) > use);
		}
	}
}

TEST_CASE("plan construction is deterministic") {
	const auto build = [] {
		plan_fixture f(2, 2);
		const std::int64_t n = 128000;
		auto in = f.drv.create_array(rect({0}, {n}), dtype::f32, stencil_dist(rect({0}, {n}), {32000}, {1}, f.drv.devices()), fill_spec::one()).id;
		auto out = f.drv.create_array(rect({0}, {n}), dtype::f32, stencil_dist(rect({0}, {n}), {32000}, {1}, f.drv.devices()), fill_spec::zero()).id;
		const auto annotation = parse_annotation("global i => read input[i-1:i+1], write output[i]");
		const auto work = block_work_dist(rect({0}, {n}), {16}, {32000}, f.drv.devices());
		for(int it = 0; it < 3; ++it) {
			f.drv.launch("stencil1d", rect({0}, {n}), {16}, work, {launch_arg::scalar(n), launch_arg::array(out), launch_arg::array(in)}, annotation);
			std::swap(in, out);
		}
		return export_dot(f.drv.plan());
	};
	CHECK(build() == build());
}

TEST_CASE("launch validation errors") {
	plan_fixture f(1, 1);
	const auto devices = f.drv.devices();
	const auto a = f.drv.create_array(rect({0}, {64}), dtype::f64, single_dist(rect({0}, {64}), devices[0]), fill_spec::none()).id;
	const auto b = f.drv.create_array(rect({0}, {64}), dtype::f64, single_dist(rect({0}, {64}), devices[0]), fill_spec::one()).id;
	const auto work = block_work_dist(rect({0}, {64}), {4}, {64}, devices);

	SUBCASE("unknown kernel") {
		CHECK_THROWS_AS(f.drv.launch("nope", rect({0}, {64}), {4}, work, {}, parse_annotation("global i =>")), plan_error);
	}
	SUBCASE("reading an unfilled array is rejected") {
		const auto annotation = parse_annotation("global i => read x[i], write y[i]");
		CHECK_THROWS_AS(f.drv.launch("axpy", rect({0}, {64}), {4}, work,
		                    {launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(2.0), launch_arg::scalar(0.0), launch_arg::array(b),
		                        launch_arg::array(a)},
		                    annotation),
		    plan_error);
	}
	SUBCASE("overlapping writes between superblocks are rejected") {
		const auto work4 = block_work_dist(rect({0}, {64}), {4}, {16}, devices);
		const auto annotation = parse_annotation("global i => read x[i], write y[0:9]");
		CHECK_THROWS_AS(f.drv.launch("axpy", rect({0}, {64}), {4}, work4,
		                    {launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(2.0), launch_arg::scalar(0.0), launch_arg::array(a),
		                        launch_arg::array(b)},
		                    annotation),
		    plan_error);
	}
	SUBCASE("launching against a deleted array is rejected") {
		f.drv.delete_array(a);
		const auto annotation = parse_annotation("global i => read x[i], write y[i]");
		CHECK_THROWS_AS(f.drv.launch("axpy", rect({0}, {64}), {4}, work,
		                    {launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(2.0), launch_arg::scalar(0.0), launch_arg::array(a),
		                        launch_arg::array(b)},
		                    annotation),
		    validation_error);
	}
}

TEST_CASE("deleting an array orders the delete after its last users") {
	plan_fixture f(1, 1);
	const auto devices = f.drv.devices();
	const auto x = f.drv.create_array(rect({0}, {64}), dtype::f64, single_dist(rect({0}, {64}), devices[0]), fill_spec::one()).id;
	const auto y = f.drv.create_array(rect({0}, {64}), dtype::f64, single_dist(rect({0}, {64}), devices[0]), fill_spec::zero()).id;

	SUBCASE("unused array: delete depends only on its create") {
		const auto create_id = f.drv.plan().per_worker[0][0].id;
		f.drv.delete_array(x);
		const auto& del = f.drv.plan().per_worker[0].back();
		CHECK(std::get_if<delete_task>(&del.op) != nullptr);
		CHECK(del.deps == std::vector<task_id>{create_id});
	}

	SUBCASE("after a launch: delete depends on the execute") {
		const auto annotation = parse_annotation("global i => read x[i], write y[i]");
		const auto work = block_work_dist(rect({0}, {64}), {4}, {64}, devices);
		const auto result = f.drv.launch("axpy", rect({0}, {64}), {4}, work,
		    {launch_arg::scalar(std::int64_t{64}), launch_arg::scalar(2.0), launch_arg::scalar(0.0), launch_arg::array(y), launch_arg::array(x)},
		    annotation);
		f.drv.delete_array(x);
		const auto& del = f.drv.plan().per_worker[0].back();
		bool depends_on_execute = false;
		for(const auto d : del.deps) {
			depends_on_execute |= d >= result.first_task && d < result.past_last_task;
		}
		CHECK(depends_on_execute);
		CHECK_THROWS_AS(f.drv.delete_array(x), validation_error);
	}
}

TEST_CASE("dot export") {
	SUBCASE("empty plan") {
		const auto dot = export_dot(execution_plan(2));
		CHECK(dot.find("digraph") != std::string::npos);
		CHECK(dot.find("t0") == std::string::npos);
	}
	SUBCASE("an execute with a create dependency renders two nodes and one edge") {
		plan_fixture f(1, 1);
		const auto devices = f.drv.devices();
		const auto x = f.drv.create_array(rect({0}, {16}), dtype::f32, single_dist(rect({0}, {16}), devices[0]), fill_spec::one()).id;
		const auto annotation = parse_annotation("global i => write out[i]");
		const auto work = block_work_dist(rect({0}, {16}), {4}, {16}, devices);
		f.drv.launch("fill", rect({0}, {16}), {4}, work, {launch_arg::scalar(std::int64_t{16}), launch_arg::scalar(7.0), launch_arg::array(x)}, annotation);
		const auto dot = export_dot(f.drv.plan());
		CHECK(dot.find("t0 [label=\"t0 Create") != std::string::npos);
		CHECK(dot.find("t1 [label=\"t1 Execute") != std::string::npos);
		CHECK(dot.find("t0 -> t1;") != std::string::npos);
	}
	SUBCASE("stencil plan counts match the hand-derived structure") {
		plan_fixture f(2, 2);
		const std::int64_t n = 256000;
		auto in = f.drv.create_array(rect({0}, {n}), dtype::f32, stencil_dist(rect({0}, {n}), {64000}, {1}, f.drv.devices()), fill_spec::one()).id;
		auto out = f.drv.create_array(rect({0}, {n}), dtype::f32, stencil_dist(rect({0}, {n}), {64000}, {1}, f.drv.devices()), fill_spec::zero()).id;
		const auto annotation = parse_annotation("global i => read input[i-1:i+1], write output[i]");
		const auto work = block_work_dist(rect({0}, {n}), {16}, {64000}, f.drv.devices());
		for(int it = 0; it < 4; ++it) {
			f.drv.launch("stencil1d", rect({0}, {n}), {16}, work, {launch_arg::scalar(n), launch_arg::array(out), launch_arg::array(in)}, annotation);
			std::swap(in, out);
		}
		const auto dot = export_dot(f.drv.plan());
		// nodes: 8 creates + 4 iterations x (4 executes + 4 copies + 2 sends + 2 recvs)
		std::size_t nodes = 0;
		for(std::size_t pos = dot.find("[label="); pos != std::string::npos; pos = dot.find("[label=", pos + 1)) {
			++nodes;
		}
		CHECK(nodes == 8 + 4 * 12);
		// dashed send->recv pairing edges: 2 per iteration
		std::size_t dashed = 0;
		for(std::size_t pos = dot.find("style=dashed"); pos != std::string::npos; pos = dot.find("style=dashed", pos + 1)) {
			++dashed;
		}
		CHECK(dashed == 8);
	}
}

TEST_CASE("suppressing conflict dependencies keeps only structural edges") {
	plan_fixture normal(1, 1);
	plan_fixture mutated(1, 1, true);
	for(auto* f : {&normal, &mutated}) {
		const auto devices = f->drv.devices();
		auto x = f->drv.create_array(rect({0}, {64}), dtype::f32, single_dist(rect({0}, {64}), devices[0]), fill_spec::one()).id;
		auto y = f->drv.create_array(rect({0}, {64}), dtype::f32, single_dist(rect({0}, {64}), devices[0]), fill_spec::zero()).id;
		const auto annotation = parse_annotation("global i => read input[i-1:i+1], write output[i]");
		const auto work = block_work_dist(rect({0}, {64}), {4}, {64}, devices);
		for(int it = 0; it < 2; ++it) {
			f->drv.launch("stencil1d", rect({0}, {64}), {4}, work, {launch_arg::scalar(std::int64_t{64}), launch_arg::array(y), launch_arg::array(x)},
			    annotation);
			std::swap(x, y);
		}
	}
	std::size_t normal_edges = 0, mutated_edges = 0;
	for(const auto* t : normal.drv.plan().in_id_order()) {
		normal_edges += t->deps.size();
	}
	for(const auto* t : mutated.drv.plan().in_id_order()) {
		mutated_edges += t->deps.size();
	}
	CHECK(mutated_edges < normal_edges);
}
