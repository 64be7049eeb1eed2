#include <doctest.h>

#include <algorithm>
#include <random>

#include "manta/array_registry.hpp"

using namespace manta;

namespace {

data_distribution two_chunks() {
	data_distribution d;
	d.chunks.push_back({0, rect({0}, {8}), {0, 0}});
	d.chunks.push_back({1, rect({8}, {16}), {0, 1}});
	return d;
}

} // namespace

TEST_CASE("register_array validates rank and extent") {
	array_registry reg;
	CHECK_THROWS_AS(reg.register_array(rect::empty(1), dtype::f32, two_chunks()), validation_error);
	// 4-D domains cannot even be constructed; the rank gate sits in the geometry layer
	CHECK_THROWS_AS(point({1, 2, 3, 4}), validation_error);
}

TEST_CASE("registration exposes chunk states at version zero") {
	array_registry reg;
	const auto& handle = reg.register_array(rect({0}, {16}), dtype::i64, two_chunks());
	CHECK(handle.id == 0);
	for(const auto c : reg.chunks_of(handle.id)) {
		CHECK(reg.state(c).version == 0);
		CHECK(!reg.state(c).filled);
	}
}

TEST_CASE("double delete is rejected") {
	array_registry reg;
	const auto id = reg.register_array(rect({0}, {16}), dtype::f32, two_chunks()).id;
	reg.erase(id);
	CHECK_THROWS_AS(reg.erase(id), validation_error);
	CHECK_THROWS_AS(reg.get(id), validation_error);
}

TEST_CASE("read-after-write dependencies") {
	array_registry reg;
	reg.register_array(rect({0}, {16}), dtype::f32, two_chunks());
	reg.mark_created(0, 100, true);
	CHECK(reg.record_access(0, 101, access_effect::write) == std::vector<task_id>{100});
	CHECK(reg.record_access(0, 102, access_effect::read) == std::vector<task_id>{101});
}

TEST_CASE("a write orders after the previous writer and all readers since") {
	array_registry reg;
	reg.register_array(rect({0}, {16}), dtype::f32, two_chunks());
	reg.mark_created(0, 0, true);
	reg.record_access(0, 1, access_effect::write);
	reg.record_access(0, 2, access_effect::read);
	reg.record_access(0, 3, access_effect::read);
	const auto deps = reg.record_access(0, 4, access_effect::write);
	CHECK(deps == std::vector<task_id>{1, 2, 3});
	CHECK(reg.state(0).version == 2);
	CHECK(reg.state(0).readers_since_write.empty());
}

TEST_CASE("concurrent reads are unordered") {
	array_registry reg;
	reg.register_array(rect({0}, {16}), dtype::f32, two_chunks());
	reg.mark_created(0, 0, true);
	reg.record_access(0, 1, access_effect::read);
	const auto deps = reg.record_access(0, 2, access_effect::read);
	CHECK(deps == std::vector<task_id>{0}); // only the creating fill, not reader 1
}

TEST_CASE("reading a never-filled chunk is rejected") {
	array_registry reg;
	reg.register_array(rect({0}, {16}), dtype::f32, two_chunks());
	reg.mark_created(0, 0, false);
	CHECK_THROWS_AS(reg.record_read_checked(0, 1), plan_error);
	reg.record_access(0, 2, access_effect::write);
	CHECK(reg.record_read_checked(0, 3) == std::vector<task_id>{2});
}

TEST_CASE("versions advance only on writes and clear the reader set") {
	array_registry reg;
	reg.register_array(rect({0}, {16}), dtype::f32, two_chunks());
	reg.mark_created(0, 0, true);
	reg.record_access(0, 1, access_effect::read);
	reg.record_access(0, 2, access_effect::read);
	CHECK(reg.state(0).version == 0);
	CHECK(reg.state(0).readers_since_write.size() == 2);
	reg.record_access(0, 3, access_effect::write);
	CHECK(reg.state(0).version == 1);
	CHECK(reg.state(0).readers_since_write.empty());
	CHECK(reg.state(0).last_writer == task_id{3});
}

// Sequential-order reference: a task sequence on one chunk must be forced by the recorded
// dependency edges into an order where every read observes exactly the writes that
// preceded it at submission time.
TEST_CASE("random access sequences stay sequentially consistent under any topological order") {
	std::mt19937_64 rng(17);
	for(int round = 0; round < 100; ++round) {
		array_registry reg;
		reg.register_array(rect({0}, {16}), dtype::f32, two_chunks());
		reg.mark_created(0, 0, true);

		struct op {
			task_id id;
			bool write;
			std::vector<task_id> deps;
		};
		std::vector<op> ops;
		task_id last_write_at_submit = 0;
		std::map<task_id, task_id> expected_writer; // read -> the write it must observe
		for(task_id id = 1; id <= 20; ++id) {
			const bool write = std::uniform_int_distribution<int>(0, 2)(rng) == 0;
			if(!write) expected_writer[id] = last_write_at_submit;
			ops.push_back({id, write, reg.record_access(0, id, write ? access_effect::write : access_effect::read)});
			if(write) last_write_at_submit = id;
		}

		// simulate a random topological execution order
		std::vector<op> pending = ops;
		std::set<task_id> done{0};
		task_id last_write_executed = 0;
		std::map<task_id, task_id> observed_writer;
		while(!pending.empty()) {
			std::vector<std::size_t> ready;
			for(std::size_t i = 0; i < pending.size(); ++i) {
				if(std::all_of(pending[i].deps.begin(), pending[i].deps.end(), [&](task_id d) { return done.count(d) != 0; })) ready.push_back(i);
			}
			REQUIRE(!ready.empty()); // acyclic by construction
			const auto pick = ready[std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng)];
			const op chosen = pending[static_cast<std::size_t>(pick)];
			pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(pick));
			done.insert(chosen.id);
			if(chosen.write) {
				last_write_executed = chosen.id;
			} else {
				observed_writer[chosen.id] = last_write_executed;
			}
		}
		for(const auto& [read, writer] : expected_writer) {
			CHECK(observed_writer.at(read) == writer);
		}
	}
}
