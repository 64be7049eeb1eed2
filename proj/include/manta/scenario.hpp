#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "planner.hpp"
#include "runtime.hpp"

namespace manta {

struct distribution_spec {
	std::string kind; // row | col | tile | stencil | replicated | single | custom
	std::int64_t rows = 0;
	std::int64_t cols = 0;
	std::vector<std::int64_t> extents;
	std::vector<std::int64_t> halo;
	struct custom_chunk {
		std::vector<std::int64_t> lo;
		std::vector<std::int64_t> hi;
		int worker = 0;
		int device = 0;
		friend bool operator==(const custom_chunk&, const custom_chunk&) = default;
	};
	std::vector<custom_chunk> chunks;

	friend bool operator==(const distribution_spec&, const distribution_spec&) = default;
};

struct array_spec {
	std::string name;
	std::vector<std::int64_t> domain;
	std::string type = "f32";
	distribution_spec distribution;
	std::optional<double> fill; // 0 or 1

	friend bool operator==(const array_spec&, const array_spec&) = default;
};

struct launch_arg_spec {
	enum class kind_t { number_int, number_float, array_name };
	kind_t kind = kind_t::array_name;
	std::int64_t i = 0;
	double f = 0.0;
	std::string name;

	friend bool operator==(const launch_arg_spec&, const launch_arg_spec&) = default;
};

struct launch_spec {
	std::string kernel;
	std::vector<std::int64_t> grid;
	std::vector<std::int64_t> block;
	std::vector<std::int64_t> superblock; // threads per superblock per axis (block distribution)
	std::string annotation;
	std::vector<launch_arg_spec> args;
	int repeat = 1;
	std::vector<std::string> swap; // two array names exchanged after each repetition

	friend bool operator==(const launch_spec&, const launch_spec&) = default;
};

struct system_spec {
	int workers = 1;
	int devices = 1;
	std::uint64_t device_capacity = 256ull << 20;
	std::uint64_t host_capacity = 1ull << 30;
	std::uint64_t disk_capacity = 4ull << 30;
	std::uint64_t staging_threshold = 64ull << 20;

	friend bool operator==(const system_spec&, const system_spec&) = default;
};

struct scenario {
	system_spec system;
	std::vector<array_spec> arrays;
	std::vector<launch_spec> launches;
	std::uint64_t seed = 0;

	friend bool operator==(const scenario&, const scenario&) = default;
};

scenario scenario_from_json_text(const std::string& text);
std::string scenario_to_json_text(const scenario& sc);
scenario load_scenario(const std::string& path);
void save_scenario(const scenario& sc, const std::string& path);

struct run_overrides {
	std::optional<int> workers;
	std::optional<int> devices;
	std::optional<std::uint64_t> device_capacity;
	std::optional<std::uint64_t> host_capacity;
	std::optional<std::uint64_t> disk_capacity;
	std::optional<std::uint64_t> staging_threshold;
	std::optional<std::uint64_t> ready_seed;
	/// Replays the scenario on one worker, one device, one whole-domain chunk per array,
	/// ample memory and FIFO order: the sequential reference.
	bool oracle_mode = false;
	bool suppress_conflict_deps = false;
	bool disk_in_memory = false;
};

struct array_result {
	std::string name;
	rect domain;
	dtype type = dtype::f32;
	std::vector<std::byte> bytes; // row-major over the domain
};

struct run_result {
	std::vector<array_result> arrays;
	run_report report;
	bool replicas_coherent = true;
	std::string coherence_message;
};

/// Plans a scenario without executing it. The returned driver owns the accumulated plan.
struct scenario_plan {
	std::unique_ptr<kernel_registry> registry;
	std::unique_ptr<driver> drv;
	std::vector<launch_result> launches; // one entry per planned launch (after repeats)
};
scenario_plan plan_scenario(const scenario& sc, const run_overrides& overrides);

/// Plans and executes a scenario on the simulated system, gathers final array contents and
/// verifies that replicated chunks agree on their overlaps.
run_result run_scenario(const scenario& sc, const run_overrides& overrides);

struct array_comparison {
	std::string name;
	bool pass = true;
	double max_abs_error = 0.0;
	double max_rel_error = 0.0;
	std::int64_t first_mismatch = -1; // row-major element index
};

struct oracle_report {
	bool pass = true;
	std::vector<array_comparison> arrays;

	std::string to_string() const;
};

/// Compares two runs array by array: integer data must match bit-exactly, floating-point
/// data within `rel_tol` relative error.
oracle_report compare_results(const run_result& actual, const run_result& expected, double rel_tol = 1e-6);

struct fuzz_options {
	int cases = 200;
	std::uint64_t seed = 1;
	bool suppress_conflict_deps = false;
};

struct fuzz_failure {
	int case_index = -1;
	std::uint64_t case_seed = 0;
	std::string message;
	std::string scenario_json;
};

/// Generates random scenarios (linear annotations, distributions, capacities, scheduler
/// seeds) and checks each against the sequential reference. Returns the first failure.
std::optional<fuzz_failure> run_fuzz_campaign(const fuzz_options& options);

/// Builds a random scenario for the given case seed (exposed for reproduction).
scenario make_fuzz_scenario(std::uint64_t case_seed);

} // namespace manta
