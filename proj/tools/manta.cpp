#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "manta/scenario.hpp"
#include "manta/task.hpp"

namespace {

constexpr int exit_pass = 0;
constexpr int exit_validation = 1;
constexpr int exit_mismatch = 2;
constexpr int exit_internal = 3;

struct run_flags {
	std::optional<int> workers;
	std::optional<int> devices;
	std::optional<std::uint64_t> device_capacity;
	std::optional<std::uint64_t> host_capacity;
	std::optional<std::uint64_t> disk_capacity;
	std::optional<std::uint64_t> throttle;
	std::optional<std::uint64_t> seed;
	bool no_conflict_deps = false;
};

manta::run_overrides to_overrides(const run_flags& flags) {
	manta::run_overrides ov;
	ov.workers = flags.workers;
	ov.devices = flags.devices;
	ov.device_capacity = flags.device_capacity;
	ov.host_capacity = flags.host_capacity;
	ov.disk_capacity = flags.disk_capacity;
	ov.staging_threshold = flags.throttle;
	ov.ready_seed = flags.seed;
	ov.suppress_conflict_deps = flags.no_conflict_deps;
	return ov;
}

void add_system_flags(CLI::App* cmd, run_flags& flags) {
	cmd->add_option("--workers", flags.workers, "Override the scenario's worker count");
	cmd->add_option("--devices", flags.devices, "Override the devices per worker");
	cmd->add_option("--device-capacity", flags.device_capacity, "Device memory capacity in bytes");
	cmd->add_option("--host-capacity", flags.host_capacity, "Host memory capacity in bytes");
	cmd->add_option("--disk-capacity", flags.disk_capacity, "Disk tier capacity in bytes");
	cmd->add_option("--throttle", flags.throttle, "Staging throttle threshold in bytes");
	cmd->add_option("--seed", flags.seed, "Randomize ready-task selection with this seed");
	cmd->add_flag("--no-conflict-deps", flags.no_conflict_deps, "Drop conflict-tracking dependencies (fault injection)")->group("");
}

int cmd_plan(const std::string& path, const std::string& dot_path, const run_flags& flags) {
	const auto sc = manta::load_scenario(path);
	const auto plan = manta::plan_scenario(sc, to_overrides(flags));
	const auto& p = plan.drv->plan();

	// per-worker task counts by kind
	for(int w = 0; w < p.workers(); ++w) {
		std::map<std::string, int> counts;
		for(const auto& t : p.per_worker[static_cast<std::size_t>(w)]) {
			counts[t.kind_name()] += 1;
		}
		std::cout << "worker " << w << ":";
		for(const auto& [kind, n] : counts) {
			std::cout << " " << kind << "=" << n;
		}
		std::cout << " total=" << p.per_worker[static_cast<std::size_t>(w)].size() << "\n";
	}
	std::cout << "tasks: " << p.task_count() << " across " << p.workers() << " workers, " << plan.launches.size() << " launches\n";

	if(!dot_path.empty()) {
		std::ofstream out(dot_path);
		if(!out) throw manta::validation_error("cannot write " + dot_path);
		out << manta::export_dot(p);
		std::cout << "wrote " << dot_path << "\n";
	}
	return exit_pass;
}

int cmd_run(const std::string& path, bool oracle, const std::string& report_path, const run_flags& flags) {
	const auto sc = manta::load_scenario(path);
	const auto result = manta::run_scenario(sc, to_overrides(flags));

	std::cout << "completed: " << result.arrays.size() << " arrays, evictions=" << result.report.total_evictions()
	          << ", bytes_sent=" << result.report.total_bytes_sent() << ", staging_checks=" << result.report.staging_checks()
	          << ", staging_violations=" << result.report.staging_violations() << "\n";

	if(!report_path.empty()) {
		std::ofstream out(report_path);
		if(!out) throw manta::validation_error("cannot write " + report_path);
		out << result.report.to_json() << "\n";
		std::cout << "wrote " << report_path << "\n";
	}

	if(!result.replicas_coherent) {
		std::cerr << "replica coherence violated: " << result.coherence_message << "\n";
		return exit_mismatch;
	}
	if(oracle) {
		manta::run_overrides oracle_ov;
		oracle_ov.oracle_mode = true;
		const auto expected = manta::run_scenario(sc, oracle_ov);
		const auto report = manta::compare_results(result, expected, 1e-6);
		std::cout << "oracle: " << report.to_string() << "\n";
		if(!report.pass) return exit_mismatch;
	}
	return exit_pass;
}

int cmd_fuzz(int cases, std::uint64_t seed, bool no_conflict_deps) {
	manta::fuzz_options options;
	options.cases = cases;
	options.seed = seed;
	options.suppress_conflict_deps = no_conflict_deps;
	const auto failure = manta::run_fuzz_campaign(options);
	if(failure) {
		std::cerr << "fuzz case " << failure->case_index << " (seed " << failure->case_seed << ") failed:\n"
		          << failure->message << "\n"
		          << "scenario:\n"
		          << failure->scenario_json << "\n";
		return exit_mismatch;
	}
	std::cout << "fuzz: " << cases << " cases passed\n";
	return exit_pass;
}

} // namespace

int main(int argc, char** argv) {
	CLI::App app{"simulated multi-device runtime with annotation-driven planning"};
	app.require_subcommand(1);

	std::string scenario_path;
	std::string dot_path;
	std::string report_path;
	bool oracle = false;
	int fuzz_cases = 200;
	std::uint64_t fuzz_seed = 1;
	run_flags flags;

	auto* plan = app.add_subcommand("plan", "Build execution plans without running them");
	plan->add_option("scenario", scenario_path, "Scenario file")->required();
	plan->add_option("--dot", dot_path, "Write the task DAG in DOT format");
	add_system_flags(plan, flags);

	auto* run = app.add_subcommand("run", "Execute a scenario on the simulated system");
	run->add_option("scenario", scenario_path, "Scenario file")->required();
	run->add_flag("--oracle", oracle, "Compare against the sequential single-device reference");
	run->add_option("--report", report_path, "Write the runtime report as JSON");
	add_system_flags(run, flags);

	auto* fuzz = app.add_subcommand("fuzz", "Random scenario campaign checked against the reference");
	fuzz->add_option("--cases", fuzz_cases, "Number of random scenarios");
	fuzz->add_option("--seed", fuzz_seed, "Campaign seed");
	fuzz->add_flag("--no-conflict-deps", flags.no_conflict_deps, "Drop conflict-tracking dependencies (fault injection)")->group("");

	CLI11_PARSE(app, argc, argv);

	try {
		if(plan->parsed()) return cmd_plan(scenario_path, dot_path, flags);
		if(run->parsed()) return cmd_run(scenario_path, oracle, report_path, flags);
		if(fuzz->parsed()) return cmd_fuzz(fuzz_cases, fuzz_seed, flags.no_conflict_deps);
	} catch(const manta::validation_error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return exit_validation;
	} catch(const manta::parse_error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return exit_validation;
	} catch(const manta::plan_error& e) {
		std::cerr << "error: " << e.what() << "\n";
		return exit_validation;
	} catch(const std::exception& e) {
		std::cerr << "internal error: " << e.what() << "\n";
		return exit_internal;
	}
	return exit_internal;
}
