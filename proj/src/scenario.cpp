#include "manta/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

namespace manta {

using nlohmann::json;

// --- json -----------------------------------------------------------------------------------

namespace {

	std::vector<std::int64_t> int_list(const json& j) { return j.get<std::vector<std::int64_t>>(); }

	distribution_spec distribution_from_json(const json& j) {
		distribution_spec d;
		d.kind = j.at("kind").get<std::string>();
		if(d.kind == "row") {
			d.rows = j.at("rows").get<std::int64_t>();
		} else if(d.kind == "col") {
			d.cols = j.at("cols").get<std::int64_t>();
		} else if(d.kind == "tile") {
			d.extents = int_list(j.at("extents"));
		} else if(d.kind == "stencil") {
			d.extents = int_list(j.at("extents"));
			d.halo = int_list(j.at("halo"));
		} else if(d.kind == "replicated" || d.kind == "single") {
			// no parameters
		} else if(d.kind == "custom") {
			for(const auto& c : j.at("chunks")) {
				distribution_spec::custom_chunk chunk;
				chunk.lo = int_list(c.at("lo"));
				chunk.hi = int_list(c.at("hi"));
				chunk.worker = c.at("worker").get<int>();
				chunk.device = c.at("device").get<int>();
				d.chunks.push_back(std::move(chunk));
			}
		} else {
			throw validation_error("unknown distribution kind \"" + d.kind + "\"");
		}
		return d;
	}

	json distribution_to_json(const distribution_spec& d) {
		json j;
		j["kind"] = d.kind;
		if(d.kind == "row") j["rows"] = d.rows;
		if(d.kind == "col") j["cols"] = d.cols;
		if(d.kind == "tile" || d.kind == "stencil") j["extents"] = d.extents;
		if(d.kind == "stencil") j["halo"] = d.halo;
		if(d.kind == "custom") {
			j["chunks"] = json::array();
			for(const auto& c : d.chunks) {
				j["chunks"].push_back({{"lo", c.lo}, {"hi", c.hi}, {"worker", c.worker}, {"device", c.device}});
			}
		}
		return j;
	}

} // namespace

scenario scenario_from_json_text(const std::string& text) {
	json j;
	try {
		j = json::parse(text);
	} catch(const json::exception& e) {
		throw validation_error(std::string("scenario is not valid JSON: ") + e.what());
	}
	try {
		scenario sc;
		if(j.count("system")) {
			const auto& s = j.at("system");
			sc.system.workers = s.value("workers", 1);
			sc.system.devices = s.value("devices", 1);
			sc.system.device_capacity = s.value("device_capacity", sc.system.device_capacity);
			sc.system.host_capacity = s.value("host_capacity", sc.system.host_capacity);
			sc.system.disk_capacity = s.value("disk_capacity", sc.system.disk_capacity);
			sc.system.staging_threshold = s.value("staging_threshold", sc.system.staging_threshold);
		}
		for(const auto& a : j.value("arrays", json::array())) {
			array_spec spec;
			spec.name = a.at("name").get<std::string>();
			spec.domain = int_list(a.at("domain"));
			spec.type = a.value("type", "f32");
			spec.distribution = distribution_from_json(a.at("distribution"));
			if(a.count("fill") && !a.at("fill").is_null()) spec.fill = a.at("fill").get<double>();
			sc.arrays.push_back(std::move(spec));
		}
		for(const auto& l : j.value("launches", json::array())) {
			launch_spec spec;
			spec.kernel = l.at("kernel").get<std::string>();
			spec.grid = int_list(l.at("grid"));
			spec.block = int_list(l.at("block"));
			spec.superblock = int_list(l.at("superblock"));
			spec.annotation = l.at("annotation").get<std::string>();
			for(const auto& arg : l.value("args", json::array())) {
				launch_arg_spec as;
				if(arg.is_string()) {
					as.kind = launch_arg_spec::kind_t::array_name;
					as.name = arg.get<std::string>();
				} else if(arg.is_number_integer()) {
					as.kind = launch_arg_spec::kind_t::number_int;
					as.i = arg.get<std::int64_t>();
				} else if(arg.is_number_float()) {
					as.kind = launch_arg_spec::kind_t::number_float;
					as.f = arg.get<double>();
				} else {
					throw validation_error("launch arguments must be numbers or array names");
				}
				spec.args.push_back(std::move(as));
			}
			spec.repeat = l.value("repeat", 1);
			if(l.count("swap")) spec.swap = l.at("swap").get<std::vector<std::string>>();
			if(!spec.swap.empty() && spec.swap.size() != 2) throw validation_error("swap takes exactly two array names");
			sc.launches.push_back(std::move(spec));
		}
		sc.seed = j.value("seed", std::uint64_t{0});
		return sc;
	} catch(const json::exception& e) {
		throw validation_error(std::string("malformed scenario: ") + e.what());
	}
}

std::string scenario_to_json_text(const scenario& sc) {
	json j;
	j["system"] = {{"workers", sc.system.workers}, {"devices", sc.system.devices}, {"device_capacity", sc.system.device_capacity},
	    {"host_capacity", sc.system.host_capacity}, {"disk_capacity", sc.system.disk_capacity}, {"staging_threshold", sc.system.staging_threshold}};
	j["arrays"] = json::array();
	for(const auto& a : sc.arrays) {
		json aj;
		aj["name"] = a.name;
		aj["domain"] = a.domain;
		aj["type"] = a.type;
		aj["distribution"] = distribution_to_json(a.distribution);
		if(a.fill) aj["fill"] = *a.fill;
		j["arrays"].push_back(std::move(aj));
	}
	j["launches"] = json::array();
	for(const auto& l : sc.launches) {
		json lj;
		lj["kernel"] = l.kernel;
		lj["grid"] = l.grid;
		lj["block"] = l.block;
		lj["superblock"] = l.superblock;
		lj["annotation"] = l.annotation;
		lj["args"] = json::array();
		for(const auto& a : l.args) {
			switch(a.kind) {
			case launch_arg_spec::kind_t::number_int: lj["args"].push_back(a.i); break;
			case launch_arg_spec::kind_t::number_float: lj["args"].push_back(a.f); break;
			case launch_arg_spec::kind_t::array_name: lj["args"].push_back(a.name); break;
			}
		}
		lj["repeat"] = l.repeat;
		if(!l.swap.empty()) lj["swap"] = l.swap;
		j["launches"].push_back(std::move(lj));
	}
	j["seed"] = sc.seed;
	return j.dump(2);
}

scenario load_scenario(const std::string& path) {
	std::ifstream in(path);
	if(!in) throw validation_error("cannot open scenario file " + path);
	std::stringstream buffer;
	buffer << in.rdbuf();
	return scenario_from_json_text(buffer.str());
}

void save_scenario(const scenario& sc, const std::string& path) {
	std::ofstream out(path);
	if(!out) throw validation_error("cannot write scenario file " + path);
	out << scenario_to_json_text(sc) << "\n";
}

// --- resolution -----------------------------------------------------------------------------

namespace {

	point point_from(const std::vector<std::int64_t>& v) {
		if(v.empty() || v.size() > max_rank) throw validation_error("expected between 1 and 3 extents");
		point p = point::zeros(static_cast<int>(v.size()));
		for(std::size_t k = 0; k < v.size(); ++k) {
			p[static_cast<int>(k)] = v[k];
		}
		return p;
	}

	fill_spec fill_from(const std::optional<double>& fill) {
		if(!fill) return fill_spec::none();
		if(*fill == 0.0) return fill_spec::zero();
		if(*fill == 1.0) return fill_spec::one();
		throw validation_error("fill must be 0 or 1");
	}

	data_distribution make_distribution(const distribution_spec& spec, const rect& domain, const std::vector<device_id>& devices) {
		if(spec.kind == "row") return row_dist(domain, spec.rows, devices);
		if(spec.kind == "col") return col_dist(domain, spec.cols, devices);
		if(spec.kind == "tile") return tile_dist(domain, point_from(spec.extents), devices);
		if(spec.kind == "stencil") return stencil_dist(domain, point_from(spec.extents), point_from(spec.halo), devices);
		if(spec.kind == "replicated") return replicated_dist(domain, devices);
		if(spec.kind == "single") return single_dist(domain, devices.front());
		if(spec.kind == "custom") {
			data_distribution dist;
			chunk_id next = 0;
			for(const auto& c : spec.chunks) {
				dist.chunks.push_back({next++, rect(point_from(c.lo), point_from(c.hi)), device_id{c.worker, c.device}});
			}
			dist.validate(domain);
			return dist;
		}
		throw validation_error("unknown distribution kind \"" + spec.kind + "\"");
	}

	struct resolved_config {
		driver_config drv;
		system_config sys;
	};

	resolved_config resolve_config(const system_spec& spec, const run_overrides& ov) {
		resolved_config rc;
		rc.drv.workers = ov.workers.value_or(spec.workers);
		rc.drv.devices_per_worker = ov.devices.value_or(spec.devices);
		rc.drv.suppress_conflict_deps = ov.suppress_conflict_deps;
		rc.sys.workers = rc.drv.workers;
		rc.sys.devices_per_worker = rc.drv.devices_per_worker;
		rc.sys.memory.device_capacity = ov.device_capacity.value_or(spec.device_capacity);
		rc.sys.memory.host_capacity = ov.host_capacity.value_or(spec.host_capacity);
		rc.sys.memory.disk_capacity = ov.disk_capacity.value_or(spec.disk_capacity);
		rc.sys.memory.staging_threshold = ov.staging_threshold.value_or(spec.staging_threshold);
		rc.sys.memory.disk_in_memory = ov.disk_in_memory;
		rc.sys.ready_seed = ov.ready_seed;
		if(ov.oracle_mode) {
			rc.drv.workers = 1;
			rc.drv.devices_per_worker = 1;
			rc.drv.suppress_conflict_deps = false;
			rc.sys.workers = 1;
			rc.sys.devices_per_worker = 1;
			rc.sys.memory.device_capacity = 1ull << 40;
			rc.sys.memory.host_capacity = 1ull << 40;
			rc.sys.memory.disk_capacity = 1ull << 40;
			rc.sys.memory.staging_threshold = 1ull << 40;
			rc.sys.ready_seed.reset();
		}
		return rc;
	}

	std::uint64_t mix64(std::uint64_t h) {
		h ^= h >> 33;
		h *= 0xff51afd7ed558ccdULL;
		h ^= h >> 33;
		h *= 0xc4ceb9fe1a85ec53ULL;
		h ^= h >> 33;
		return h;
	}

	std::uint64_t hash_point(const point& g) {
		std::uint64_t h = 0x243f6a8885a308d3ULL;
		for(int k = 0; k < g.rank; ++k) {
			h = mix64(h ^ (static_cast<std::uint64_t>(g[k]) * 0x100000001b3ULL + static_cast<std::uint64_t>(k)));
		}
		return h;
	}

	/// A data-driven kernel whose accesses follow its annotation exactly: every thread
	/// gathers (wrapping sum) the elements of its declared read regions, then writes or
	/// reduce-combines the digest into its declared output locations. Gives fuzz cases a
	/// kernel body for any generated annotation.
	kernel_def make_gather_kernel(const std::string& id, const access_annotation& annotation, const std::vector<dtype>& types,
	    const std::vector<rect>& domains) {
		kernel_def def;
		def.id = id;
		for(std::size_t i = 0; i < annotation.accesses.size(); ++i) {
			const auto& acc = annotation.accesses[i];
			const bool writable = acc.mode.is_write() || acc.mode.is_reduce();
			def.params.push_back(param_spec::array(acc.argument, types[i], domains[i].rank(), writable));
		}
		def.body = [annotation, domains](const kernel_context& ctx) {
			ctx.for_each_thread([&](const point& g) {
				std::map<std::string, interval> env;
				for(const auto& b : annotation.bindings) {
					for(std::size_t v = 0; v < b.variables.size(); ++v) {
						const int axis = static_cast<int>(v);
						std::int64_t value = 0;
						switch(b.space) {
						case binding_space::global: value = g[axis]; break;
						case binding_space::block: value = g[axis] / ctx.block_size[axis]; break;
						case binding_space::local: value = g[axis] % ctx.block_size[axis]; break;
						}
						env.emplace(b.variables[v], interval{value, value});
					}
				}
				const auto thread_region = [&](const access& acc, const rect& domain) {
					point lo = point::zeros(domain.rank());
					point hi = point::zeros(domain.rank());
					for(int axis = 0; axis < domain.rank(); ++axis) {
						const auto& ix = acc.indices[static_cast<std::size_t>(axis)];
						std::int64_t a = 0, b = 0;
						if(ix.kind == index_spec::kind_t::single) {
							a = b = ix.single->evaluate(env).lo;
						} else {
							a = ix.slice_lower ? ix.slice_lower->evaluate(env).lo : domain.lo[axis];
							b = ix.slice_upper ? ix.slice_upper->evaluate(env).lo : domain.hi[axis] - 1;
						}
						if(a > b) return rect::empty(domain.rank());
						lo[axis] = a;
						hi[axis] = b + 1;
					}
					return clip(rect(lo, hi), domain);
				};

				std::uint64_t val = hash_point(g);
				for(std::size_t i = 0; i < annotation.accesses.size(); ++i) {
					const auto& acc = annotation.accesses[i];
					if(!acc.mode.is_read()) continue;
					const auto& view = ctx.view(i);
					for_each_row(thread_region(acc, domains[i]), [&](const point& row, std::int64_t len) {
						point p = row;
						for(std::int64_t e = 0; e < len; ++e) {
							p[row.rank - 1] = row[row.rank - 1] + e;
							val += static_cast<std::uint64_t>(view.load_int(p));
						}
					});
				}
				for(std::size_t i = 0; i < annotation.accesses.size(); ++i) {
					const auto& acc = annotation.accesses[i];
					if(!acc.mode.is_write() && !acc.mode.is_reduce()) continue;
					const auto& view = ctx.view(i);
					const auto out = static_cast<std::int64_t>(val);
					for_each_row(thread_region(acc, domains[i]), [&](const point& row, std::int64_t len) {
						point p = row;
						for(std::int64_t e = 0; e < len; ++e) {
							p[row.rank - 1] = row[row.rank - 1] + e;
							if(!acc.mode.is_reduce()) {
								view.store_int(p, out);
								continue;
							}
							const std::int64_t cur = view.load_int(p);
							std::int64_t combined = cur;
							switch(acc.mode.op) {
							case reduce_op::plus:
								combined = static_cast<std::int64_t>(static_cast<std::uint64_t>(cur) + static_cast<std::uint64_t>(out));
								break;
							case reduce_op::times:
								combined = static_cast<std::int64_t>(static_cast<std::uint64_t>(cur) * static_cast<std::uint64_t>(out));
								break;
							case reduce_op::min: combined = std::min(cur, out); break;
							case reduce_op::max: combined = std::max(cur, out); break;
							}
							view.store_int(p, combined);
						}
					});
				}
			});
		};
		return def;
	}

	/// Synthesizes and registers every gather launch's kernel. Must happen before worker
	/// threads exist: the registry is immutable while the runtime is live.
	void register_gather_kernels(const scenario& sc, kernel_registry& registry) {
		std::map<std::string, std::pair<dtype, rect>> arrays;
		for(const auto& a : sc.arrays) {
			arrays.emplace(a.name, std::make_pair(dtype_from_name(a.type), rect::from_extents(point_from(a.domain))));
		}
		int launch_index = 0;
		for(const auto& l : sc.launches) {
			if(l.kernel == "gather") {
				const auto annotation = parse_annotation(l.annotation);
				std::vector<dtype> types;
				std::vector<rect> domains;
				for(const auto& acc : annotation.accesses) {
					const auto it = arrays.find(acc.argument);
					if(it == arrays.end()) throw validation_error("gather annotation names unknown array \"" + acc.argument + "\"");
					types.push_back(it->second.first);
					domains.push_back(it->second.second);
				}
				registry.register_kernel(make_gather_kernel("gather@" + std::to_string(launch_index), annotation, types, domains));
			}
			++launch_index;
		}
	}

	/// Runs the scenario's operation sequence against a driver, invoking `on_pending` after
	/// every operation (so runners can overlap planning with execution).
	template <typename OnPending>
	std::vector<launch_result> apply_scenario(const scenario& sc, const run_overrides& ov, kernel_registry& registry, driver& drv, OnPending&& on_pending) {
		std::map<std::string, array_id> arrays_by_name;
		for(const auto& a : sc.arrays) {
			const rect domain = rect::from_extents(point_from(a.domain));
			const data_distribution dist = ov.oracle_mode ? single_dist(domain, drv.devices().front()) : make_distribution(a.distribution, domain, drv.devices());
			const auto& handle = drv.create_array(domain, dtype_from_name(a.type), dist, fill_from(a.fill));
			if(!arrays_by_name.emplace(a.name, handle.id).second) throw validation_error("duplicate array name \"" + a.name + "\"");
			on_pending();
		}

		std::vector<launch_result> launches;
		int launch_index = 0;
		for(const auto& l : sc.launches) {
			const access_annotation annotation = parse_annotation(l.annotation);
			const std::string kernel_id = l.kernel == "gather" ? "gather@" + std::to_string(launch_index) : l.kernel;
			const kernel_def& def = registry.get(kernel_id);

			if(l.repeat < 1) throw validation_error("repeat must be at least 1");
			for(int rep = 0; rep < l.repeat; ++rep) {
				const rect grid = rect::from_extents(point_from(l.grid));
				const point block = point_from(l.block);
				const point superblock = point_from(l.superblock);
				const work_distribution work = block_work_dist(grid, block, superblock, drv.devices());

				std::vector<launch_arg> args;
				if(l.args.size() != def.params.size()) {
					throw validation_error("kernel \"" + kernel_id + "\" takes " + std::to_string(def.params.size()) + " arguments");
				}
				for(std::size_t i = 0; i < l.args.size(); ++i) {
					const auto& spec = l.args[i];
					const auto& param = def.params[i];
					if(param.kind == param_spec::kind_t::scalar) {
						if(spec.kind == launch_arg_spec::kind_t::array_name) {
							throw validation_error("parameter \"" + param.name + "\" expects a number");
						}
						const double fval = spec.kind == launch_arg_spec::kind_t::number_int ? static_cast<double>(spec.i) : spec.f;
						const std::int64_t ival = spec.kind == launch_arg_spec::kind_t::number_int ? spec.i : static_cast<std::int64_t>(std::llround(spec.f));
						args.push_back(dtype_is_integral(param.type) ? launch_arg::scalar(ival) : launch_arg::scalar(fval));
					} else {
						if(spec.kind != launch_arg_spec::kind_t::array_name) throw validation_error("parameter \"" + param.name + "\" expects an array name");
						const auto it = arrays_by_name.find(spec.name);
						if(it == arrays_by_name.end()) throw validation_error("unknown array \"" + spec.name + "\"");
						args.push_back(launch_arg::array(it->second));
					}
				}

				launches.push_back(drv.launch(kernel_id, grid, block, work, args, annotation));
				on_pending();

				if(!l.swap.empty()) {
					const auto a = arrays_by_name.find(l.swap[0]);
					const auto b = arrays_by_name.find(l.swap[1]);
					if(a == arrays_by_name.end() || b == arrays_by_name.end()) throw validation_error("swap names an unknown array");
					std::swap(a->second, b->second);
				}
			}
			++launch_index;
		}
		return launches;
	}

} // namespace

scenario_plan plan_scenario(const scenario& sc, const run_overrides& overrides) {
	scenario_plan plan;
	plan.registry = std::make_unique<kernel_registry>(kernel_registry::with_builtins());
	register_gather_kernels(sc, *plan.registry);
	const auto rc = resolve_config(sc.system, overrides);
	plan.drv = std::make_unique<driver>(rc.drv, *plan.registry);
	plan.launches = apply_scenario(sc, overrides, *plan.registry, *plan.drv, [] {});
	return plan;
}

namespace {

	/// Assembles an array's full contents from its chunks (ascending id; replicas agree by
	/// the coherence invariant, which run_scenario verifies separately).
	array_result gather_array(system_runtime& rt, const std::string& name, const array_handle& handle) {
		array_result result;
		result.name = name;
		result.domain = handle.domain;
		result.type = handle.type;
		result.bytes.resize(static_cast<std::size_t>(handle.domain.volume()) * dtype_size(handle.type));
		auto full = array_view::over_region(result.bytes.data(), handle.type, handle.domain, false);
		for(const auto& c : handle.distribution.chunks) {
			auto chunk_bytes = rt.read_chunk(c.id);
			const auto chunk_view = array_view::over_region(chunk_bytes.data(), handle.type, c.region, false);
			copy_region(chunk_view, full, c.region);
		}
		return result;
	}

	bool check_replicas(system_runtime& rt, const array_handle& handle, std::string& message) {
		const auto& chunks = handle.distribution.chunks;
		std::map<chunk_id, std::vector<std::byte>> cache;
		const auto bytes_of = [&](const chunk_descriptor& c) -> const std::vector<std::byte>& {
			auto it = cache.find(c.id);
			if(it == cache.end()) it = cache.emplace(c.id, rt.read_chunk(c.id)).first;
			return it->second;
		};
		for(std::size_t i = 0; i < chunks.size(); ++i) {
			for(std::size_t j = i + 1; j < chunks.size(); ++j) {
				const rect overlap = intersect(chunks[i].region, chunks[j].region);
				if(overlap.is_empty()) continue;
				auto bytes_i = bytes_of(chunks[i]);
				auto bytes_j = bytes_of(chunks[j]);
				const auto view_i = array_view::over_region(bytes_i.data(), handle.type, chunks[i].region, false);
				const auto view_j = array_view::over_region(bytes_j.data(), handle.type, chunks[j].region, false);
				if(pack_region(view_i, overlap) != pack_region(view_j, overlap)) {
					message = "chunks " + std::to_string(chunks[i].id) + " and " + std::to_string(chunks[j].id) + " disagree on " + to_string(overlap);
					return false;
				}
			}
		}
		return true;
	}

} // namespace

run_result run_scenario(const scenario& sc, const run_overrides& overrides) {
	kernel_registry registry = kernel_registry::with_builtins();
	register_gather_kernels(sc, registry);
	const auto rc = resolve_config(sc.system, overrides);
	driver drv(rc.drv, registry);
	system_runtime rt(rc.sys, registry);

	apply_scenario(sc, overrides, registry, drv, [&] { rt.submit(drv.take_pending()); });
	rt.synchronize();

	run_result result;
	// arrays were created in scenario order with ascending ids; swaps exchange which id a
	// name refers to. Replay the swap sequence to map final names to ids.
	std::map<std::string, array_id> ids;
	{
		array_id next = 0;
		for(const auto& a : sc.arrays) {
			ids[a.name] = next++;
		}
		for(const auto& l : sc.launches) {
			if(l.swap.empty()) continue;
			for(int rep = 0; rep < l.repeat; ++rep) {
				std::swap(ids.at(l.swap[0]), ids.at(l.swap[1]));
			}
		}
	}
	for(const auto& a : sc.arrays) {
		const auto& handle = drv.registry().get(ids.at(a.name));
		result.arrays.push_back(gather_array(rt, a.name, handle));
		std::string message;
		if(!check_replicas(rt, handle, message)) {
			result.replicas_coherent = false;
			result.coherence_message = "array \"" + a.name + "\": " + message;
		}
	}
	result.report = rt.report();
	return result;
}

// --- oracle comparison ------------------------------------------------------------------------

oracle_report compare_results(const run_result& actual, const run_result& expected, double rel_tol) {
	oracle_report report;
	if(actual.arrays.size() != expected.arrays.size()) {
		report.pass = false;
		array_comparison c;
		c.name = "<array count>";
		c.pass = false;
		report.arrays.push_back(c);
		return report;
	}
	for(std::size_t a = 0; a < actual.arrays.size(); ++a) {
		const auto& lhs = actual.arrays[a];
		const auto& rhs = expected.arrays[a];
		array_comparison c;
		c.name = lhs.name;
		if(lhs.type != rhs.type || lhs.bytes.size() != rhs.bytes.size()) {
			c.pass = false;
			report.arrays.push_back(c);
			report.pass = false;
			continue;
		}
		const std::int64_t count = static_cast<std::int64_t>(lhs.bytes.size() / dtype_size(lhs.type));
		dispatch_dtype(lhs.type, [&](auto tag) {
			using T = decltype(tag);
			const auto* x = reinterpret_cast<const T*>(lhs.bytes.data());
			const auto* y = reinterpret_cast<const T*>(rhs.bytes.data());
			for(std::int64_t i = 0; i < count; ++i) {
				const double xv = static_cast<double>(x[i]);
				const double yv = static_cast<double>(y[i]);
				const double abs_err = std::abs(xv - yv);
				const double rel_err = abs_err == 0.0 ? 0.0 : abs_err / std::max({std::abs(xv), std::abs(yv), 1e-300});
				c.max_abs_error = std::max(c.max_abs_error, abs_err);
				c.max_rel_error = std::max(c.max_rel_error, rel_err);
				bool ok;
				if(dtype_is_integral(lhs.type)) {
					ok = std::memcmp(&x[i], &y[i], sizeof(T)) == 0;
				} else {
					ok = std::memcmp(&x[i], &y[i], sizeof(T)) == 0 || rel_err <= rel_tol;
				}
				if(!ok && c.first_mismatch < 0) {
					c.pass = false;
					c.first_mismatch = i;
				}
			}
		});
		report.pass = report.pass && c.pass;
		report.arrays.push_back(std::move(c));
	}
	return report;
}

std::string oracle_report::to_string() const {
	std::ostringstream os;
	os << (pass ? "PASS" : "FAIL");
	for(const auto& a : arrays) {
		os << "\n  " << a.name << ": " << (a.pass ? "ok" : "MISMATCH") << " max_abs=" << a.max_abs_error << " max_rel=" << a.max_rel_error;
		if(a.first_mismatch >= 0) os << " first_mismatch=" << a.first_mismatch;
	}
	return os.str();
}

// --- fuzzing ------------------------------------------------------------------------------------

namespace {

	std::string var_name(int axis) { return axis == 0 ? "i" : axis == 1 ? "j" : "k"; }

	/// Index expression text: optionally scaled variable plus constant, e.g. "2*i-3".
	std::string random_expr(std::mt19937_64& rng, int rank) {
		std::uniform_int_distribution<int> coeff(-3, 3);
		std::uniform_int_distribution<int> constant(-5, 5);
		std::uniform_int_distribution<int> axis(0, rank - 1);
		std::ostringstream os;
		const int c = coeff(rng);
		os << c << "*" << var_name(axis(rng));
		const int k = constant(rng);
		if(k >= 0) os << "+";
		os << k;
		return os.str();
	}

	std::string random_index(std::mt19937_64& rng, int rank) {
		std::uniform_int_distribution<int> form(0, 4);
		std::uniform_int_distribution<int> width(0, 3);
		switch(form(rng)) {
		case 0: return random_expr(rng, rank);                                 // single
		case 1: return ":";                                                    // full slice
		case 2: return random_expr(rng, rank) + ":";                           // lower-bounded
		case 3: return ":" + random_expr(rng, rank);                           // upper-bounded
		default: {
			// two-sided slice around a common center, never inverted per-thread
			const std::string center = random_expr(rng, rank);
			return center + "-" + std::to_string(width(rng)) + ":" + center + "+" + std::to_string(width(rng));
		}
		}
	}

} // namespace

scenario make_fuzz_scenario(std::uint64_t case_seed) {
	std::mt19937_64 rng(case_seed);
	std::uniform_int_distribution<int> workers_dist(1, 2);
	std::uniform_int_distribution<int> devices_dist(1, 2);
	std::uniform_int_distribution<int> arrays_dist(3, 5);
	std::uniform_int_distribution<int> rank_dist(1, 2);

	scenario sc;
	sc.system.workers = workers_dist(rng);
	sc.system.devices = devices_dist(rng);
	sc.seed = rng();

	const int array_count = arrays_dist(rng);
	std::uint64_t total_bytes = 0;
	for(int a = 0; a < array_count; ++a) {
		array_spec spec;
		spec.name = "a" + std::to_string(a);
		spec.type = "i64";
		const int rank = rank_dist(rng);
		if(rank == 1) {
			spec.domain = {std::uniform_int_distribution<std::int64_t>(16, 96)(rng)};
		} else {
			spec.domain = {std::uniform_int_distribution<std::int64_t>(6, 20)(rng), std::uniform_int_distribution<std::int64_t>(6, 20)(rng)};
		}
		std::uint64_t volume = 1;
		for(const auto e : spec.domain) {
			volume *= static_cast<std::uint64_t>(e);
		}
		total_bytes += volume * 8;
		// random distribution policy
		const int kind = std::uniform_int_distribution<int>(0, rank == 2 ? 5 : 4)(rng);
		switch(kind) {
		case 0:
			spec.distribution.kind = "row";
			spec.distribution.rows = std::uniform_int_distribution<std::int64_t>(1, std::max<std::int64_t>(1, spec.domain[0] / 2))(rng);
			break;
		case 1: {
			spec.distribution.kind = "tile";
			for(const auto e : spec.domain) {
				spec.distribution.extents.push_back(std::uniform_int_distribution<std::int64_t>(1, std::max<std::int64_t>(1, e / 2))(rng));
			}
			break;
		}
		case 2: {
			spec.distribution.kind = "stencil";
			for(const auto e : spec.domain) {
				spec.distribution.extents.push_back(std::uniform_int_distribution<std::int64_t>(2, std::max<std::int64_t>(2, e / 2))(rng));
				spec.distribution.halo.push_back(std::uniform_int_distribution<std::int64_t>(0, 2)(rng));
			}
			break;
		}
		case 3: spec.distribution.kind = "replicated"; break;
		case 4: spec.distribution.kind = "single"; break;
		default: spec.distribution.kind = "col"; spec.distribution.cols = std::uniform_int_distribution<std::int64_t>(1, std::max<std::int64_t>(1, spec.domain[1] / 2))(rng); break;
		}
		spec.fill = 1.0;
		sc.arrays.push_back(std::move(spec));
	}

	const auto make_binding = [&](int rank) {
		std::string b = "global ";
		if(rank == 1) return b + "i";
		b += "[i";
		for(int k = 1; k < rank; ++k) {
			b += ", " + var_name(k);
		}
		return b + "]";
	};
	const auto identity_indices = [&](int rank) {
		std::string s = "i";
		for(int k = 1; k < rank; ++k) {
			s += "," + var_name(k);
		}
		return s;
	};

	const int launch_count = std::uniform_int_distribution<int>(2, 4)(rng);
	int previous_dst = 0;
	for(int l = 0; l < launch_count; ++l) {
		const int dst = l == 0 ? 0 : std::uniform_int_distribution<int>(0, array_count - 1)(rng);
		const auto& dst_spec = sc.arrays[static_cast<std::size_t>(dst)];
		const int rank = static_cast<int>(dst_spec.domain.size());

		launch_spec launch;
		launch.kernel = "gather";
		launch.grid = dst_spec.domain;
		for(int k = 0; k < rank; ++k) {
			const std::int64_t bs = std::uniform_int_distribution<std::int64_t>(1, 6)(rng);
			launch.block.push_back(bs);
			launch.superblock.push_back(bs * std::uniform_int_distribution<std::int64_t>(1, 4)(rng));
		}

		std::ostringstream ann;
		ann << make_binding(rank) << " => ";
		std::vector<std::string> arg_names;
		if(l > 0) {
			// read the previous launch's output (exercises cross-launch dependencies) and
			// maybe one more array, none of them the destination
			std::vector<int> sources{previous_dst};
			const int extra = std::uniform_int_distribution<int>(0, array_count - 1)(rng);
			if(extra != previous_dst) sources.push_back(extra);
			bool first = true;
			for(const auto src : sources) {
				if(src == dst) continue;
				const auto& src_spec = sc.arrays[static_cast<std::size_t>(src)];
				if(!first) ann << ", ";
				first = false;
				ann << "read " << src_spec.name << "[";
				for(std::size_t k = 0; k < src_spec.domain.size(); ++k) {
					ann << (k ? "," : "") << random_index(rng, rank);
				}
				ann << "]";
				arg_names.push_back(src_spec.name);
			}
			if(!first) ann << ", ";
		}
		const bool reduce = l > 0 && std::uniform_int_distribution<int>(0, 3)(rng) == 0;
		if(reduce) {
			const char* ops[] = {"+", "min", "max"};
			ann << "reduce(" << ops[std::uniform_int_distribution<int>(0, 2)(rng)] << ") " << dst_spec.name << "[";
			for(int k = 0; k < rank; ++k) {
				std::uniform_int_distribution<int> coeff(0, 2);
				ann << (k ? "," : "") << coeff(rng) << "*" << var_name(std::uniform_int_distribution<int>(0, rank - 1)(rng));
			}
			ann << "]";
		} else {
			ann << "write " << dst_spec.name << "[" << identity_indices(rank) << "]";
		}
		arg_names.push_back(dst_spec.name);

		launch.annotation = ann.str();
		for(const auto& name : arg_names) {
			launch_arg_spec as;
			as.kind = launch_arg_spec::kind_t::array_name;
			as.name = name;
			launch.args.push_back(std::move(as));
		}
		sc.launches.push_back(std::move(launch));
		previous_dst = dst;
	}

	// memory pressure: sometimes cap the device pool; the floor must still admit the widest
	// task (a device-level reduce staging every partial of the launch at once)
	if(std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
		std::uint64_t worst_fan_in = 1;
		for(const auto& l : sc.launches) {
			std::uint64_t superblocks = 1;
			for(std::size_t k = 0; k < l.grid.size(); ++k) {
				const std::int64_t blocks = (l.grid[k] + l.block[k] - 1) / l.block[k];
				const std::int64_t per_sb = l.superblock[k] / l.block[k];
				superblocks *= static_cast<std::uint64_t>((blocks + per_sb - 1) / per_sb);
			}
			worst_fan_in = std::max(worst_fan_in, superblocks);
		}
		const std::uint64_t floor = 2 * (worst_fan_in + 8) * 4096;
		sc.system.device_capacity = std::max(floor, total_bytes / 2);
		sc.system.host_capacity = sc.system.device_capacity * 4;
	}
	return sc;
}

std::optional<fuzz_failure> run_fuzz_campaign(const fuzz_options& options) {
	for(int i = 0; i < options.cases; ++i) {
		const std::uint64_t case_seed = mix64(options.seed + static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL);
		const scenario sc = make_fuzz_scenario(case_seed);
		try {
			run_overrides sim;
			sim.ready_seed = sc.seed;
			sim.suppress_conflict_deps = options.suppress_conflict_deps;
			sim.disk_in_memory = true;
			const auto actual = run_scenario(sc, sim);

			run_overrides oracle;
			oracle.oracle_mode = true;
			oracle.disk_in_memory = true;
			const auto expected = run_scenario(sc, oracle);

			const auto report = compare_results(actual, expected, 1e-6);
			if(!report.pass || !actual.replicas_coherent) {
				fuzz_failure failure;
				failure.case_index = i;
				failure.case_seed = case_seed;
				failure.message = !report.pass ? report.to_string() : actual.coherence_message;
				failure.scenario_json = scenario_to_json_text(sc);
				return failure;
			}
		} catch(const std::exception& e) {
			fuzz_failure failure;
			failure.case_index = i;
			failure.case_seed = case_seed;
			failure.message = std::string("exception: ") + e.what();
			failure.scenario_json = scenario_to_json_text(sc);
			return failure;
		}
	}
	return std::nullopt;
}

} // namespace manta
