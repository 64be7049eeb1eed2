#include "manta/planner.hpp"

#include <algorithm>
#include <cassert>

namespace manta {

driver::driver(driver_config cfg, const kernel_registry& kernels) : m_cfg(cfg), m_kernels(&kernels), m_plan(cfg.workers) {
	if(cfg.workers < 1 || cfg.devices_per_worker < 1) throw validation_error("system needs at least one worker with one device");
	for(int w = 0; w < cfg.workers; ++w) {
		for(int d = 0; d < cfg.devices_per_worker; ++d) {
			m_devices.push_back({w, d});
		}
	}
}

const chunk_meta& driver::chunk(chunk_id id) const {
	const auto it = m_chunks.find(id);
	if(it == m_chunks.end()) throw validation_error("unknown chunk " + std::to_string(id));
	return it->second;
}

std::vector<task> driver::take_pending() {
	auto out = std::move(m_pending);
	m_pending.clear();
	std::sort(out.begin(), out.end(), [](const task& a, const task& b) { return a.id < b.id; });
	return out;
}

task_id driver::emit(int worker, device_id resource, std::vector<task_id> deps,
    std::variant<create_task, delete_task, execute_task, copy_task, send_task, recv_task, reduce_task> op) {
	std::sort(deps.begin(), deps.end());
	deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
	const task_id id = next_task_id();
	for(const auto d : deps) {
		assert(d >= 0 && d < id && "dependencies must reference already-emitted tasks");
		assert(m_task_worker[static_cast<std::size_t>(d)] == worker && "cross-worker edges may only be send/recv pairs");
		(void)d;
	}
	assert(resource.worker == worker);
	task t;
	t.id = id;
	t.worker = worker;
	t.resource = resource;
	t.deps = std::move(deps);
	t.op = std::move(op);
	m_task_worker.push_back(worker);
	m_pending.push_back(t);
	m_plan.append(std::move(t));
	return id;
}

std::uint64_t driver::next_tag(int src_worker, int dst_worker) { return m_tags[{src_worker, dst_worker}]++; }

chunk_id driver::new_temp_chunk(const rect& region, device_id home, dtype type) {
	const chunk_id id = m_next_chunk++;
	m_chunks.emplace(id, chunk_meta{chunk_descriptor{id, region, home}, type, true});
	return id;
}

void driver::touch_temp(chunk_id id, task_id t) { m_temp_tasks[id].push_back(t); }

std::vector<task_id> driver::record(chunk_id c, task_id t, access_effect effect, bool check_filled) {
	if(check_filled && !m_registry.state(c).filled) {
		throw plan_error("chunk " + std::to_string(c) + " is read before any fill or write; its contents would be undefined");
	}
	auto deps = m_registry.record_access(c, t, effect);
	if(m_cfg.suppress_conflict_deps) deps.clear();
	return deps;
}

task_id driver::emit_transfer(chunk_id src, chunk_id dst, const rect& region, std::vector<task_id> src_deps, std::vector<task_id> dst_deps,
    std::vector<task_id>* emitted) {
	const chunk_meta src_meta = chunk(src);
	const chunk_meta dst_meta = chunk(dst);
	assert(!region.is_empty());
	if(src_meta.descriptor.home.worker == dst_meta.descriptor.home.worker) {
		const task_id tid = next_task_id();
		std::vector<task_id> deps = std::move(src_deps);
		deps.insert(deps.end(), dst_deps.begin(), dst_deps.end());
		if(!src_meta.temp) {
			const auto d = record(src, tid, access_effect::read, true);
			deps.insert(deps.end(), d.begin(), d.end());
		}
		if(!dst_meta.temp) {
			const auto d = record(dst, tid, access_effect::write);
			deps.insert(deps.end(), d.begin(), d.end());
		}
		const task_id id = emit(dst_meta.descriptor.home.worker, dst_meta.descriptor.home, std::move(deps), copy_task{src, dst, region, region});
		assert(id == tid);
		if(src_meta.temp) touch_temp(src, id);
		if(dst_meta.temp) touch_temp(dst, id);
		if(emitted) emitted->push_back(id);
		return id;
	}
	const int src_worker = src_meta.descriptor.home.worker;
	const int dst_worker = dst_meta.descriptor.home.worker;
	const std::uint64_t tag = next_tag(src_worker, dst_worker);
	const task_id send_tid = next_task_id();
	if(!src_meta.temp) {
		const auto d = record(src, send_tid, access_effect::read, true);
		src_deps.insert(src_deps.end(), d.begin(), d.end());
	}
	const task_id send_id = emit(src_worker, src_meta.descriptor.home, std::move(src_deps), send_task{src, region, dst_worker, tag});
	assert(send_id == send_tid);
	if(src_meta.temp) touch_temp(src, send_id);
	const task_id recv_tid = next_task_id();
	if(!dst_meta.temp) {
		const auto d = record(dst, recv_tid, access_effect::write);
		dst_deps.insert(dst_deps.end(), d.begin(), d.end());
	}
	const task_id recv_id = emit(dst_worker, dst_meta.descriptor.home, std::move(dst_deps), recv_task{dst, region, src_worker, tag});
	assert(recv_id == recv_tid);
	if(dst_meta.temp) touch_temp(dst, recv_id);
	if(emitted) {
		emitted->push_back(send_id);
		emitted->push_back(recv_id);
	}
	return recv_id;
}

const array_handle& driver::create_array(const rect& domain, dtype type, const data_distribution& distribution, fill_spec fill) {
	data_distribution rebased = distribution;
	for(auto& c : rebased.chunks) {
		if(c.home.worker < 0 || c.home.worker >= m_cfg.workers || c.home.device < 0 || c.home.device >= m_cfg.devices_per_worker) {
			throw validation_error("chunk home " + to_string(c.home) + " is outside the configured system");
		}
		c.id = m_next_chunk++;
	}
	const array_handle& handle = m_registry.register_array(domain, type, rebased);
	for(const auto& c : handle.distribution.chunks) {
		m_chunks.emplace(c.id, chunk_meta{c, type, false});
		const task_id id = emit(c.home.worker, c.home, {}, create_task{c, type, fill});
		m_registry.mark_created(c.id, id, fill.kind != fill_spec::kind_t::none);
	}
	return handle;
}

void driver::delete_array(array_id id) {
	const std::vector<chunk_descriptor> chunks = m_registry.get(id).distribution.chunks; // throws if not live
	for(const auto& c : chunks) {
		const task_id tid = next_task_id();
		auto deps = record(c.id, tid, access_effect::write); // orders after the last writer and all readers
		const task_id del = emit(c.home.worker, c.home, std::move(deps), delete_task{c.id});
		assert(del == tid);
		(void)del;
	}
	m_registry.erase(id);
}

namespace {
	struct reduce_partial {
		chunk_id chunk = -1;
		task_id producer = -1;
	};
} // namespace

launch_result driver::launch(const std::string& kernel, const rect& grid, const point& block_size, const work_distribution& work,
    const std::vector<launch_arg>& args, const access_annotation& annotation) {
	const task_id first_task = next_task_id();
	const kernel_def& def = m_kernels->get(kernel);

	// validate arguments against the signature
	if(args.size() != def.params.size()) {
		throw validation_error("kernel \"" + kernel + "\" takes " + std::to_string(def.params.size()) + " arguments, got " + std::to_string(args.size()));
	}
	for(int k = 0; k < grid.rank(); ++k) {
		if(grid.lo[k] != 0) throw validation_error("launch grids start at the origin");
	}
	if(grid.is_empty()) throw validation_error("launch grid is empty");
	if(block_size.rank != grid.rank()) throw validation_error("block size and grid axis counts differ");

	struct array_param {
		std::size_t param = 0;
		array_id arr = -1;
		const access* acc = nullptr;
		std::size_t access_index = 0;
	};
	std::map<std::string, array_param> array_params;
	std::map<array_id, std::vector<std::size_t>> by_array;
	for(std::size_t i = 0; i < def.params.size(); ++i) {
		const auto& p = def.params[i];
		const auto& a = args[i];
		if(p.kind == param_spec::kind_t::scalar) {
			const bool want_int = dtype_is_integral(p.type);
			if(want_int && a.kind != launch_arg::kind_t::scalar_int) throw validation_error("parameter \"" + p.name + "\" expects an integer scalar");
			if(!want_int && a.kind != launch_arg::kind_t::scalar_float) throw validation_error("parameter \"" + p.name + "\" expects a float scalar");
			continue;
		}
		if(a.kind != launch_arg::kind_t::array) throw validation_error("parameter \"" + p.name + "\" expects an array");
		const array_handle& handle = m_registry.get(a.arr); // throws if deleted
		if(handle.type != p.type) {
			throw validation_error("parameter \"" + p.name + "\" expects element type " + dtype_name(p.type) + ", array has " + dtype_name(handle.type));
		}
		if(handle.domain.rank() != p.rank) throw validation_error("parameter \"" + p.name + "\" expects rank " + std::to_string(p.rank));
		const access* acc = annotation.find_access(p.name);
		if(acc == nullptr) throw validation_error("annotation does not mention array parameter \"" + p.name + "\"");
		const auto access_index = static_cast<std::size_t>(acc - annotation.accesses.data());
		array_params.emplace(p.name, array_param{i, a.arr, acc, access_index});
		by_array[a.arr].push_back(i);
	}
	for(const auto& acc : annotation.accesses) {
		if(!array_params.count(acc.argument)) throw validation_error("annotation mentions \"" + acc.argument + "\" which is not an array parameter");
	}
	for(const auto& [arr, params] : by_array) {
		if(params.size() < 2) continue;
		for(const auto p : params) {
			const auto& mode = array_params.at(def.params[p].name).acc->mode;
			if(mode.is_write() || mode.is_reduce()) {
				throw validation_error("one array is bound to several parameters and \"" + def.params[p].name + "\" writes or reduces into it");
			}
		}
	}

	// superblocks in thread space
	point block_grid_extents = point::zeros(grid.rank());
	for(int k = 0; k < grid.rank(); ++k) {
		if(block_size[k] <= 0) throw validation_error("block size must be positive");
		block_grid_extents[k] = (grid.extent(k) + block_size[k] - 1) / block_size[k];
	}
	work.validate(rect::from_extents(block_grid_extents));

	// thread lanes come in whole blocks: a ragged launch still instantiates every lane of
	// its trailing blocks, and kernels guard them away
	std::vector<rect> sb_threads;
	for(const auto& sb : work.superblocks) {
		point lo = point::zeros(grid.rank());
		point hi = point::zeros(grid.rank());
		for(int k = 0; k < grid.rank(); ++k) {
			lo[k] = sb.blocks.lo[k] * block_size[k];
			hi[k] = sb.blocks.hi[k] * block_size[k];
		}
		sb_threads.push_back(rect(lo, hi));
	}

	// evaluate all access regions and reject overlapping plain writes
	std::map<std::string, rect> domains;
	for(const auto& [name, ap] : array_params) {
		domains.emplace(name, m_registry.get(ap.arr).domain);
	}
	std::vector<std::vector<access_region>> regions;
	regions.reserve(sb_threads.size());
	for(const auto& threads : sb_threads) {
		regions.push_back(evaluate_region(annotation, threads, block_size, domains));
	}
	if(const auto conflict = check_write_disjointness(regions)) throw plan_error("write conflict: " + to_string(*conflict));

	// launch-wide bounding box per reduce access; every superblock's partial covers it
	std::map<std::string, rect> reduce_bbox;
	for(std::size_t a = 0; a < annotation.accesses.size(); ++a) {
		if(!annotation.accesses[a].mode.is_reduce()) continue;
		const auto& ap = array_params.at(annotation.accesses[a].argument);
		rect box = rect::empty(m_registry.get(ap.arr).domain.rank());
		for(const auto& sb_regions : regions) {
			box = bounding_box(box, sb_regions[a].region);
		}
		reduce_bbox.emplace(annotation.accesses[a].argument, box);
	}

	std::map<std::string, std::vector<reduce_partial>> reduce_partials;

	for(std::size_t s = 0; s < work.superblocks.size(); ++s) {
		const device_id device = work.superblocks[s].device;
		const int worker = device.worker;

		std::vector<arg_binding> bindings(def.params.size());
		std::vector<task_id> exec_deps;
		struct pending_record {
			chunk_id chunk = -1;
			access_effect effect = access_effect::read;
			bool check_filled = false;
		};
		std::vector<pending_record> exec_records;
		struct pending_write {
			std::string argument;
			rect region;
			chunk_id source = -1;
			bool source_is_temp = false;
		};
		std::vector<pending_write> writes;
		std::vector<chunk_id> dead_temps;
		std::vector<std::pair<std::string, chunk_id>> sb_partials;

		for(std::size_t i = 0; i < def.params.size(); ++i) {
			const auto& p = def.params[i];
			if(p.kind == param_spec::kind_t::scalar) {
				auto& b = bindings[i];
				b.kind = dtype_is_integral(p.type) ? arg_binding::kind_t::scalar_int : arg_binding::kind_t::scalar_float;
				b.scalar_int = args[i].i;
				b.scalar_float = args[i].f;
				continue;
			}
			const auto& ap = array_params.at(p.name);
			const access_mode mode = ap.acc->mode;
			const rect region = regions[s][ap.access_index].region;
			const array_handle& handle = m_registry.get(ap.arr);

			if(mode.is_reduce()) {
				const rect box = reduce_bbox.at(p.name);
				if(box.is_empty()) continue; // no thread contributes anywhere
				const chunk_id partial = new_temp_chunk(box, device, handle.type);
				const task_id create = emit(worker, device, {}, create_task{chunk(partial).descriptor, handle.type, fill_spec::identity_of(mode.op)});
				touch_temp(partial, create);
				exec_deps.push_back(create);
				bindings[i].kind = arg_binding::kind_t::chunk;
				bindings[i].chunk = partial;
				sb_partials.emplace_back(p.name, partial);
				continue;
			}

			if(region.is_empty()) continue; // guarded kernels never touch it

			const auto candidates = chunks_intersecting(handle.distribution, region);
			const auto enclosing = select_enclosing_chunk(candidates, region, device);

			if(enclosing && enclosing->home == device) {
				bindings[i].kind = arg_binding::kind_t::chunk;
				bindings[i].chunk = enclosing->id;
				exec_records.push_back({enclosing->id, mode.is_write() ? access_effect::write : access_effect::read, mode.is_read()});
				if(mode.is_write()) writes.push_back({p.name, region, enclosing->id, false});
				continue;
			}

			// no chunk on the executing device encloses the region: stage a temporary there
			const chunk_id temp = new_temp_chunk(region, device, handle.type);
			const task_id create = emit(worker, device, {}, create_task{chunk(temp).descriptor, handle.type, fill_spec::none()});
			touch_temp(temp, create);
			exec_deps.push_back(create);
			if(mode.is_read()) {
				// pull from the enclosing replica, or assemble fragment-wise
				std::vector<chunk_descriptor> sources;
				if(enclosing) {
					sources.push_back(*enclosing);
				} else {
					sources = candidates;
				}
				for(const auto& src : sources) {
					exec_deps.push_back(emit_transfer(src.id, temp, intersect(src.region, region), {}, {create}));
				}
			}
			bindings[i].kind = arg_binding::kind_t::chunk;
			bindings[i].chunk = temp;
			if(mode.is_write()) {
				writes.push_back({p.name, region, temp, true});
			} else {
				dead_temps.push_back(temp);
			}
		}

		const task_id exec_tid = next_task_id();
		for(const auto& r : exec_records) {
			const auto deps = record(r.chunk, exec_tid, r.effect, r.check_filled);
			exec_deps.insert(exec_deps.end(), deps.begin(), deps.end());
		}
		execute_task exec;
		exec.kernel = kernel;
		exec.device = device;
		exec.superblock_blocks = work.superblocks[s].blocks;
		exec.superblock_threads = sb_threads[s];
		exec.block_size = block_size;
		exec.args = bindings;
		const task_id exec_id = emit(worker, device, std::move(exec_deps), std::move(exec));
		assert(exec_id == exec_tid);
		(void)exec_tid;
		for(const auto& b : bindings) {
			if(b.kind == arg_binding::kind_t::chunk && chunk(b.chunk).temp) touch_temp(b.chunk, exec_id);
		}
		for(const auto& [name, partial] : sb_partials) {
			reduce_partials[name].push_back({partial, exec_id});
		}

		// update every other replica overlapping a written region, or scatter temp writes
		for(const auto& w : writes) {
			const array_handle& handle = m_registry.get(array_params.at(w.argument).arr);
			for(const auto& target : chunks_intersecting(handle.distribution, w.region)) {
				if(!w.source_is_temp && target.id == w.source) continue;
				emit_transfer(w.source, target.id, intersect(target.region, w.region), {exec_id}, {});
			}
			if(w.source_is_temp) dead_temps.push_back(w.source);
		}

		for(const auto temp : dead_temps) {
			emit(worker, device, m_temp_tasks.at(temp), delete_task{temp});
			m_temp_tasks.erase(temp);
		}
	}

	// hierarchical reduction of the partial results
	for(const auto& acc : annotation.accesses) {
		if(!acc.mode.is_reduce()) continue;
		const auto it = reduce_partials.find(acc.argument);
		if(it == reduce_partials.end() || it->second.empty()) continue;
		const auto& ap = array_params.at(acc.argument);
		const rect box = reduce_bbox.at(acc.argument);
		const array_handle& handle = m_registry.get(ap.arr);
		const dtype type = handle.type;
		std::vector<chunk_id> access_temps;
		for(const auto& part : it->second) {
			access_temps.push_back(part.chunk);
		}

		struct stage_result {
			chunk_id chunk = -1;
			task_id producer = -1;
		};

		// per device: combine that device's partials
		std::map<device_id, stage_result> device_results;
		{
			std::map<device_id, std::vector<reduce_partial>> by_device;
			for(const auto& part : it->second) {
				by_device[chunk(part.chunk).descriptor.home].push_back(part);
			}
			for(const auto& [dev, parts] : by_device) {
				if(parts.size() == 1) {
					device_results[dev] = {parts[0].chunk, parts[0].producer};
					continue;
				}
				const chunk_id out = new_temp_chunk(box, dev, type);
				access_temps.push_back(out);
				const task_id create = emit(dev.worker, dev, {}, create_task{chunk(out).descriptor, type, fill_spec::none()});
				touch_temp(out, create);
				reduce_task red;
				red.op = acc.mode.op;
				red.output = out;
				std::vector<task_id> deps{create};
				for(const auto& part : parts) {
					red.inputs.push_back(part.chunk);
					deps.push_back(part.producer);
				}
				const task_id rid = emit(dev.worker, dev, std::move(deps), std::move(red));
				for(const auto& part : parts) {
					touch_temp(part.chunk, rid);
				}
				touch_temp(out, rid);
				device_results[dev] = {out, rid};
			}
		}

		// per worker: combine that worker's device results (output on the first device involved)
		std::map<int, stage_result> worker_results;
		{
			std::map<int, std::vector<stage_result>> by_worker;
			for(const auto& [dev, res] : device_results) {
				by_worker[dev.worker].push_back(res);
			}
			for(const auto& [w, results] : by_worker) {
				if(results.size() == 1) {
					worker_results[w] = results[0];
					continue;
				}
				const device_id out_dev = chunk(results[0].chunk).descriptor.home;
				const chunk_id out = new_temp_chunk(box, out_dev, type);
				access_temps.push_back(out);
				const task_id create = emit(w, out_dev, {}, create_task{chunk(out).descriptor, type, fill_spec::none()});
				touch_temp(out, create);
				reduce_task red;
				red.op = acc.mode.op;
				red.output = out;
				std::vector<task_id> deps{create};
				for(const auto& res : results) {
					red.inputs.push_back(res.chunk);
					deps.push_back(res.producer);
				}
				const task_id rid = emit(w, out_dev, std::move(deps), std::move(red));
				for(const auto& res : results) {
					touch_temp(res.chunk, rid);
				}
				touch_temp(out, rid);
				worker_results[w] = {out, rid};
			}
		}

		// across workers: worker 0 receives every other worker's result and reduces last
		const device_id root{0, 0};
		reduce_task final_red;
		final_red.op = acc.mode.op;
		std::vector<task_id> final_deps;
		for(const auto& [w, res] : worker_results) {
			if(w == 0) {
				final_red.inputs.push_back(res.chunk);
				final_deps.push_back(res.producer);
				continue;
			}
			const chunk_id landing = new_temp_chunk(box, root, type);
			access_temps.push_back(landing);
			const task_id create = emit(0, root, {}, create_task{chunk(landing).descriptor, type, fill_spec::none()});
			touch_temp(landing, create);
			const task_id recv = emit_transfer(res.chunk, landing, box, {res.producer}, {create});
			final_red.inputs.push_back(landing);
			final_deps.push_back(recv);
		}
		const chunk_id final_chunk = new_temp_chunk(box, root, type);
		access_temps.push_back(final_chunk);
		const task_id final_create = emit(0, root, {}, create_task{chunk(final_chunk).descriptor, type, fill_spec::none()});
		touch_temp(final_chunk, final_create);
		final_deps.push_back(final_create);
		final_red.output = final_chunk;
		const std::vector<chunk_id> final_inputs = final_red.inputs;
		const task_id final_id = emit(0, root, std::move(final_deps), std::move(final_red));
		for(const auto in : final_inputs) {
			touch_temp(in, final_id);
		}
		touch_temp(final_chunk, final_id);

		// write the combined result into every destination chunk overlapping the region
		for(const auto& target : chunks_intersecting(handle.distribution, box)) {
			emit_transfer(final_chunk, target.id, intersect(target.region, box), {final_id}, {});
		}

		// this access's reduction temporaries die now, ordered after their last users
		for(const auto id : access_temps) {
			const auto& meta = chunk(id);
			emit(meta.descriptor.home.worker, meta.descriptor.home, m_temp_tasks.at(id), delete_task{id});
			m_temp_tasks.erase(id);
		}
	}

	return {first_task, next_task_id()};
}

} // namespace manta
