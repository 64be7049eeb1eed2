#include "manta/task.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace manta {

const char* task::kind_name() const {
	switch(op.index()) {
	case 0: return "create";
	case 1: return "delete";
	case 2: return "execute";
	case 3: return "copy";
	case 4: return "send";
	case 5: return "recv";
	case 6: return "reduce";
	}
	return "?";
}

std::size_t execution_plan::task_count() const {
	std::size_t n = 0;
	for(const auto& w : per_worker) {
		n += w.size();
	}
	return n;
}

void execution_plan::append(task t) {
	const auto w = static_cast<std::size_t>(t.worker);
	if(w >= per_worker.size()) per_worker.resize(w + 1);
	per_worker[w].push_back(std::move(t));
}

std::vector<const task*> execution_plan::in_id_order() const {
	std::vector<const task*> all;
	for(const auto& w : per_worker) {
		for(const auto& t : w) {
			all.push_back(&t);
		}
	}
	std::sort(all.begin(), all.end(), [](const task* a, const task* b) { return a->id < b->id; });
	return all;
}

namespace {

	std::string task_label(const task& t) {
		std::ostringstream os;
		os << "t" << t.id << " ";
		if(const auto* c = std::get_if<create_task>(&t.op)) {
			os << "Create c" << c->chunk.id << " " << to_string(c->chunk.region);
		} else if(const auto* d = std::get_if<delete_task>(&t.op)) {
			os << "Delete c" << d->chunk;
		} else if(const auto* e = std::get_if<execute_task>(&t.op)) {
			os << "Execute " << e->kernel << " " << to_string(e->superblock_blocks) << " @" << to_string(e->device);
		} else if(const auto* c = std::get_if<copy_task>(&t.op)) {
			os << "Copy c" << c->src << "->c" << c->dst << " " << to_string(c->dst_region);
		} else if(const auto* s = std::get_if<send_task>(&t.op)) {
			os << "Send c" << s->chunk << " " << to_string(s->region) << " ->w" << s->peer_worker;
		} else if(const auto* r = std::get_if<recv_task>(&t.op)) {
			os << "Recv c" << r->chunk << " " << to_string(r->region) << " <-w" << r->peer_worker;
		} else if(const auto* r = std::get_if<reduce_task>(&t.op)) {
			os << "Reduce(" << to_string(r->op) << ") " << r->inputs.size() << " inputs ->c" << r->output;
		}
		return os.str();
	}

} // namespace

std::string export_dot(const execution_plan& plan) {
	std::ostringstream os;
	os << "digraph plan {\n";
	os << "  rankdir=TB;\n";
	os << "  node [shape=box, fontsize=10];\n";
	for(int w = 0; w < plan.workers(); ++w) {
		os << "  subgraph cluster_worker" << w << " {\n";
		os << "    label=\"worker " << w << "\";\n";
		for(const auto& t : plan.per_worker[static_cast<std::size_t>(w)]) {
			os << "    t" << t.id << " [label=\"" << task_label(t) << "\"];\n";
		}
		os << "  }\n";
	}
	for(const auto* t : plan.in_id_order()) {
		for(const auto dep : t->deps) {
			os << "  t" << dep << " -> t" << t->id << ";\n";
		}
	}
	// pair up sends and recvs by (src worker, dst worker, tag)
	std::map<std::tuple<int, int, std::uint64_t>, task_id> sends;
	for(const auto* t : plan.in_id_order()) {
		if(const auto* s = std::get_if<send_task>(&t->op)) {
			sends[{t->worker, s->peer_worker, s->tag}] = t->id;
		}
	}
	for(const auto* t : plan.in_id_order()) {
		if(const auto* r = std::get_if<recv_task>(&t->op)) {
			const auto it = sends.find({r->peer_worker, t->worker, r->tag});
			if(it != sends.end()) {
				os << "  t" << it->second << " -> t" << t->id << " [style=dashed, constraint=false];\n";
			}
		}
	}
	os << "}\n";
	return os.str();
}

} // namespace manta
