#include "manta/array_registry.hpp"

#include <algorithm>

namespace manta {

const array_handle& array_registry::register_array(rect domain, dtype type, data_distribution distribution) {
	if(domain.rank() < 1 || domain.rank() > max_rank) throw validation_error("arrays have between one and three dimensions");
	if(domain.is_empty()) throw validation_error("array domain is empty");
	distribution.validate(domain);
	for(const auto& c : distribution.chunks) {
		if(m_chunks.count(c.id)) throw validation_error("chunk id " + std::to_string(c.id) + " already registered");
	}
	const array_id id = m_next_array_id++;
	array_handle handle{id, domain, type, std::move(distribution)};
	for(const auto& c : handle.distribution.chunks) {
		chunk_state st;
		st.descriptor = c;
		m_chunks.emplace(c.id, std::move(st));
	}
	return m_arrays.emplace(id, std::move(handle)).first->second;
}

void array_registry::mark_created(chunk_id chunk, task_id creator, bool filled) {
	auto& st = state_mut(chunk);
	st.last_writer = creator;
	st.filled = filled;
}

array_handle array_registry::erase(array_id id) {
	const auto it = m_arrays.find(id);
	if(it == m_arrays.end()) throw validation_error("array " + std::to_string(id) + " is not live (double delete?)");
	array_handle handle = std::move(it->second);
	for(const auto& c : handle.distribution.chunks) {
		m_chunks.erase(c.id);
	}
	m_arrays.erase(it);
	return handle;
}

std::vector<task_id> array_registry::record_access(chunk_id chunk, task_id accessor, access_effect effect) {
	auto& st = state_mut(chunk);
	std::vector<task_id> deps;
	if(effect == access_effect::read) {
		if(st.last_writer) deps.push_back(*st.last_writer);
		st.readers_since_write.insert(accessor);
	} else {
		if(st.last_writer) deps.push_back(*st.last_writer);
		for(const auto r : st.readers_since_write) {
			if(r != accessor) deps.push_back(r);
		}
		st.version += 1;
		st.last_writer = accessor;
		st.readers_since_write.clear();
		st.filled = true;
	}
	std::sort(deps.begin(), deps.end());
	deps.erase(std::unique(deps.begin(), deps.end()), deps.end());
	return deps;
}

std::vector<task_id> array_registry::record_read_checked(chunk_id chunk, task_id accessor) {
	if(!state(chunk).filled) {
		throw plan_error("chunk " + std::to_string(chunk) + " is read before any fill or write; its contents would be undefined");
	}
	return record_access(chunk, accessor, access_effect::read);
}

const array_handle& array_registry::get(array_id id) const {
	const auto it = m_arrays.find(id);
	if(it == m_arrays.end()) throw validation_error("array " + std::to_string(id) + " is not live");
	return it->second;
}

const chunk_state& array_registry::state(chunk_id chunk) const {
	const auto it = m_chunks.find(chunk);
	if(it == m_chunks.end()) throw validation_error("unknown chunk " + std::to_string(chunk));
	return it->second;
}

std::vector<chunk_id> array_registry::chunks_of(array_id id) const {
	std::vector<chunk_id> out;
	for(const auto& c : get(id).distribution.chunks) {
		out.push_back(c.id);
	}
	return out;
}

chunk_state& array_registry::state_mut(chunk_id chunk) {
	const auto it = m_chunks.find(chunk);
	if(it == m_chunks.end()) throw validation_error("unknown chunk " + std::to_string(chunk));
	return it->second;
}

} // namespace manta
