#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "distribution.hpp"
#include "dtype.hpp"
#include "task.hpp"

namespace manta {

using array_id = std::int64_t;

struct array_handle {
	array_id id = -1;
	rect domain;
	dtype type = dtype::f32;
	data_distribution distribution; // chunk ids are global across the registry
};

/// Driver-side, whole-chunk conflict bookkeeping. Versions count planned writes; readers
/// accumulate between writes for write-after-read ordering.
struct chunk_state {
	chunk_descriptor descriptor;
	std::int64_t version = 0;
	std::optional<task_id> last_writer;
	std::set<task_id> readers_since_write;
	bool filled = false; // false until a fill or a planned write; reading then is an error
};

enum class access_effect { read, write };

/// Bookkeeping of all live distributed arrays and their chunks. Mutated only by the single
/// driver control flow; no internal locking.
class array_registry {
  public:
	/// Registers an array whose distribution's chunk ids are already globally unique.
	/// Throws validation_error on rank/type violations or incomplete domain coverage.
	const array_handle& register_array(rect domain, dtype type, data_distribution distribution);

	/// Marks the chunk created by `creator`; a filling create makes the chunk readable.
	void mark_created(chunk_id chunk, task_id creator, bool filled);

	/// Removes a live array and returns its handle. Throws on double delete.
	array_handle erase(array_id id);

	/// Records one whole-chunk access and returns the dependencies the accessing task must
	/// wait on: reads depend on the last writer; writes depend on the last writer and all
	/// readers since, then bump the version.
	std::vector<task_id> record_access(chunk_id chunk, task_id accessor, access_effect effect);

	/// Like record_access for reads, but fails if the chunk has never been filled/written.
	std::vector<task_id> record_read_checked(chunk_id chunk, task_id accessor);

	bool is_live(array_id id) const { return m_arrays.count(id) != 0; }
	const array_handle& get(array_id id) const;
	const chunk_state& state(chunk_id chunk) const;
	std::vector<chunk_id> chunks_of(array_id id) const;

  private:
	array_id m_next_array_id = 0;
	std::map<array_id, array_handle> m_arrays;
	std::map<chunk_id, chunk_state> m_chunks;

	chunk_state& state_mut(chunk_id chunk);
};

} // namespace manta
