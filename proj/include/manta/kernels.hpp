#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dtype.hpp"
#include "geometry.hpp"

namespace manta {

/// Typed window into a chunk buffer, indexed with *global* array coordinates. The view
/// subtracts the chunk's offset once per access: global index g maps to buffer element
/// sum_k (g[k] - offset[k]) * stride[k].
struct array_view {
	std::byte* data = nullptr;
	dtype type = dtype::f32;
	int rank = 1;
	std::array<std::int64_t, max_rank> offset{0, 0, 0};
	std::array<std::int64_t, max_rank> stride{0, 0, 0};
	std::array<std::int64_t, max_rank> extent{0, 0, 0};
	bool bounds_check = true;

	bool valid() const { return data != nullptr; }

	/// Builds the canonical row-major view over a chunk covering `region`.
	static array_view over_region(std::byte* data, dtype type, const rect& region, bool bounds_check);

	std::int64_t element_index(const point& g) const {
		std::int64_t idx = 0;
		for(int k = 0; k < rank; ++k) {
			const std::int64_t local = g[k] - offset[static_cast<std::size_t>(k)];
			if(bounds_check && (local < 0 || local >= extent[static_cast<std::size_t>(k)])) {
				throw execution_error("kernel accessed index " + std::to_string(g[k]) + " outside the staged chunk on axis " + std::to_string(k));
			}
			idx += local * stride[static_cast<std::size_t>(k)];
		}
		return idx;
	}

	template <typename T>
	T& at(const point& g) const {
		return reinterpret_cast<T*>(data)[element_index(g)];
	}

	/// dtype-erased load/store as double (lossless for desk-scale integer values).
	double load(const point& g) const;
	void store(const point& g, double value) const;
	std::int64_t load_int(const point& g) const;
	void store_int(const point& g, std::int64_t value) const;
};

/// Everything a kernel body sees for one thread block: the virtualized block index, the
/// block extents, the launch grid, and the bound arguments.
struct kernel_context {
	point virtual_block; // block index in the global block grid
	point block_size;
	rect grid; // global thread space of the whole launch
	std::vector<std::int64_t> scalars_int;
	std::vector<double> scalars_float;
	std::vector<array_view> views;

	std::int64_t scalar_int(std::size_t param) const { return scalars_int.at(param); }
	double scalar_float(std::size_t param) const { return scalars_float.at(param); }
	const array_view& view(std::size_t param) const { return views.at(param); }

	/// Iterates the block's threads in lexicographic order, passing global thread indices.
	/// Threads outside the launch grid are skipped.
	void for_each_thread(const std::function<void(const point&)>& fn) const;
};

struct param_spec {
	enum class kind_t { scalar, array };
	std::string name;
	kind_t kind = kind_t::array;
	dtype type = dtype::f32;
	int rank = 1;          // arrays only
	bool writable = false; // arrays only; drives const-ness in generated wrappers

	static param_spec scalar(std::string name, dtype t);
	static param_spec array(std::string name, dtype t, int rank, bool writable);
};

/// A deterministic per-thread-block function plus its parameter signature.
struct kernel_def {
	std::string id;
	std::vector<param_spec> params;
	std::function<void(const kernel_context&)> body;
};

class kernel_registry {
  public:
	/// Registers all builtin kernels.
	static kernel_registry with_builtins();

	const std::string& register_kernel(kernel_def def);
	bool contains(const std::string& id) const { return m_kernels.count(id) != 0; }
	const kernel_def& get(const std::string& id) const;

  private:
	std::map<std::string, kernel_def> m_kernels;
};

/// Constants needed to instantiate a wrapper for one superblock on one device: the block
/// offset and each array argument's view geometry.
struct wrapper_instance {
	point block_offset;
	struct view_constants {
		std::vector<std::int64_t> offsets;
		std::vector<std::int64_t> strides;
	};
	std::vector<view_constants> array_views; // one per array param, in signature order
};

/// Emits CUDA-style wrapper source for a kernel: worker-specific offset/stride constants,
/// virtual-block-index construction, view construction by offset subtraction, and the
/// trailing call into the user function. Deterministic text for given inputs.
std::string generate_wrapper_source(const kernel_def& def, const wrapper_instance& inst);

/// Copies `region` (global coordinates, contained in both views) from src to dst.
void copy_region(const array_view& src, const array_view& dst, const rect& region);

/// Serializes `region` of the view into packed row-major bytes (little-endian element order).
std::vector<std::byte> pack_region(const array_view& view, const rect& region);

/// Writes packed row-major bytes produced by pack_region back into `region` of the view.
void unpack_region(const array_view& view, const rect& region, const std::vector<std::byte>& bytes);

} // namespace manta
