#include "manta/kernels.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace manta {

array_view array_view::over_region(std::byte* data, dtype type, const rect& region, bool bounds_check) {
	array_view v;
	v.data = data;
	v.type = type;
	v.rank = region.rank();
	v.bounds_check = bounds_check;
	std::int64_t stride = 1;
	for(int k = region.rank() - 1; k >= 0; --k) {
		v.offset[static_cast<std::size_t>(k)] = region.lo[k];
		v.extent[static_cast<std::size_t>(k)] = region.extent(k);
		v.stride[static_cast<std::size_t>(k)] = stride;
		stride *= region.extent(k);
	}
	return v;
}

double array_view::load(const point& g) const {
	return dispatch_dtype(type, [&](auto tag) -> double { return static_cast<double>(at<decltype(tag)>(g)); });
}

void array_view::store(const point& g, double value) const {
	dispatch_dtype(type, [&](auto tag) { at<decltype(tag)>(g) = static_cast<decltype(tag)>(value); });
}

std::int64_t array_view::load_int(const point& g) const {
	return dispatch_dtype(type, [&](auto tag) -> std::int64_t { return static_cast<std::int64_t>(at<decltype(tag)>(g)); });
}

void array_view::store_int(const point& g, std::int64_t value) const {
	dispatch_dtype(type, [&](auto tag) { at<decltype(tag)>(g) = static_cast<decltype(tag)>(value); });
}

void kernel_context::for_each_thread(const std::function<void(const point&)>& fn) const {
	const int rank = block_size.rank;
	point local = point::zeros(rank);
	const std::function<void(int)> recurse = [&](int axis) {
		if(axis == rank) {
			point g = point::zeros(rank);
			for(int k = 0; k < rank; ++k) {
				g[k] = virtual_block[k] * block_size[k] + local[k];
				if(g[k] < grid.lo[k] || g[k] >= grid.hi[k]) return;
			}
			fn(g);
			return;
		}
		for(local[axis] = 0; local[axis] < block_size[axis]; ++local[axis]) {
			recurse(axis + 1);
		}
	};
	recurse(0);
}

param_spec param_spec::scalar(std::string name, dtype t) {
	param_spec p;
	p.name = std::move(name);
	p.kind = kind_t::scalar;
	p.type = t;
	p.rank = 0;
	return p;
}

param_spec param_spec::array(std::string name, dtype t, int rank, bool writable) {
	param_spec p;
	p.name = std::move(name);
	p.kind = kind_t::array;
	p.type = t;
	p.rank = rank;
	p.writable = writable;
	return p;
}

const std::string& kernel_registry::register_kernel(kernel_def def) {
	if(def.id.empty()) throw validation_error("kernel id must not be empty");
	for(const auto& p : def.params) {
		if(p.kind == param_spec::kind_t::array && (p.rank < 1 || p.rank > max_rank)) {
			throw validation_error("kernel \"" + def.id + "\" parameter \"" + p.name + "\" has unsupported rank");
		}
	}
	const auto [it, inserted] = m_kernels.emplace(def.id, std::move(def));
	if(!inserted) throw validation_error("kernel \"" + it->first + "\" is already registered");
	return it->first;
}

const kernel_def& kernel_registry::get(const std::string& id) const {
	const auto it = m_kernels.find(id);
	if(it == m_kernels.end()) throw plan_error("unknown kernel \"" + id + "\"");
	return it->second;
}

// --- builtin kernels ----------------------------------------------------------------------

namespace {

	std::uint64_t mix64(std::uint64_t h) {
		h ^= h >> 33;
		h *= 0xff51afd7ed558ccdULL;
		h ^= h >> 33;
		h *= 0xc4ceb9fe1a85ec53ULL;
		h ^= h >> 33;
		return h;
	}

	kernel_def make_fill() {
		kernel_def def;
		def.id = "fill";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::scalar("value", dtype::f64), param_spec::array("out", dtype::f32, 1, true)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const double value = ctx.scalar_float(1);
			const auto& out = ctx.view(2);
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= n) return;
				out.store(g, value);
			});
		};
		return def;
	}

	kernel_def make_axpy() {
		kernel_def def;
		def.id = "axpy";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::scalar("a", dtype::f64), param_spec::scalar("b", dtype::f64),
		    param_spec::array("y", dtype::f64, 1, true), param_spec::array("x", dtype::f64, 1, false)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const double a = ctx.scalar_float(1);
			const double b = ctx.scalar_float(2);
			const auto& y = ctx.view(3);
			const auto& x = ctx.view(4);
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= n) return;
				y.store(g, a * x.load(g) + b);
			});
		};
		return def;
	}

	kernel_def make_stencil1d() {
		kernel_def def;
		def.id = "stencil1d";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::array("output", dtype::f32, 1, true), param_spec::array("input", dtype::f32, 1, false)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const auto& output = ctx.view(1);
			const auto& input = ctx.view(2);
			ctx.for_each_thread([&](const point& g) {
				const std::int64_t i = g[0];
				if(i >= n) return;
				const float left = i - 1 >= 0 ? input.at<float>({i - 1}) : 0;
				const float mid = input.at<float>({i});
				const float right = i + 1 < n ? input.at<float>({i + 1}) : 0;
				output.at<float>({i}) = (left + mid + right) / 3.0f;
			});
		};
		return def;
	}

	kernel_def make_matmul() {
		kernel_def def;
		def.id = "matmul";
		def.params = {param_spec::scalar("m", dtype::i64), param_spec::scalar("n", dtype::i64), param_spec::scalar("k", dtype::i64),
		    param_spec::array("C", dtype::f32, 2, true), param_spec::array("A", dtype::f32, 2, false), param_spec::array("B", dtype::f32, 2, false)};
		def.body = [](const kernel_context& ctx) {
			const auto m = ctx.scalar_int(0);
			const auto n = ctx.scalar_int(1);
			const auto k = ctx.scalar_int(2);
			const auto& c = ctx.view(3);
			const auto& a = ctx.view(4);
			const auto& b = ctx.view(5);
			ctx.for_each_thread([&](const point& g) {
				const std::int64_t i = g[0], j = g[1];
				if(i >= m || j >= n) return;
				dispatch_dtype(c.type, [&](auto tag) {
					using T = decltype(tag);
					T acc{};
					for(std::int64_t l = 0; l < k; ++l) {
						acc += a.at<T>({i, l}) * b.at<T>({l, j});
					}
					c.at<T>({i, j}) = acc;
				});
			});
		};
		return def;
	}

	kernel_def make_row_reduce() {
		kernel_def def;
		def.id = "row_reduce";
		def.params = {param_spec::scalar("rows", dtype::i64), param_spec::scalar("cols", dtype::i64), param_spec::array("A", dtype::f32, 2, false),
		    param_spec::array("sums", dtype::f32, 1, true)};
		def.body = [](const kernel_context& ctx) {
			const auto rows = ctx.scalar_int(0);
			const auto cols = ctx.scalar_int(1);
			const auto& a = ctx.view(2);
			const auto& sums = ctx.view(3);
			ctx.for_each_thread([&](const point& g) {
				const std::int64_t i = g[0], j = g[1];
				if(i >= rows || j >= cols) return;
				dispatch_dtype(sums.type, [&](auto tag) {
					using T = decltype(tag);
					sums.at<T>({i}) += a.at<T>({i, j});
				});
			});
		};
		return def;
	}

	kernel_def make_spmv_ell() {
		kernel_def def;
		def.id = "spmv_ell";
		def.params = {param_spec::scalar("rows", dtype::i64), param_spec::scalar("width", dtype::i64), param_spec::array("y", dtype::f32, 1, true),
		    param_spec::array("vals", dtype::f32, 2, false), param_spec::array("cols", dtype::i64, 2, false), param_spec::array("x", dtype::f32, 1, false)};
		def.body = [](const kernel_context& ctx) {
			const auto rows = ctx.scalar_int(0);
			const auto width = ctx.scalar_int(1);
			const auto& y = ctx.view(2);
			const auto& vals = ctx.view(3);
			const auto& cols = ctx.view(4);
			const auto& x = ctx.view(5);
			ctx.for_each_thread([&](const point& g) {
				const std::int64_t i = g[0];
				if(i >= rows) return;
				dispatch_dtype(y.type, [&](auto tag) {
					using T = decltype(tag);
					T acc{};
					for(std::int64_t t = 0; t < width; ++t) {
						const std::int64_t col = cols.at<std::int64_t>({i, t});
						if(col >= 0) acc += vals.at<T>({i, t}) * x.at<T>({col});
					}
					y.at<T>({i}) = acc;
				});
			});
		};
		return def;
	}

	kernel_def make_blackscholes_like() {
		kernel_def def;
		def.id = "blackscholes_like";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::array("price", dtype::f64, 1, true), param_spec::array("spot", dtype::f64, 1, false)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const auto& price = ctx.view(1);
			const auto& spot = ctx.view(2);
			constexpr double strike = 100.0, rate = 0.05, sigma = 0.2, expiry = 1.0;
			const auto cnd = [](double x) { return 0.5 * (1.0 + std::erf(x / std::sqrt(2.0))); };
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= n) return;
				const double s = spot.at<double>(g) + 1.0; // keep strictly positive
				const double d1 = (std::log(s / strike) + (rate + 0.5 * sigma * sigma) * expiry) / (sigma * std::sqrt(expiry));
				const double d2 = d1 - sigma * std::sqrt(expiry);
				price.at<double>(g) = s * cnd(d1) - strike * std::exp(-rate * expiry) * cnd(d2);
			});
		};
		return def;
	}

	kernel_def make_kmeans_assign() {
		kernel_def def;
		def.id = "kmeans_assign";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::scalar("k", dtype::i64), param_spec::scalar("d", dtype::i64),
		    param_spec::array("assign", dtype::i64, 1, true), param_spec::array("points", dtype::i64, 2, false),
		    param_spec::array("centroids", dtype::i64, 2, false)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const auto k = ctx.scalar_int(1);
			const auto d = ctx.scalar_int(2);
			const auto& assign = ctx.view(3);
			const auto& points = ctx.view(4);
			const auto& centroids = ctx.view(5);
			ctx.for_each_thread([&](const point& g) {
				const std::int64_t i = g[0];
				if(i >= n) return;
				std::int64_t best = 0;
				std::int64_t best_dist = std::numeric_limits<std::int64_t>::max();
				for(std::int64_t c = 0; c < k; ++c) {
					std::int64_t dist = 0;
					for(std::int64_t t = 0; t < d; ++t) {
						const std::int64_t diff = points.at<std::int64_t>({i, t}) - centroids.at<std::int64_t>({c, t});
						dist += diff * diff;
					}
					if(dist < best_dist) {
						best_dist = dist;
						best = c;
					}
				}
				assign.at<std::int64_t>({i}) = best;
			});
		};
		return def;
	}

	kernel_def make_kmeans_update() {
		kernel_def def;
		def.id = "kmeans_update";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::scalar("d", dtype::i64), param_spec::array("points", dtype::i64, 2, false),
		    param_spec::array("assign", dtype::i64, 1, false), param_spec::array("sums", dtype::i64, 2, true), param_spec::array("counts", dtype::i64, 1, true)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const auto d = ctx.scalar_int(1);
			const auto& points = ctx.view(2);
			const auto& assign = ctx.view(3);
			const auto& sums = ctx.view(4);
			const auto& counts = ctx.view(5);
			ctx.for_each_thread([&](const point& g) {
				const std::int64_t i = g[0];
				if(i >= n) return;
				const std::int64_t c = assign.at<std::int64_t>({i});
				for(std::int64_t t = 0; t < d; ++t) {
					sums.at<std::int64_t>({c, t}) += points.at<std::int64_t>({i, t});
				}
				counts.at<std::int64_t>({c}) += 1;
			});
		};
		return def;
	}

	kernel_def make_kmeans_finalize() {
		kernel_def def;
		def.id = "kmeans_finalize";
		def.params = {param_spec::scalar("k", dtype::i64), param_spec::scalar("d", dtype::i64), param_spec::array("centroids", dtype::i64, 2, true),
		    param_spec::array("sums", dtype::i64, 2, false), param_spec::array("counts", dtype::i64, 1, false)};
		def.body = [](const kernel_context& ctx) {
			const auto k = ctx.scalar_int(0);
			const auto d = ctx.scalar_int(1);
			const auto& centroids = ctx.view(2);
			const auto& sums = ctx.view(3);
			const auto& counts = ctx.view(4);
			ctx.for_each_thread([&](const point& g) {
				const std::int64_t c = g[0], t = g[1];
				if(c >= k || t >= d) return;
				const std::int64_t count = counts.at<std::int64_t>({c});
				if(count > 0) centroids.at<std::int64_t>({c, t}) = sums.at<std::int64_t>({c, t}) / count;
			});
		};
		return def;
	}

	kernel_def make_md5_like() {
		kernel_def def;
		def.id = "md5_like";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::scalar("rounds", dtype::i64), param_spec::scalar("target", dtype::i64)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const auto rounds = ctx.scalar_int(1);
			const auto target = static_cast<std::uint64_t>(ctx.scalar_int(2));
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= n) return;
				auto h = static_cast<std::uint64_t>(g[0]);
				for(std::int64_t r = 0; r < rounds; ++r) {
					h = mix64(h + static_cast<std::uint64_t>(r));
				}
				volatile bool found = h == target;
				(void)found;
			});
		};
		return def;
	}

	kernel_def make_nbody_like() {
		kernel_def def;
		def.id = "nbody_like";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::scalar("d", dtype::i64), param_spec::array("force", dtype::f64, 2, true),
		    param_spec::array("pos", dtype::f64, 2, false)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const auto d = ctx.scalar_int(1);
			const auto& force = ctx.view(2);
			const auto& pos = ctx.view(3);
			ctx.for_each_thread([&](const point& g) {
				const std::int64_t i = g[0];
				if(i >= n) return;
				double acc[max_rank] = {0, 0, 0};
				for(std::int64_t j = 0; j < n; ++j) {
					if(j == i) continue;
					double dist2 = 1e-3; // softening
					for(std::int64_t t = 0; t < d; ++t) {
						const double diff = pos.at<double>({j, t}) - pos.at<double>({i, t});
						dist2 += diff * diff;
					}
					const double inv = 1.0 / (dist2 * std::sqrt(dist2));
					for(std::int64_t t = 0; t < d; ++t) {
						acc[t] += (pos.at<double>({j, t}) - pos.at<double>({i, t})) * inv;
					}
				}
				for(std::int64_t t = 0; t < d; ++t) {
					force.at<double>({i, t}) = acc[t];
				}
			});
		};
		return def;
	}

	kernel_def make_scale3d() {
		kernel_def def;
		def.id = "scale3d";
		def.params = {param_spec::scalar("n0", dtype::i64), param_spec::scalar("n1", dtype::i64), param_spec::scalar("n2", dtype::i64),
		    param_spec::array("out", dtype::i64, 3, true), param_spec::array("in", dtype::i64, 3, false)};
		def.body = [](const kernel_context& ctx) {
			const auto n0 = ctx.scalar_int(0);
			const auto n1 = ctx.scalar_int(1);
			const auto n2 = ctx.scalar_int(2);
			const auto& out = ctx.view(3);
			const auto& in = ctx.view(4);
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= n0 || g[1] >= n1 || g[2] >= n2) return;
				// wrapping arithmetic: inputs may span the full integer range
				const auto v = static_cast<std::uint64_t>(in.at<std::int64_t>(g));
				out.at<std::int64_t>(g) = static_cast<std::int64_t>(2 * v + 1);
			});
		};
		return def;
	}

	// deterministic bounded test patterns (array fills only support 0 and 1)
	kernel_def make_ipattern1d() {
		kernel_def def;
		def.id = "ipattern1d";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::scalar("mod", dtype::i64), param_spec::array("out", dtype::i64, 1, true)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const auto mod = ctx.scalar_int(1);
			const auto& out = ctx.view(2);
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= n) return;
				out.at<std::int64_t>(g) = (g[0] * 31 + 7) % mod;
			});
		};
		return def;
	}

	kernel_def make_ipattern2d() {
		kernel_def def;
		def.id = "ipattern2d";
		def.params = {param_spec::scalar("rows", dtype::i64), param_spec::scalar("cols", dtype::i64), param_spec::scalar("mod", dtype::i64),
		    param_spec::array("out", dtype::i64, 2, true)};
		def.body = [](const kernel_context& ctx) {
			const auto rows = ctx.scalar_int(0);
			const auto cols = ctx.scalar_int(1);
			const auto mod = ctx.scalar_int(2);
			const auto& out = ctx.view(3);
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= rows || g[1] >= cols) return;
				out.at<std::int64_t>(g) = (g[0] * 31 + g[1] * 17 + 7) % mod;
			});
		};
		return def;
	}

	kernel_def make_ramp1d() {
		kernel_def def;
		def.id = "ramp1d";
		def.params = {param_spec::scalar("n", dtype::i64), param_spec::scalar("mod", dtype::i64), param_spec::scalar("base", dtype::f64),
		    param_spec::scalar("scale", dtype::f64), param_spec::array("out", dtype::f64, 1, true)};
		def.body = [](const kernel_context& ctx) {
			const auto n = ctx.scalar_int(0);
			const auto mod = ctx.scalar_int(1);
			const double base = ctx.scalar_float(2);
			const double scale = ctx.scalar_float(3);
			const auto& out = ctx.view(4);
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= n) return;
				out.at<double>(g) = base + scale * static_cast<double>((g[0] * 31 + 7) % mod) / static_cast<double>(mod);
			});
		};
		return def;
	}

	kernel_def make_ramp2d() {
		kernel_def def;
		def.id = "ramp2d";
		def.params = {param_spec::scalar("rows", dtype::i64), param_spec::scalar("cols", dtype::i64), param_spec::scalar("mod", dtype::i64),
		    param_spec::scalar("base", dtype::f64), param_spec::scalar("scale", dtype::f64), param_spec::array("out", dtype::f64, 2, true)};
		def.body = [](const kernel_context& ctx) {
			const auto rows = ctx.scalar_int(0);
			const auto cols = ctx.scalar_int(1);
			const auto mod = ctx.scalar_int(2);
			const double base = ctx.scalar_float(3);
			const double scale = ctx.scalar_float(4);
			const auto& out = ctx.view(5);
			ctx.for_each_thread([&](const point& g) {
				if(g[0] >= rows || g[1] >= cols) return;
				out.at<double>(g) = base + scale * static_cast<double>((g[0] * 31 + g[1] * 17 + 7) % mod) / static_cast<double>(mod);
			});
		};
		return def;
	}

} // namespace

kernel_registry kernel_registry::with_builtins() {
	kernel_registry reg;
	reg.register_kernel(make_fill());
	reg.register_kernel(make_axpy());
	reg.register_kernel(make_stencil1d());
	reg.register_kernel(make_matmul());
	reg.register_kernel(make_row_reduce());
	reg.register_kernel(make_spmv_ell());
	reg.register_kernel(make_blackscholes_like());
	reg.register_kernel(make_kmeans_assign());
	reg.register_kernel(make_kmeans_update());
	reg.register_kernel(make_kmeans_finalize());
	reg.register_kernel(make_md5_like());
	reg.register_kernel(make_nbody_like());
	reg.register_kernel(make_scale3d());
	reg.register_kernel(make_ipattern1d());
	reg.register_kernel(make_ipattern2d());
	reg.register_kernel(make_ramp1d());
	reg.register_kernel(make_ramp2d());
	return reg;
}

// --- wrapper generation ---------------------------------------------------------------------

namespace {

	const char* scalar_ctype(dtype t) {
		switch(t) {
		case dtype::i32: return "int32_t";
		case dtype::i64: return "int64_t";
		case dtype::f32: return "float";
		case dtype::f64: return "double";
		}
		return "?";
	}

} // namespace

std::string generate_wrapper_source(const kernel_def& def, const wrapper_instance& inst) {
	std::ostringstream os;
	os << "extern \"C\" __global__ void " << def.id << "_wrapper(\n";
	for(std::size_t i = 0; i < def.params.size(); ++i) {
		const auto& p = def.params[i];
		os << "  ";
		if(p.kind == param_spec::kind_t::scalar) {
			os << scalar_ctype(p.type) << " " << p.name;
		} else {
			if(!p.writable) os << "const ";
			os << scalar_ctype(p.type) << " *const " << p.name << "_ptr";
		}
		os << (i + 1 < def.params.size() ? ",\n" : "\n");
	}
	os << ") {\n";
	os << "  // Worker-specific constants\n";
	os << "  const uint32_t block_offset_x = " << (inst.block_offset.rank > 0 ? inst.block_offset[0] : 0) << ", block_offset_y = "
	   << (inst.block_offset.rank > 1 ? inst.block_offset[1] : 0) << ", block_offset_z = " << (inst.block_offset.rank > 2 ? inst.block_offset[2] : 0)
	   << ";\n";
	std::size_t view_index = 0;
	for(const auto& p : def.params) {
		if(p.kind != param_spec::kind_t::array) continue;
		const auto& vc = inst.array_views.at(view_index++);
		os << "  const size_t ";
		for(int k = 0; k < p.rank; ++k) {
			os << (k ? ", " : "") << p.name << "_offset_" << k << " = " << vc.offsets.at(static_cast<std::size_t>(k)) << ", " << p.name << "_strides_" << k
			   << " = " << vc.strides.at(static_cast<std::size_t>(k));
		}
		os << ";\n";
	}
	os << "\n";
	os << "  // Prepare arguments\n";
	os << "  dim3 virtual_block_index(block_offset_x + blockIdx.x,\n";
	os << "    block_offset_y + blockIdx.y, block_offset_z + blockIdx.z);\n";
	for(const auto& p : def.params) {
		if(p.kind != param_spec::kind_t::array) continue;
		os << "  ";
		if(!p.writable) os << "const ";
		os << "::manta::Array<" << scalar_ctype(p.type) << ", " << p.rank << "> " << p.name << "(\n";
		os << "    " << p.name << "_ptr";
		for(int k = 0; k < p.rank; ++k) {
			os << " - " << p.name << "_offset_" << k << " * " << p.name << "_strides_" << k;
		}
		os << ", {";
		for(int k = 0; k < p.rank; ++k) {
			os << (k ? ", " : "") << p.name << "_strides_" << k;
		}
		os << "});\n";
	}
	os << "\n";
	os << "  // Call user kernel\n";
	os << "  " << def.id << "(virtual_block_index";
	for(const auto& p : def.params) {
		os << ", " << p.name;
	}
	os << ");\n";
	os << "}\n";
	return os.str();
}

// --- region copies ----------------------------------------------------------------------------

void copy_region(const array_view& src, const array_view& dst, const rect& region) {
	if(region.is_empty()) return;
	const auto elem = dtype_size(src.type);
	if(src.type != dst.type) throw execution_error("copy between chunks of different element types");
	for_each_row(region, [&](const point& row, std::int64_t len) {
		const auto* from = src.data + static_cast<std::size_t>(src.element_index(row)) * elem;
		auto* to = dst.data + static_cast<std::size_t>(dst.element_index(row)) * elem;
		std::memcpy(to, from, static_cast<std::size_t>(len) * elem);
	});
}

std::vector<std::byte> pack_region(const array_view& view, const rect& region) {
	const auto elem = dtype_size(view.type);
	std::vector<std::byte> bytes(static_cast<std::size_t>(region.volume()) * elem);
	std::size_t cursor = 0;
	for_each_row(region, [&](const point& row, std::int64_t len) {
		const auto* from = view.data + static_cast<std::size_t>(view.element_index(row)) * elem;
		std::memcpy(bytes.data() + cursor, from, static_cast<std::size_t>(len) * elem);
		cursor += static_cast<std::size_t>(len) * elem;
	});
	return bytes;
}

void unpack_region(const array_view& view, const rect& region, const std::vector<std::byte>& bytes) {
	const auto elem = dtype_size(view.type);
	if(bytes.size() != static_cast<std::size_t>(region.volume()) * elem) {
		throw execution_error("received payload size does not match the destination region");
	}
	std::size_t cursor = 0;
	for_each_row(region, [&](const point& row, std::int64_t len) {
		auto* to = view.data + static_cast<std::size_t>(view.element_index(row)) * elem;
		std::memcpy(to, bytes.data() + cursor, static_cast<std::size_t>(len) * elem);
		cursor += static_cast<std::size_t>(len) * elem;
	});
}

} // namespace manta
