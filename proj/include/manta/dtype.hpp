#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>

#include "errors.hpp"

namespace manta {

/// Element types a distributed array can hold.
enum class dtype { i32, i64, f32, f64 };

inline std::size_t dtype_size(dtype t) {
	switch(t) {
	case dtype::i32: return 4;
	case dtype::i64: return 8;
	case dtype::f32: return 4;
	case dtype::f64: return 8;
	}
	return 0;
}

inline std::string dtype_name(dtype t) {
	switch(t) {
	case dtype::i32: return "i32";
	case dtype::i64: return "i64";
	case dtype::f32: return "f32";
	case dtype::f64: return "f64";
	}
	return "?";
}

inline dtype dtype_from_name(const std::string& s) {
	if(s == "i32") return dtype::i32;
	if(s == "i64") return dtype::i64;
	if(s == "f32") return dtype::f32;
	if(s == "f64") return dtype::f64;
	throw validation_error("unknown element type \"" + s + "\"");
}

inline bool dtype_is_integral(dtype t) { return t == dtype::i32 || t == dtype::i64; }

/// Calls `fn` with a value-initialized instance of the C++ type behind `t`.
template <typename Fn>
decltype(auto) dispatch_dtype(dtype t, Fn&& fn) {
	switch(t) {
	case dtype::i32: return fn(std::int32_t{});
	case dtype::i64: return fn(std::int64_t{});
	case dtype::f32: return fn(float{});
	case dtype::f64: return fn(double{});
	}
	return fn(std::int32_t{}); // unreachable
}

} // namespace manta
