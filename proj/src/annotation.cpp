#include "manta/annotation.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace manta {

void linear_expr::add_term(const std::string& var, std::int64_t coeff) {
	for(auto& [name, c] : terms) {
		if(name == var) {
			c += coeff;
			if(c == 0) std::erase_if(terms, [&](const auto& t) { return t.first == var; });
			return;
		}
	}
	if(coeff != 0) terms.emplace_back(var, coeff);
}

interval linear_expr::evaluate(const std::map<std::string, interval>& env) const {
	interval acc{constant, constant};
	for(const auto& [var, coeff] : terms) {
		acc = acc + coeff * env.at(var);
	}
	return acc;
}

std::string to_string(const linear_expr& e) {
	std::ostringstream os;
	bool first = true;
	for(const auto& [var, coeff] : e.terms) {
		if(coeff < 0) {
			os << "-";
		} else if(!first) {
			os << "+";
		}
		const auto mag = coeff < 0 ? -coeff : coeff;
		if(mag != 1) os << mag << "*";
		os << var;
		first = false;
	}
	if(e.constant != 0 || first) {
		if(e.constant >= 0 && !first) os << "+";
		os << e.constant;
	}
	return os.str();
}

index_spec index_spec::make_single(linear_expr e) {
	index_spec s;
	s.kind = kind_t::single;
	s.single = std::move(e);
	return s;
}

index_spec index_spec::make_slice(std::optional<linear_expr> lower, std::optional<linear_expr> upper) {
	index_spec s;
	s.kind = kind_t::slice;
	s.slice_lower = std::move(lower);
	s.slice_upper = std::move(upper);
	return s;
}

std::string to_string(reduce_op op) {
	switch(op) {
	case reduce_op::plus: return "+";
	case reduce_op::times: return "*";
	case reduce_op::min: return "min";
	case reduce_op::max: return "max";
	}
	return "?";
}

std::string to_string(const access_mode& m) {
	switch(m.kind) {
	case access_mode::kind_t::read: return "read";
	case access_mode::kind_t::write: return "write";
	case access_mode::kind_t::readwrite: return "readwrite";
	case access_mode::kind_t::reduce: return "reduce(" + to_string(m.op) + ")";
	}
	return "?";
}

const access* access_annotation::find_access(const std::string& argument) const {
	for(const auto& a : accesses) {
		if(a.argument == argument) return &a;
	}
	return nullptr;
}

// --- lexer / parser ---------------------------------------------------------------------

namespace {

	struct token {
		enum class type_t { ident, integer, symbol, eof };
		type_t type = type_t::eof;
		std::string text;
		std::int64_t value = 0;
		int line = 1;
		int col = 1;
	};

	class lexer {
	  public:
		explicit lexer(const std::string& text) : m_text(text) { advance(); }

		const token& peek() const { return m_current; }

		token next() {
			token t = m_current;
			advance();
			return t;
		}

	  private:
		std::string m_text;
		std::size_t m_pos = 0;
		int m_line = 1;
		int m_col = 1;
		token m_current;

		[[noreturn]] void fail(int line, int col, const std::string& msg) const { throw parse_error(line, col, msg); }

		void advance() {
			while(m_pos < m_text.size() && std::isspace(static_cast<unsigned char>(m_text[m_pos]))) {
				bump();
			}
			m_current.line = m_line;
			m_current.col = m_col;
			if(m_pos >= m_text.size()) {
				m_current.type = token::type_t::eof;
				m_current.text = "<end of input>";
				return;
			}
			const char c = m_text[m_pos];
			if(std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
				std::string ident;
				while(m_pos < m_text.size() && (std::isalnum(static_cast<unsigned char>(m_text[m_pos])) || m_text[m_pos] == '_')) {
					ident += m_text[m_pos];
					bump();
				}
				m_current.type = token::type_t::ident;
				m_current.text = ident;
				return;
			}
			if(std::isdigit(static_cast<unsigned char>(c))) {
				std::int64_t value = 0;
				std::string digits;
				while(m_pos < m_text.size() && std::isdigit(static_cast<unsigned char>(m_text[m_pos]))) {
					digits += m_text[m_pos];
					if(__builtin_mul_overflow(value, std::int64_t{10}, &value)
					    || __builtin_add_overflow(value, std::int64_t{m_text[m_pos] - '0'}, &value)) {
						fail(m_current.line, m_current.col, "integer literal too large");
					}
					bump();
				}
				m_current.type = token::type_t::integer;
				m_current.text = digits;
				m_current.value = value;
				return;
			}
			if(c == '=' && m_pos + 1 < m_text.size() && m_text[m_pos + 1] == '>') {
				m_current.type = token::type_t::symbol;
				m_current.text = "=>";
				bump();
				bump();
				return;
			}
			if(std::string("[](),:+-*").find(c) != std::string::npos) {
				m_current.type = token::type_t::symbol;
				m_current.text = std::string(1, c);
				bump();
				return;
			}
			fail(m_line, m_col, std::string("unexpected character '") + c + "'");
		}

		void bump() {
			if(m_text[m_pos] == '\n') {
				++m_line;
				m_col = 1;
			} else {
				++m_col;
			}
			++m_pos;
		}
	};

	class parser {
	  public:
		explicit parser(const std::string& text) : m_lex(text) {}

		access_annotation parse() {
			access_annotation ann;
			ann.bindings.push_back(parse_binding());
			while(is_symbol(",")) {
				m_lex.next();
				ann.bindings.push_back(parse_binding());
			}
			expect_symbol("=>");
			// an empty access list is legal: compute-only kernels touch no arrays
			if(m_lex.peek().type != token::type_t::eof) {
				ann.accesses.push_back(parse_access());
				while(is_symbol(",")) {
					m_lex.next();
					ann.accesses.push_back(parse_access());
				}
			}
			const token& t = m_lex.peek();
			if(t.type != token::type_t::eof) fail(t, "expected end of annotation, got \"" + t.text + "\"");
			return ann;
		}

	  private:
		lexer m_lex;
		std::set<std::string> m_bound;

		[[noreturn]] void fail(const token& t, const std::string& msg) const { throw parse_error(t.line, t.col, msg); }

		bool is_symbol(const std::string& s) const { return m_lex.peek().type == token::type_t::symbol && m_lex.peek().text == s; }

		token expect_symbol(const std::string& s) {
			if(!is_symbol(s)) fail(m_lex.peek(), "expected \"" + s + "\", got \"" + m_lex.peek().text + "\"");
			return m_lex.next();
		}

		token expect_ident() {
			if(m_lex.peek().type != token::type_t::ident) fail(m_lex.peek(), "expected identifier, got \"" + m_lex.peek().text + "\"");
			return m_lex.next();
		}

		void bind_variable(const token& t) {
			if(!m_bound.insert(t.text).second) fail(t, "duplicate variable \"" + t.text + "\"");
		}

		binding parse_binding() {
			const token space = expect_ident();
			binding b;
			if(space.text == "global") {
				b.space = binding_space::global;
			} else if(space.text == "block") {
				b.space = binding_space::block;
			} else if(space.text == "local") {
				b.space = binding_space::local;
			} else {
				fail(space, "expected binding space (global, block or local), got \"" + space.text + "\"");
			}
			if(is_symbol("[")) {
				m_lex.next();
				for(;;) {
					const token var = expect_ident();
					bind_variable(var);
					b.variables.push_back(var.text);
					if(is_symbol("]")) {
						m_lex.next();
						break;
					}
					expect_symbol(",");
				}
			} else {
				const token var = expect_ident();
				bind_variable(var);
				b.variables.push_back(var.text);
			}
			if(b.variables.size() > max_rank) fail(space, "a binding may name at most 3 variables");
			return b;
		}

		access parse_access() {
			const token mode_tok = expect_ident();
			access a;
			if(mode_tok.text == "read") {
				a.mode.kind = access_mode::kind_t::read;
			} else if(mode_tok.text == "write") {
				a.mode.kind = access_mode::kind_t::write;
			} else if(mode_tok.text == "readwrite") {
				a.mode.kind = access_mode::kind_t::readwrite;
			} else if(mode_tok.text == "reduce") {
				a.mode.kind = access_mode::kind_t::reduce;
				expect_symbol("(");
				const token op = m_lex.next();
				if(op.type == token::type_t::symbol && op.text == "+") {
					a.mode.op = reduce_op::plus;
				} else if(op.type == token::type_t::symbol && op.text == "*") {
					a.mode.op = reduce_op::times;
				} else if(op.type == token::type_t::ident && op.text == "min") {
					a.mode.op = reduce_op::min;
				} else if(op.type == token::type_t::ident && op.text == "max") {
					a.mode.op = reduce_op::max;
				} else {
					fail(op, "reduce operator must be +, *, min or max");
				}
				expect_symbol(")");
			} else {
				fail(mode_tok, "expected access mode (read, write, readwrite or reduce), got \"" + mode_tok.text + "\"");
			}
			const token arg = expect_ident();
			a.argument = arg.text;
			if(!m_seen_arguments.insert(a.argument).second) fail(arg, "duplicate argument \"" + a.argument + "\"");
			expect_symbol("[");
			for(;;) {
				a.indices.push_back(parse_index());
				if(is_symbol("]")) {
					m_lex.next();
					break;
				}
				expect_symbol(",");
			}
			if(a.indices.size() > max_rank) fail(arg, "arrays have at most 3 axes");
			return a;
		}

		index_spec parse_index() {
			std::optional<linear_expr> lower;
			if(!is_symbol(":")) lower = parse_expr();
			if(is_symbol(":")) {
				m_lex.next();
				std::optional<linear_expr> upper;
				if(!is_symbol("]") && !is_symbol(",")) upper = parse_expr();
				return index_spec::make_slice(std::move(lower), std::move(upper));
			}
			return index_spec::make_single(std::move(*lower));
		}

		// expr := ['-'] term (('+'|'-') term)*
		linear_expr parse_expr() {
			linear_expr e;
			std::int64_t sign = 1;
			if(is_symbol("-")) {
				m_lex.next();
				sign = -1;
			} else if(is_symbol("+")) {
				m_lex.next();
			}
			parse_term(e, sign);
			while(is_symbol("+") || is_symbol("-")) {
				sign = m_lex.next().text == "+" ? 1 : -1;
				parse_term(e, sign);
			}
			return e;
		}

		// term := integer ['*' ident] | ident ['*' integer]
		void parse_term(linear_expr& e, std::int64_t sign) {
			const token& t = m_lex.peek();
			if(t.type == token::type_t::integer) {
				const token lit = m_lex.next();
				if(is_symbol("*")) {
					const token star = m_lex.next();
					const token& rhs = m_lex.peek();
					if(rhs.type == token::type_t::integer) fail(star, "constant products are not index expressions");
					const token var = expect_ident();
					check_bound(var);
					e.add_term(var.text, sign * lit.value);
				} else {
					e.constant += sign * lit.value;
				}
				return;
			}
			if(t.type == token::type_t::ident) {
				const token var = m_lex.next();
				check_bound(var);
				if(is_symbol("*")) {
					const token star = m_lex.next();
					const token& rhs = m_lex.peek();
					if(rhs.type == token::type_t::ident) {
						fail(star, "nonlinear expression: product of variables \"" + var.text + "\" and \"" + rhs.text + "\"");
					}
					if(rhs.type != token::type_t::integer) fail(star, "expected integer coefficient after \"*\"");
					const token lit = m_lex.next();
					e.add_term(var.text, sign * lit.value);
				} else {
					e.add_term(var.text, sign);
				}
				return;
			}
			fail(t, "expected index expression, got \"" + t.text + "\"");
		}

		void check_bound(const token& var) const {
			if(!m_bound.count(var.text)) fail(var, "unbound variable \"" + var.text + "\"");
		}

		std::set<std::string> m_seen_arguments;
	};

} // namespace

access_annotation parse_annotation(const std::string& text) { return parser(text).parse(); }

std::string to_string(const access_annotation& a) {
	std::ostringstream os;
	bool first = true;
	for(const auto& b : a.bindings) {
		if(!first) os << ", ";
		first = false;
		switch(b.space) {
		case binding_space::global: os << "global "; break;
		case binding_space::block: os << "block "; break;
		case binding_space::local: os << "local "; break;
		}
		if(b.variables.size() == 1) {
			os << b.variables[0];
		} else {
			os << "[";
			for(std::size_t i = 0; i < b.variables.size(); ++i) {
				os << (i ? ", " : "") << b.variables[i];
			}
			os << "]";
		}
	}
	os << " =>";
	first = true;
	for(const auto& acc : a.accesses) {
		os << (first ? " " : ", ");
		first = false;
		os << to_string(acc.mode) << " " << acc.argument << "[";
		for(std::size_t i = 0; i < acc.indices.size(); ++i) {
			if(i) os << ",";
			const auto& ix = acc.indices[i];
			if(ix.kind == index_spec::kind_t::single) {
				os << to_string(*ix.single);
			} else {
				if(ix.slice_lower) os << to_string(*ix.slice_lower);
				os << ":";
				if(ix.slice_upper) os << to_string(*ix.slice_upper);
			}
		}
		os << "]";
	}
	return os.str();
}

// --- evaluation -------------------------------------------------------------------------

namespace {

	std::map<std::string, interval> build_environment(const access_annotation& annotation, const rect& superblock_threads, const point& block_size) {
		std::map<std::string, interval> env;
		for(const auto& b : annotation.bindings) {
			if(static_cast<int>(b.variables.size()) > superblock_threads.rank()) {
				throw validation_error("binding names more variables than the launch grid has axes");
			}
			for(std::size_t i = 0; i < b.variables.size(); ++i) {
				const int axis = static_cast<int>(i);
				interval value;
				switch(b.space) {
				case binding_space::global: value = {superblock_threads.lo[axis], superblock_threads.hi[axis] - 1}; break;
				case binding_space::block:
					value = {superblock_threads.lo[axis] / block_size[axis], (superblock_threads.hi[axis] - 1) / block_size[axis]};
					break;
				case binding_space::local: value = {0, block_size[axis] - 1}; break;
				}
				env.emplace(b.variables[i], value);
			}
		}
		return env;
	}

} // namespace

std::vector<access_region> evaluate_region(const access_annotation& annotation, const rect& superblock_threads, const point& block_size,
    const std::map<std::string, rect>& array_domains) {
	if(superblock_threads.is_empty()) throw validation_error("superblock is empty");
	for(int k = 0; k < block_size.rank; ++k) {
		if(block_size[k] <= 0) throw validation_error("block size must be positive");
	}
	const auto env = build_environment(annotation, superblock_threads, block_size);

	std::vector<access_region> result;
	result.reserve(annotation.accesses.size());
	for(const auto& acc : annotation.accesses) {
		const auto domain_it = array_domains.find(acc.argument);
		if(domain_it == array_domains.end()) throw validation_error("no array domain provided for argument \"" + acc.argument + "\"");
		const rect& domain = domain_it->second;
		if(static_cast<int>(acc.indices.size()) != domain.rank()) {
			throw validation_error("argument \"" + acc.argument + "\" is indexed with " + std::to_string(acc.indices.size()) + " axes but has rank "
			                       + std::to_string(domain.rank()));
		}
		point lo = point::zeros(domain.rank());
		point hi = point::zeros(domain.rank());
		bool empty = false;
		for(int axis = 0; axis < domain.rank(); ++axis) {
			const auto& ix = acc.indices[static_cast<std::size_t>(axis)];
			interval span;
			if(ix.kind == index_spec::kind_t::single) {
				span = ix.single->evaluate(env);
			} else {
				const std::int64_t lower = ix.slice_lower ? ix.slice_lower->evaluate(env).lo : domain.lo[axis];
				const std::int64_t upper = ix.slice_upper ? ix.slice_upper->evaluate(env).hi : domain.hi[axis] - 1;
				span = {lower, upper};
				if(ix.slice_lower && ix.slice_upper) {
					// a slice whose computed lower bound exceeds its upper bound for every
					// thread is empty; fold lower-upper into one expression so correlated
					// variables cancel exactly
					linear_expr diff = *ix.slice_lower;
					diff.constant -= ix.slice_upper->constant;
					for(const auto& [var, coeff] : ix.slice_upper->terms) {
						diff.add_term(var, -coeff);
					}
					if(diff.evaluate(env).lo > 0) span = interval::empty();
				}
			}
			if(span.is_empty()) {
				empty = true;
				break;
			}
			lo[axis] = span.lo;
			hi[axis] = span.hi + 1; // inclusive -> half-open
		}
		rect region = empty ? rect::empty(domain.rank()) : clip(rect(lo, hi), domain);
		result.push_back(access_region{acc.argument, acc.mode, region});
	}
	return result;
}

std::string to_string(const write_conflict& c) {
	return "superblocks " + std::to_string(c.superblock_a) + " and " + std::to_string(c.superblock_b) + " both write \"" + c.argument + "\" on "
	       + to_string(c.overlap);
}

std::optional<write_conflict> check_write_disjointness(const std::vector<std::vector<access_region>>& per_superblock) {
	for(std::size_t a = 0; a < per_superblock.size(); ++a) {
		for(std::size_t b = a + 1; b < per_superblock.size(); ++b) {
			for(const auto& ra : per_superblock[a]) {
				if(!ra.mode.is_write() || ra.mode.is_reduce()) continue;
				for(const auto& rb : per_superblock[b]) {
					if(rb.argument != ra.argument || !rb.mode.is_write() || rb.mode.is_reduce()) continue;
					const rect overlap = intersect(ra.region, rb.region);
					if(!overlap.is_empty()) return write_conflict{a, b, ra.argument, overlap};
				}
			}
		}
	}
	return std::nullopt;
}

} // namespace manta
