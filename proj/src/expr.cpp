#include "dershap/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numbers>

#include "dershap/errors.hpp"

namespace dershap::expr {

Dual sin(Dual a) { return {std::sin(a.v), std::cos(a.v) * a.d}; }
Dual cos(Dual a) { return {std::cos(a.v), -std::sin(a.v) * a.d}; }
Dual exp(Dual a) {
    double e = std::exp(a.v);
    return {e, e * a.d};
}
Dual log(Dual a) { return {std::log(a.v), a.d / a.v}; }
Dual sqrt(Dual a) {
    double s = std::sqrt(a.v);
    return {s, a.v == 0.0 ? (a.d == 0.0 ? 0.0 : std::copysign(INFINITY, a.d)) : 0.5 * a.d / s};
}
Dual abs(Dual a) {
    double s = a.v > 0.0 ? 1.0 : (a.v < 0.0 ? -1.0 : 0.0);
    return {std::fabs(a.v), s * a.d};
}

namespace {

constexpr std::array<std::string_view, 6> kFunctions = {"sin", "cos", "exp",
                                                        "log", "sqrt", "abs"};
constexpr std::array<std::string_view, 2> kConstants = {"pi", "e"};
constexpr std::array<double, 2> kConstantValues = {std::numbers::pi, std::numbers::e};

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

struct Token {
    enum Kind { Number, Ident, Plus, Minus, Star, Slash, Caret, LParen, RParen, Comma, End };
    Kind kind;
    double num = 0.0;
    std::string_view text;
    std::uint32_t pos = 0;  // 1-based byte offset
};

std::vector<Token> tokenize(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < src.size()) {
        char c = src[i];
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
            ++i;
            continue;
        }
        auto pos = static_cast<std::uint32_t>(i + 1);
        if (is_digit(c) || (c == '.' && i + 1 < src.size() && is_digit(src[i + 1]))) {
            std::size_t j = i;
            while (j < src.size() && is_digit(src[j])) ++j;
            if (j < src.size() && src[j] == '.') {
                ++j;
                while (j < src.size() && is_digit(src[j])) ++j;
            }
            if (j < src.size() && (src[j] == 'e' || src[j] == 'E')) {
                std::size_t k = j + 1;
                if (k < src.size() && (src[k] == '+' || src[k] == '-')) ++k;
                if (k < src.size() && is_digit(src[k])) {
                    while (k < src.size() && is_digit(src[k])) ++k;
                    j = k;
                }
            }
            double value = 0.0;
            auto res = std::from_chars(src.data() + i, src.data() + j, value);
            if (res.ec != std::errc() || res.ptr != src.data() + j) {
                throw ParseError("invalid numeric literal", pos);
            }
            out.push_back({Token::Number, value, src.substr(i, j - i), pos});
            i = j;
            continue;
        }
        if (is_ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && is_ident_char(src[j])) ++j;
            out.push_back({Token::Ident, 0.0, src.substr(i, j - i), pos});
            i = j;
            continue;
        }
        Token::Kind k;
        switch (c) {
            case '+': k = Token::Plus; break;
            case '-': k = Token::Minus; break;
            case '*': k = Token::Star; break;
            case '/': k = Token::Slash; break;
            case '^': k = Token::Caret; break;
            case '(': k = Token::LParen; break;
            case ')': k = Token::RParen; break;
            case ',': k = Token::Comma; break;
            default:
                throw ParseError(std::string("syntax error: unexpected character '") + c + "'",
                                 pos);
        }
        out.push_back({k, 0.0, src.substr(i, 1), pos});
        ++i;
    }
    out.push_back({Token::End, 0.0, {}, static_cast<std::uint32_t>(src.size() + 1)});
    return out;
}

struct Node {
    enum class Kind { Literal, NamedConst, Variable, Unary, Binary, Call };
    Kind kind;
    double literal = 0.0;
    int const_id = -1;
    int var_index = -1;
    char op = 0;
    int a = -1;
    int b = -1;
    int func = -1;
    std::uint32_t pos = 0;
};

int binary_prec(Token::Kind k) {
    switch (k) {
        case Token::Plus:
        case Token::Minus: return 1;
        case Token::Star:
        case Token::Slash: return 2;
        case Token::Caret: return 4;
        default: return 0;
    }
}
constexpr int kUnaryPrec = 3;

class Parser {
public:
    Parser(std::string_view src, const std::vector<std::string>& vars)
        : tokens_(tokenize(src)), vars_(vars) {}

    int parse_full(std::vector<Node>& nodes) {
        nodes_ = &nodes;
        int root = parse_expr(1);
        const Token& t = peek();
        if (t.kind != Token::End) {
            throw ParseError("syntax error: unexpected trailing input", t.pos);
        }
        return root;
    }

private:
    const Token& peek() const { return tokens_[cursor_]; }
    const Token& advance() { return tokens_[cursor_++]; }

    int add(Node n) {
        nodes_->push_back(n);
        return static_cast<int>(nodes_->size() - 1);
    }

    int parse_expr(int min_prec) {
        int lhs = parse_atom();
        for (;;) {
            const Token& t = peek();
            int prec = binary_prec(t.kind);
            if (prec == 0 || prec < min_prec) break;
            advance();
            // '^' is right-associative, everything else left-associative.
            int next_min = (t.kind == Token::Caret) ? prec : prec + 1;
            int rhs = parse_expr(next_min);
            Node n;
            n.kind = Node::Kind::Binary;
            n.op = t.text[0];
            n.a = lhs;
            n.b = rhs;
            n.pos = t.pos;
            lhs = add(n);
        }
        return lhs;
    }

    int parse_atom() {
        const Token& t = advance();
        switch (t.kind) {
            case Token::Number: {
                Node n;
                n.kind = Node::Kind::Literal;
                n.literal = t.num;
                n.pos = t.pos;
                return add(n);
            }
            case Token::Ident:
                return parse_ident(t);
            case Token::LParen: {
                int inner = parse_expr(1);
                const Token& close = peek();
                if (close.kind != Token::RParen) {
                    throw ParseError("syntax error: expected ')'", close.pos);
                }
                advance();
                return inner;
            }
            case Token::Minus: {
                int operand = parse_expr(kUnaryPrec + 1);
                Node n;
                n.kind = Node::Kind::Unary;
                n.op = '-';
                n.a = operand;
                n.pos = t.pos;
                return add(n);
            }
            case Token::End:
                throw ParseError("syntax error: unexpected end of input", t.pos);
            default:
                throw ParseError("syntax error: unexpected token '" + std::string(t.text) + "'",
                                 t.pos);
        }
    }

    int parse_ident(const Token& t) {
        for (std::size_t f = 0; f < kFunctions.size(); ++f) {
            if (t.text != kFunctions[f]) continue;
            const Token& open = peek();
            if (open.kind != Token::LParen) {
                throw ParseError("syntax error: expected '(' after function '" +
                                     std::string(t.text) + "'",
                                 open.pos);
            }
            advance();
            int arg = parse_expr(1);
            const Token& close = peek();
            if (close.kind == Token::Comma) {
                throw ParseError("arity mismatch: function '" + std::string(t.text) +
                                     "' takes exactly one argument",
                                 close.pos);
            }
            if (close.kind != Token::RParen) {
                throw ParseError("syntax error: expected ')'", close.pos);
            }
            advance();
            Node n;
            n.kind = Node::Kind::Call;
            n.func = static_cast<int>(f);
            n.a = arg;
            n.pos = t.pos;
            return add(n);
        }
        for (std::size_t c = 0; c < kConstants.size(); ++c) {
            if (t.text != kConstants[c]) continue;
            Node n;
            n.kind = Node::Kind::NamedConst;
            n.const_id = static_cast<int>(c);
            n.literal = kConstantValues[c];
            n.pos = t.pos;
            return add(n);
        }
        for (std::size_t v = 0; v < vars_.size(); ++v) {
            if (t.text != vars_[v]) continue;
            Node n;
            n.kind = Node::Kind::Variable;
            n.var_index = static_cast<int>(v);
            n.pos = t.pos;
            return add(n);
        }
        throw ParseError("unknown identifier '" + std::string(t.text) + "'", t.pos);
    }

    std::vector<Token> tokens_;
    std::size_t cursor_ = 0;
    const std::vector<std::string>& vars_;
    std::vector<Node>* nodes_ = nullptr;
};

std::string format_literal(double v) {
    if (v == std::floor(v) && std::fabs(v) < 1e15) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.0f", v);
        return buf;
    }
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

int node_prec(const std::vector<Node>& nodes, int idx) {
    const Node& n = nodes[static_cast<std::size_t>(idx)];
    switch (n.kind) {
        case Node::Kind::Binary:
            return (n.op == '^') ? 4 : (n.op == '*' || n.op == '/') ? 2 : 1;
        case Node::Kind::Unary: return kUnaryPrec;
        default: return 100;
    }
}

/// Emits text that reparses to the same tree shape: a child is
/// parenthesized when its precedence is lower, or equal on the side the
/// operator does not associate towards.
std::string render_node(const std::vector<Node>& nodes, int idx,
                        const std::vector<std::string>& vars) {
    const Node& n = nodes[static_cast<std::size_t>(idx)];
    switch (n.kind) {
        case Node::Kind::Literal: return format_literal(n.literal);
        case Node::Kind::NamedConst: return std::string(kConstants[static_cast<std::size_t>(n.const_id)]);
        case Node::Kind::Variable: return vars[static_cast<std::size_t>(n.var_index)];
        case Node::Kind::Call:
            return std::string(kFunctions[static_cast<std::size_t>(n.func)]) + "(" +
                   render_node(nodes, n.a, vars) + ")";
        case Node::Kind::Unary: {
            std::string inner = render_node(nodes, n.a, vars);
            if (node_prec(nodes, n.a) < kUnaryPrec) inner = "(" + inner + ")";
            return "-" + inner;
        }
        case Node::Kind::Binary: {
            int prec = node_prec(nodes, idx);
            bool right_assoc = (n.op == '^');
            std::string lhs = render_node(nodes, n.a, vars);
            std::string rhs = render_node(nodes, n.b, vars);
            int lp = node_prec(nodes, n.a);
            int rp = node_prec(nodes, n.b);
            if (lp < prec || (lp == prec && right_assoc)) lhs = "(" + lhs + ")";
            if (rp < prec || (rp == prec && !right_assoc)) rhs = "(" + rhs + ")";
            return lhs + n.op + rhs;
        }
    }
    return {};
}

bool integral_exponent(const std::vector<Node>& nodes, int idx, std::int32_t& out) {
    const Node& n = nodes[static_cast<std::size_t>(idx)];
    double v;
    if (n.kind == Node::Kind::Literal) {
        v = n.literal;
    } else if (n.kind == Node::Kind::Unary &&
               nodes[static_cast<std::size_t>(n.a)].kind == Node::Kind::Literal) {
        v = -nodes[static_cast<std::size_t>(n.a)].literal;
    } else {
        return false;
    }
    if (v != std::floor(v) || std::fabs(v) > 2147483000.0) return false;
    out = static_cast<std::int32_t>(v);
    return true;
}

/// x^n by binary exponentiation; the only primitive used is multiplication
/// so integer powers stay exact where the factors are.
double ipow(double x, std::int32_t n) {
    bool invert = n < 0;
    std::uint32_t e = invert ? static_cast<std::uint32_t>(-(std::int64_t)n)
                             : static_cast<std::uint32_t>(n);
    double acc = 1.0;
    double base = x;
    while (e != 0) {
        if (e & 1u) acc *= base;
        base *= base;
        e >>= 1;
    }
    return invert ? 1.0 / acc : acc;
}

}  // namespace

ExprAst ExprAst::parse(std::string_view text, std::vector<std::string> variables) {
    for (std::size_t i = 0; i < variables.size(); ++i) {
        const std::string& name = variables[i];
        bool wellformed = !name.empty() && is_ident_start(name[0]) &&
                          std::all_of(name.begin(), name.end(), is_ident_char);
        if (!wellformed) {
            throw ConfigError("invalid variable name '" + name + "'");
        }
        if (std::find(kFunctions.begin(), kFunctions.end(), name) != kFunctions.end() ||
            std::find(kConstants.begin(), kConstants.end(), name) != kConstants.end()) {
            throw ConfigError("variable name '" + name + "' shadows a builtin");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (variables[j] == name) {
                throw ConfigError("duplicate variable name '" + name + "'");
            }
        }
    }
    if (text.empty()) {
        throw ParseError("syntax error: empty expression", 1);
    }

    std::vector<Node> nodes;
    Parser parser(text, variables);
    int root = parser.parse_full(nodes);

    ExprAst ast;
    ast.text_ = std::string(text);
    ast.variables_ = std::move(variables);
    ast.rendered_ = render_node(nodes, root, ast.variables_);

    // Postfix compilation. The explicit stack mirrors evaluation order, so
    // instruction count equals visit count and max_stack_ is exact.
    struct Frame {
        int node;
        int stage;
    };
    std::vector<Frame> work{{root, 0}};
    std::size_t depth = 0;
    auto emit = [&ast, &depth](OpCode op, std::int32_t arg, std::uint32_t pos,
                               std::size_t pops, std::size_t pushes) {
        ast.tape_.push_back({op, arg, pos});
        depth -= pops;
        depth += pushes;
        ast.max_stack_ = std::max(ast.max_stack_, depth);
    };
    while (!work.empty()) {
        Frame f = work.back();
        work.pop_back();
        const Node& n = nodes[static_cast<std::size_t>(f.node)];
        switch (n.kind) {
            case Node::Kind::Literal:
            case Node::Kind::NamedConst: {
                auto idx = static_cast<std::int32_t>(ast.constants_.size());
                ast.constants_.push_back(n.literal);
                emit(OpCode::PushConst, idx, n.pos, 0, 1);
                break;
            }
            case Node::Kind::Variable:
                emit(OpCode::PushVar, n.var_index, n.pos, 0, 1);
                break;
            case Node::Kind::Unary:
                if (f.stage == 0) {
                    work.push_back({f.node, 1});
                    work.push_back({n.a, 0});
                } else {
                    emit(OpCode::Neg, 0, n.pos, 1, 1);
                }
                break;
            case Node::Kind::Call:
                if (f.stage == 0) {
                    work.push_back({f.node, 1});
                    work.push_back({n.a, 0});
                } else {
                    static constexpr OpCode kFuncOps[] = {OpCode::Sin, OpCode::Cos,
                                                          OpCode::Exp, OpCode::Log,
                                                          OpCode::Sqrt, OpCode::Abs};
                    emit(kFuncOps[static_cast<std::size_t>(n.func)], 0, n.pos, 1, 1);
                }
                break;
            case Node::Kind::Binary:
                if (f.stage == 0) {
                    std::int32_t exponent;
                    if (n.op == '^' && integral_exponent(nodes, n.b, exponent)) {
                        work.push_back({f.node, 2});
                        work.push_back({n.a, 0});
                        // Exponent value rides in the instruction; the
                        // exponent subtree is never evaluated.
                        break;
                    }
                    work.push_back({f.node, 1});
                    work.push_back({n.b, 0});
                    work.push_back({n.a, 0});
                } else if (f.stage == 2) {
                    std::int32_t exponent = 0;
                    integral_exponent(nodes, n.b, exponent);
                    emit(OpCode::PowInt, exponent, n.pos, 1, 1);
                } else {
                    OpCode op = OpCode::Add;
                    switch (n.op) {
                        case '+': op = OpCode::Add; break;
                        case '-': op = OpCode::Sub; break;
                        case '*': op = OpCode::Mul; break;
                        case '/': op = OpCode::Div; break;
                        case '^': op = OpCode::PowGen; break;
                    }
                    emit(op, 0, n.pos, 2, 1);
                }
                break;
        }
    }
    return ast;
}

double ExprAst::run_value(std::span<const double> point, std::vector<double>& stack) const {
    stack.resize(max_stack_);
    double* sp = stack.data();
    std::size_t top = 0;
    for (const Instr& ins : tape_) {
        switch (ins.op) {
            case OpCode::PushConst:
                sp[top++] = constants_[static_cast<std::size_t>(ins.arg)];
                break;
            case OpCode::PushVar:
                sp[top++] = point[static_cast<std::size_t>(ins.arg)];
                break;
            case OpCode::Add:
                --top;
                sp[top - 1] += sp[top];
                break;
            case OpCode::Sub:
                --top;
                sp[top - 1] -= sp[top];
                break;
            case OpCode::Mul:
                --top;
                sp[top - 1] *= sp[top];
                break;
            case OpCode::Div:
                --top;
                if (sp[top] == 0.0) throw DomainError("division by zero", ins.pos);
                sp[top - 1] /= sp[top];
                break;
            case OpCode::Neg:
                sp[top - 1] = -sp[top - 1];
                break;
            case OpCode::PowInt: {
                double v = sp[top - 1];
                if (v == 0.0 && ins.arg < 0) {
                    throw DomainError("zero raised to a negative power", ins.pos);
                }
                sp[top - 1] = ipow(v, ins.arg);
                break;
            }
            case OpCode::PowGen: {
                --top;
                double base = sp[top - 1];
                if (base <= 0.0) {
                    throw DomainError("power with nonpositive base", ins.pos);
                }
                sp[top - 1] = std::pow(base, sp[top]);
                break;
            }
            case OpCode::Sin: sp[top - 1] = std::sin(sp[top - 1]); break;
            case OpCode::Cos: sp[top - 1] = std::cos(sp[top - 1]); break;
            case OpCode::Exp: sp[top - 1] = std::exp(sp[top - 1]); break;
            case OpCode::Log:
                if (sp[top - 1] <= 0.0) throw DomainError("log of nonpositive value", ins.pos);
                sp[top - 1] = std::log(sp[top - 1]);
                break;
            case OpCode::Sqrt:
                if (sp[top - 1] < 0.0) throw DomainError("sqrt of negative value", ins.pos);
                sp[top - 1] = std::sqrt(sp[top - 1]);
                break;
            case OpCode::Abs: sp[top - 1] = std::fabs(sp[top - 1]); break;
        }
    }
    return sp[0];
}

double ExprAst::run_gradient(std::span<const double> point, std::span<double> gradient,
                             std::vector<double>& frames) const {
    const std::size_t d = variables_.size();
    const std::size_t lanes = 1 + d;
    frames.resize(max_stack_ * lanes);
    double* base = frames.data();
    std::size_t top = 0;  // in frame units

    for (const Instr& ins : tape_) {
        // Unary ops act in place on the top frame.
        double* a = top >= 1 ? base + (top - 1) * lanes : nullptr;
        switch (ins.op) {
            case OpCode::PushConst: {
                double* f = base + top * lanes;
                std::fill(f, f + lanes, 0.0);
                f[0] = constants_[static_cast<std::size_t>(ins.arg)];
                ++top;
                break;
            }
            case OpCode::PushVar: {
                double* f = base + top * lanes;
                std::fill(f, f + lanes, 0.0);
                f[0] = point[static_cast<std::size_t>(ins.arg)];
                f[1 + static_cast<std::size_t>(ins.arg)] = 1.0;
                ++top;
                break;
            }
            case OpCode::Add: {
                --top;
                double* lhs = base + (top - 1) * lanes;
                double* rhs = base + top * lanes;
                for (std::size_t l = 0; l < lanes; ++l) lhs[l] += rhs[l];
                break;
            }
            case OpCode::Sub: {
                --top;
                double* lhs = base + (top - 1) * lanes;
                double* rhs = base + top * lanes;
                for (std::size_t l = 0; l < lanes; ++l) lhs[l] -= rhs[l];
                break;
            }
            case OpCode::Mul: {
                --top;
                double* lhs = base + (top - 1) * lanes;
                double* rhs = base + top * lanes;
                double lv = lhs[0];
                double rv = rhs[0];
                lhs[0] = lv * rv;
                for (std::size_t l = 1; l < lanes; ++l) lhs[l] = lv * rhs[l] + rv * lhs[l];
                break;
            }
            case OpCode::Div: {
                --top;
                double* lhs = base + (top - 1) * lanes;
                double* rhs = base + top * lanes;
                if (rhs[0] == 0.0) throw DomainError("division by zero", ins.pos);
                double q = lhs[0] / rhs[0];
                lhs[0] = q;
                for (std::size_t l = 1; l < lanes; ++l) lhs[l] = (lhs[l] - q * rhs[l]) / rhs[0];
                break;
            }
            case OpCode::Neg:
                for (std::size_t l = 0; l < lanes; ++l) a[l] = -a[l];
                break;
            case OpCode::PowInt: {
                double v = a[0];
                std::int32_t n = ins.arg;
                if (v == 0.0 && n < 0) {
                    throw DomainError("zero raised to a negative power", ins.pos);
                }
                double dfac = (n == 0) ? 0.0 : static_cast<double>(n) * ipow(v, n - 1);
                a[0] = ipow(v, n);
                for (std::size_t l = 1; l < lanes; ++l) a[l] *= dfac;
                break;
            }
            case OpCode::PowGen: {
                --top;
                double* lhs = base + (top - 1) * lanes;
                double* rhs = base + top * lanes;
                double bv = lhs[0];
                double ev = rhs[0];
                if (bv <= 0.0) throw DomainError("power with nonpositive base", ins.pos);
                double val = std::pow(bv, ev);
                double lg = std::log(bv);
                lhs[0] = val;
                for (std::size_t l = 1; l < lanes; ++l) {
                    lhs[l] = val * (rhs[l] * lg + ev * lhs[l] / bv);
                }
                break;
            }
            case OpCode::Sin: {
                double c = std::cos(a[0]);
                a[0] = std::sin(a[0]);
                for (std::size_t l = 1; l < lanes; ++l) a[l] *= c;
                break;
            }
            case OpCode::Cos: {
                double s = -std::sin(a[0]);
                a[0] = std::cos(a[0]);
                for (std::size_t l = 1; l < lanes; ++l) a[l] *= s;
                break;
            }
            case OpCode::Exp: {
                double e = std::exp(a[0]);
                a[0] = e;
                for (std::size_t l = 1; l < lanes; ++l) a[l] *= e;
                break;
            }
            case OpCode::Log: {
                double v = a[0];
                if (v <= 0.0) throw DomainError("log of nonpositive value", ins.pos);
                a[0] = std::log(v);
                for (std::size_t l = 1; l < lanes; ++l) a[l] /= v;
                break;
            }
            case OpCode::Sqrt: {
                double v = a[0];
                if (v < 0.0) throw DomainError("sqrt of negative value", ins.pos);
                double s = std::sqrt(v);
                a[0] = s;
                if (v == 0.0) {
                    for (std::size_t l = 1; l < lanes; ++l) {
                        a[l] = a[l] == 0.0 ? 0.0 : std::copysign(INFINITY, a[l]);
                    }
                } else {
                    double f = 0.5 / s;
                    for (std::size_t l = 1; l < lanes; ++l) a[l] *= f;
                }
                break;
            }
            case OpCode::Abs: {
                double v = a[0];
                double s = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
                a[0] = std::fabs(v);
                for (std::size_t l = 1; l < lanes; ++l) a[l] *= s;
                break;
            }
        }
    }
    for (std::size_t i = 0; i < d; ++i) gradient[i] = base[1 + i];
    return base[0];
}

double ExprAst::eval(std::span<const double> point) const {
    Workspace ws;
    return eval(point, ws);
}

double ExprAst::eval(std::span<const double> point, Workspace& ws) const {
    if (point.size() != variables_.size()) {
        throw ConfigError("evaluation point has length " + std::to_string(point.size()) +
                          ", expression expects " + std::to_string(variables_.size()));
    }
    return run_value(point, ws.frames);
}

double ExprAst::eval_with_gradient(std::span<const double> point,
                                   std::span<double> gradient) const {
    Workspace ws;
    return eval_with_gradient(point, gradient, ws);
}

double ExprAst::eval_with_gradient(std::span<const double> point, std::span<double> gradient,
                                   Workspace& ws) const {
    if (point.size() != variables_.size() || gradient.size() != variables_.size()) {
        throw ConfigError("evaluation point or gradient buffer does not match arity " +
                          std::to_string(variables_.size()));
    }
    return run_gradient(point, gradient, ws.frames);
}

std::string ExprAst::render() const { return rendered_; }

}  // namespace dershap::expr
