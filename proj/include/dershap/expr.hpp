#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dershap::expr {

/// Value paired with a directional-derivative payload. The tape evaluator
/// below works on flat (1+d)-wide frames instead, but Dual is the public
/// building block for users differentiating their own C++ functions.
struct Dual {
    double v = 0.0;
    double d = 0.0;

    friend Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
    friend Dual operator-(Dual a, Dual b) { return {a.v - b.v, a.d - b.d}; }
    friend Dual operator-(Dual a) { return {-a.v, -a.d}; }
    friend Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
    friend Dual operator/(Dual a, Dual b) {
        double q = a.v / b.v;
        return {q, (a.d - q * b.d) / b.v};
    }
};

Dual sin(Dual a);
Dual cos(Dual a);
Dual exp(Dual a);
Dual log(Dual a);
Dual sqrt(Dual a);
Dual abs(Dual a);

/// Parsed arithmetic expression over a fixed, ordered variable list.
/// Evaluation runs on an immutable postfix tape; variables are resolved to
/// indices at parse time so no string lookup happens per call. Both routes
/// report domain violations (log of a nonpositive value, division by zero)
/// with the 1-based byte offset of the offending operator in the source.
///
/// Grammar (documented in docs/grammar.ebnf): numbers, named variables, the
/// constants pi and e, unary minus, + - * / ^ with power binding tightest
/// and right-associative, and the functions sin cos exp log sqrt abs.
class ExprAst {
public:
    /// Parses `text` against the variable list. Unknown identifiers and
    /// syntax problems raise ParseError carrying the byte offset; an
    /// invalid variable list (duplicate, ill-formed, or shadowing a
    /// builtin name) raises ConfigError.
    static ExprAst parse(std::string_view text, std::vector<std::string> variables);

    std::size_t arity() const noexcept { return variables_.size(); }
    const std::vector<std::string>& variables() const noexcept { return variables_; }
    const std::string& text() const noexcept { return text_; }

    /// Scratch buffers for repeated evaluation. A Workspace may be reused
    /// across calls on the same thread; the tape itself is shared freely.
    struct Workspace {
        std::vector<double> frames;
    };

    double eval(std::span<const double> point) const;
    double eval(std::span<const double> point, Workspace& ws) const;

    /// Computes f(point) and writes all partial derivatives into
    /// `gradient` (length = arity). Derivatives are exact: the tape
    /// propagates (value, partials) frames, no finite differencing.
    /// abs contributes slope 0 at its kink.
    double eval_with_gradient(std::span<const double> point, std::span<double> gradient) const;
    double eval_with_gradient(std::span<const double> point, std::span<double> gradient,
                              Workspace& ws) const;

    /// Serializes back to expression text with minimal parentheses.
    /// parse(render()) evaluates identically to the original.
    std::string render() const;

private:
    ExprAst() = default;

    enum class OpCode : std::uint8_t {
        PushConst,
        PushVar,
        Add,
        Sub,
        Mul,
        Div,
        Neg,
        PowInt,
        PowGen,
        Sin,
        Cos,
        Exp,
        Log,
        Sqrt,
        Abs,
    };

    struct Instr {
        OpCode op;
        std::int32_t arg;   // constant index, variable index, or integer exponent
        std::uint32_t pos;  // 1-based byte offset of the head token
    };

    double run_value(std::span<const double> point, std::vector<double>& stack) const;
    double run_gradient(std::span<const double> point, std::span<double> gradient,
                        std::vector<double>& frames) const;

    std::string text_;
    std::vector<std::string> variables_;
    std::vector<Instr> tape_;
    std::vector<double> constants_;
    std::size_t max_stack_ = 0;
    std::string rendered_;  // built at parse time while the AST is alive
};

}  // namespace dershap::expr
