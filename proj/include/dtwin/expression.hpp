#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dtwin {

/// Arithmetic over numbers and identifiers: + - * / ^, unary minus, parentheses.
/// `^` is right associative and binds tighter than unary minus (-2^2 = -4).
/// The Unicode signs × ÷ − are accepted as * / -. Juxtaposition is an error.
class Expression {
public:
    enum class Op { number, identifier, negate, add, subtract, multiply, divide, power };

    struct Node {
        Op op = Op::number;
        double value = 0.0;
        std::string name;
        int lhs = -1;
        int rhs = -1;
    };

    /// Throws ParseError with the 1-based column of the offending token.
    static Expression parse(std::string_view text);

    using Lookup = std::function<std::optional<double>(const std::string&)>;
    /// Throws ValidationError for an unbound identifier and MathError for division
    /// by zero or a non-finite result.
    double evaluate(const Lookup& lookup) const;
    double evaluate(const std::map<std::string, double>& bindings) const;

    /// Distinct identifiers in order of first appearance.
    std::vector<std::string> identifiers() const;
    const std::string& source() const { return source_; }
    /// Fully parenthesized form, ASCII operators.
    std::string canonical() const;

    const std::vector<Node>& nodes() const { return nodes_; }
    int root() const { return root_; }

private:
    std::string source_;
    std::vector<Node> nodes_;
    int root_ = -1;

    friend class ExpressionParser;
};

}  // namespace dtwin
