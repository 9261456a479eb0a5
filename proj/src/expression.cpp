#include "dtwin/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "dtwin/error.hpp"

namespace dtwin {

class ExpressionParser {
public:
    explicit ExpressionParser(std::string_view text) : text_(text) {}

    Expression run() {
        Expression e;
        e.source_ = std::string(text_);
        out_ = &e;
        next();
        if (tok_.kind == Tok::end) fail("empty expression");
        e.root_ = sum();
        if (tok_.kind != Tok::end) {
            if (tok_.kind == Tok::number || tok_.kind == Tok::identifier || tok_.kind == Tok::lparen) {
                fail("expected an operator (use * for multiplication)");
            }
            fail("unexpected '" + tok_.text + "'");
        }
        return e;
    }

private:
    enum class Tok { end, number, identifier, plus, minus, star, slash, caret, lparen, rparen };
    struct Token {
        Tok kind = Tok::end;
        std::string text;
        double value = 0.0;
        int column = 1;
    };

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError("expression: " + msg, 1, tok_.column);
    }

    // Byte offset to 1-based character column, counting UTF-8 lead bytes only.
    int column_at(std::size_t pos) const {
        int col = 1;
        for (std::size_t i = 0; i < pos && i < text_.size(); ++i) {
            if ((static_cast<unsigned char>(text_[i]) & 0xC0) != 0x80) ++col;
        }
        return col;
    }

    bool match_utf8(std::string_view seq) {
        if (text_.substr(pos_, seq.size()) == seq) {
            pos_ += seq.size();
            return true;
        }
        return false;
    }

    void next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        tok_ = Token{};
        tok_.column = column_at(pos_);
        if (pos_ >= text_.size()) return;
        const std::size_t start = pos_;
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || (c == '.' && pos_ + 1 < text_.size() &&
                                                            std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])))) {
            std::size_t end = pos_;
            while (end < text_.size() && (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.')) ++end;
            if (end < text_.size() && (text_[end] == 'e' || text_[end] == 'E')) {
                std::size_t e = end + 1;
                if (e < text_.size() && (text_[e] == '+' || text_[e] == '-')) ++e;
                if (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) {
                    while (e < text_.size() && std::isdigit(static_cast<unsigned char>(text_[e]))) ++e;
                    end = e;
                }
            }
            const auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + end, tok_.value);
            if (ec != std::errc() || ptr != text_.data() + end) fail("malformed number");
            tok_.kind = Tok::number;
            tok_.text = std::string(text_.substr(pos_, end - pos_));
            pos_ = end;
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t end = pos_;
            while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_' ||
                                          text_[end] == '.')) {
                ++end;
            }
            tok_.kind = Tok::identifier;
            tok_.text = std::string(text_.substr(pos_, end - pos_));
            pos_ = end;
            return;
        }
        ++pos_;
        switch (c) {
            case '+': tok_.kind = Tok::plus; break;
            case '-': tok_.kind = Tok::minus; break;
            case '*': tok_.kind = Tok::star; break;
            case '/': tok_.kind = Tok::slash; break;
            case '^': tok_.kind = Tok::caret; break;
            case '(': tok_.kind = Tok::lparen; break;
            case ')': tok_.kind = Tok::rparen; break;
            default:
                pos_ = start;
                if (match_utf8("\xC3\x97")) {
                    tok_.kind = Tok::star;
                } else if (match_utf8("\xC3\xB7")) {
                    tok_.kind = Tok::slash;
                } else if (match_utf8("\xE2\x88\x92")) {
                    tok_.kind = Tok::minus;
                } else {
                    tok_.text = std::string(1, c);
                    fail("unexpected character '" + tok_.text + "'");
                }
        }
        tok_.text = std::string(text_.substr(start, pos_ - start));
    }

    int add(Expression::Node n) {
        out_->nodes_.push_back(std::move(n));
        return static_cast<int>(out_->nodes_.size()) - 1;
    }

    int binary(Expression::Op op, int l, int r) { return add({op, 0.0, {}, l, r}); }

    int sum() {
        int l = product();
        while (tok_.kind == Tok::plus || tok_.kind == Tok::minus) {
            const auto op = tok_.kind == Tok::plus ? Expression::Op::add : Expression::Op::subtract;
            next();
            l = binary(op, l, product());
        }
        return l;
    }

    int product() {
        int l = unary();
        while (tok_.kind == Tok::star || tok_.kind == Tok::slash) {
            const auto op = tok_.kind == Tok::star ? Expression::Op::multiply : Expression::Op::divide;
            next();
            l = binary(op, l, unary());
        }
        return l;
    }

    int unary() {
        if (tok_.kind == Tok::minus) {
            next();
            return add({Expression::Op::negate, 0.0, {}, unary(), -1});
        }
        if (tok_.kind == Tok::plus) fail("unary plus is not supported");
        return power();
    }

    int power() {
        const int base = primary();
        if (tok_.kind == Tok::caret) {
            next();
            return binary(Expression::Op::power, base, unary());
        }
        return base;
    }

    int primary() {
        switch (tok_.kind) {
            case Tok::number: {
                const int n = add({Expression::Op::number, tok_.value, {}, -1, -1});
                next();
                return n;
            }
            case Tok::identifier: {
                const int n = add({Expression::Op::identifier, 0.0, tok_.text, -1, -1});
                next();
                return n;
            }
            case Tok::lparen: {
                next();
                const int inner = sum();
                if (tok_.kind != Tok::rparen) fail("expected ')'");
                next();
                return inner;
            }
            case Tok::end: fail("unexpected end of expression");
            default: fail("unexpected '" + tok_.text + "'");
        }
    }

    std::string_view text_;
    std::size_t pos_ = 0;
    Token tok_;
    Expression* out_ = nullptr;
};

Expression Expression::parse(std::string_view text) { return ExpressionParser(text).run(); }

double Expression::evaluate(const Lookup& lookup) const {
    std::function<double(int)> eval = [&](int i) -> double {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        switch (n.op) {
            case Op::number: return n.value;
            case Op::identifier: {
                const auto v = lookup(n.name);
                if (!v) throw ValidationError("unbound identifier '" + n.name + "'");
                return *v;
            }
            case Op::negate: return -eval(n.lhs);
            case Op::add: return eval(n.lhs) + eval(n.rhs);
            case Op::subtract: return eval(n.lhs) - eval(n.rhs);
            case Op::multiply: return eval(n.lhs) * eval(n.rhs);
            case Op::divide: {
                const double num = eval(n.lhs);
                const double den = eval(n.rhs);
                if (den == 0.0) throw MathError("division by zero in '" + source_ + "'");
                return num / den;
            }
            case Op::power: {
                const double b = eval(n.lhs);
                return std::pow(b, eval(n.rhs));
            }
        }
        return 0.0;
    };
    const double v = eval(root_);
    if (!std::isfinite(v)) throw MathError("non-finite result in '" + source_ + "'");
    return v;
}

double Expression::evaluate(const std::map<std::string, double>& bindings) const {
    return evaluate([&](const std::string& name) -> std::optional<double> {
        const auto it = bindings.find(name);
        if (it == bindings.end()) return std::nullopt;
        return it->second;
    });
}

std::vector<std::string> Expression::identifiers() const {
    std::vector<std::string> out;
    std::function<void(int)> walk = [&](int i) {
        if (i < 0) return;
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        if (n.op == Op::identifier) {
            if (std::find(out.begin(), out.end(), n.name) == out.end()) out.push_back(n.name);
            return;
        }
        walk(n.lhs);
        walk(n.rhs);
    };
    walk(root_);
    return out;
}

std::string Expression::canonical() const {
    std::function<std::string(int)> show = [&](int i) -> std::string {
        const Node& n = nodes_[static_cast<std::size_t>(i)];
        switch (n.op) {
            case Op::number: {
                char buf[32];
                std::snprintf(buf, sizeof buf, "%.17g", n.value);
                return buf;
            }
            case Op::identifier: return n.name;
            case Op::negate: return "(-" + show(n.lhs) + ")";
            default: break;
        }
        const char* sym = n.op == Op::add        ? " + "
                          : n.op == Op::subtract ? " - "
                          : n.op == Op::multiply ? " * "
                          : n.op == Op::divide   ? " / "
                                                 : " ^ ";
        return "(" + show(n.lhs) + sym + show(n.rhs) + ")";
    };
    return show(root_);
}

}  // namespace dtwin
