#pragma once

// Random well-formed expressions with an evaluator over the generator's own tree.
// Rendering uses minimal parentheses, random spacing and the Unicode operator
// aliases, so the parser's precedence and associativity handling is exercised.

#include <cmath>
#include <cstdio>
#include <map>
#include <memory>
#include <random>
#include <string>

namespace corpus {

struct Node {
    char op = 'n';  // n number, v variable, ~ negate, + - * / ^
    double value = 0.0;
    std::string name;
    std::unique_ptr<Node> a, b;
};

using Bindings = std::map<std::string, double>;

inline double eval(const Node& n, const Bindings& env) {
    switch (n.op) {
        case 'n': return n.value;
        case 'v': return env.at(n.name);
        case '~': return -eval(*n.a, env);
        case '+': return eval(*n.a, env) + eval(*n.b, env);
        case '-': return eval(*n.a, env) - eval(*n.b, env);
        case '*': return eval(*n.a, env) * eval(*n.b, env);
        case '/': return eval(*n.a, env) / eval(*n.b, env);
        default: return std::pow(eval(*n.a, env), eval(*n.b, env));
    }
}

inline int prec(const Node& n) {
    switch (n.op) {
        case '+':
        case '-': return 1;
        case '*':
        case '/': return 2;
        case '~': return 3;
        case '^': return 4;
        default: return 5;
    }
}

class Generator {
public:
    explicit Generator(unsigned seed) : rng_(seed) {
        const char* names[] = {"x", "speed", "density", "sensor.wind_speed", "_k2", "V", "R1", "a.b.c"};
        for (const char* s : names) env_[s] = uniform(0.5, 2.0);
    }

    const Bindings& env() const { return env_; }

    std::unique_ptr<Node> expr(int depth) {
        for (;;) {
            auto n = build(depth);
            const double v = eval(*n, env_);
            if (std::isfinite(v) && std::fabs(v) < 1e9) return n;
        }
    }

    std::string render(const Node& n) {
        switch (n.op) {
            case 'n': return number(n.value);
            case 'v': return n.name;
            case '~': return pick_minus() + space() + wrap(*n.a, 3);
            case '^': return wrap(*n.a, 5) + space() + "^" + space() + wrap(*n.b, 3);
            default: break;
        }
        const int left = prec(n);
        const int right = prec(n) + 1;
        std::string sym;
        if (n.op == '+') sym = "+";
        if (n.op == '-') sym = pick_minus();
        if (n.op == '*') sym = coin() ? "*" : "\xC3\x97";
        if (n.op == '/') sym = coin() ? "/" : "\xC3\xB7";
        return wrap(*n.a, left) + space() + sym + space() + wrap(*n.b, right);
    }

private:
    std::unique_ptr<Node> build(int depth) {
        auto n = std::make_unique<Node>();
        const int k = depth <= 0 ? static_cast<int>(pick(2)) : static_cast<int>(pick(8));
        if (k == 0) {
            n->op = 'n';
            n->value = literal();
        } else if (k == 1) {
            n->op = 'v';
            auto it = env_.begin();
            std::advance(it, static_cast<long>(pick(env_.size())));
            n->name = it->first;
        } else if (k == 2) {
            n->op = '~';
            n->a = build(depth - 1);
        } else if (k == 7) {
            // positive base keeps pow real; small exponent keeps it finite
            n->op = '^';
            n->a = std::make_unique<Node>();
            n->a->op = coin() ? 'n' : 'v';
            if (n->a->op == 'n') {
                n->a->value = uniform(0.25, 3.0);
            } else {
                auto it = env_.begin();
                std::advance(it, static_cast<long>(pick(env_.size())));
                n->a->name = it->first;
            }
            n->b = std::make_unique<Node>();
            n->b->op = 'n';
            n->b->value = static_cast<double>(pick(7)) - 3.0;
            if (coin()) {
                auto neg = std::make_unique<Node>();
                neg->op = '~';
                neg->a = std::move(n->b);
                n->b = std::move(neg);
            }
        } else {
            const char ops[] = {'+', '-', '*', '/'};
            n->op = ops[k - 3];
            n->a = build(depth - 1);
            do {
                n->b = build(depth - 1);
            } while (n->op == '/' && std::fabs(eval(*n->b, env_)) < 1e-3);
        }
        return n;
    }

    std::string wrap(const Node& n, int min_prec) {
        std::string s = render(n);
        if (prec(n) < min_prec || (coin() && coin() && coin())) return "(" + space() + s + space() + ")";
        return s;
    }

    double literal() {
        switch (pick(3)) {
            case 0: return static_cast<double>(pick(100));
            case 1: return uniform(0.0, 10.0);
            default: return uniform(0.0, 1.0) * 1e-3;
        }
    }

    static std::string number(double v) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    std::string space() { return pick(4) == 0 ? " " : ""; }
    std::string pick_minus() { return pick(4) == 0 ? "\xE2\x88\x92" : "-"; }
    bool coin() { return pick(2) == 0; }
    std::size_t pick(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

    std::mt19937_64 rng_;
    Bindings env_;
};

}  // namespace corpus
