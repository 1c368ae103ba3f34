#include "nlmarkov/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <utility>

namespace nlmarkov {

namespace {

enum class Op { Constant, CoordR, VarW, Add, Sub, Mul, Div, Pow, Neg, Exp, Log, Sqrt };

}  // namespace

struct Expression::Node {
    Op op;
    Scalar value = 0.0;       // Constant
    Eigen::Index coord = 0;   // CoordR, 0-based
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;

NodePtr make_node(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Expression::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodePtr make_const(Scalar v) {
    auto n = std::make_shared<Expression::Node>();
    n->op = Op::Constant;
    n->value = v;
    return n;
}

NodePtr make_coord(Eigen::Index i) {
    auto n = std::make_shared<Expression::Node>();
    n->op = Op::CoordR;
    n->coord = i;
    return n;
}

bool is_const(const NodePtr& n, Scalar v) { return n->op == Op::Constant && n->value == v; }

// Light constant folding keeps symbolic derivatives compact.
NodePtr simplify(Op op, NodePtr a, NodePtr b) {
    switch (op) {
        case Op::Add:
            if (is_const(a, 0.0)) return b;
            if (is_const(b, 0.0)) return a;
            if (a->op == Op::Constant && b->op == Op::Constant) return make_const(a->value + b->value);
            break;
        case Op::Sub:
            if (is_const(b, 0.0)) return a;
            if (a->op == Op::Constant && b->op == Op::Constant) return make_const(a->value - b->value);
            break;
        case Op::Mul:
            if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
            if (is_const(a, 1.0)) return b;
            if (is_const(b, 1.0)) return a;
            if (a->op == Op::Constant && b->op == Op::Constant) return make_const(a->value * b->value);
            break;
        case Op::Div:
            if (is_const(a, 0.0)) return make_const(0.0);
            if (is_const(b, 1.0)) return a;
            break;
        default:
            break;
    }
    return make_node(op, std::move(a), std::move(b));
}

class Parser {
  public:
    explicit Parser(const std::string& text) : text_(text) {}

    NodePtr run() {
        NodePtr e = parse_sum();
        skip_space();
        require(pos_ == text_.size(), ErrorCode::InvalidParameters,
                "unexpected trailing input in expression: '" + text_.substr(pos_) + "'");
        return e;
    }

  private:
    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_space();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_space();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    NodePtr parse_sum() {
        NodePtr left = parse_term();
        for (;;) {
            if (consume('+')) left = simplify(Op::Add, left, parse_term());
            else if (consume('-')) left = simplify(Op::Sub, left, parse_term());
            else return left;
        }
    }

    NodePtr parse_term() {
        NodePtr left = parse_unary();
        for (;;) {
            if (consume('*')) left = simplify(Op::Mul, left, parse_unary());
            else if (consume('/')) left = simplify(Op::Div, left, parse_unary());
            else return left;
        }
    }

    NodePtr parse_unary() {
        if (consume('-')) return simplify(Op::Neg, parse_unary(), nullptr);
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (consume('^')) return simplify(Op::Pow, base, parse_unary());  // right associative
        return base;
    }

    NodePtr parse_primary() {
        skip_space();
        require(pos_ < text_.size(), ErrorCode::InvalidParameters, "expression ended unexpectedly");
        char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_sum();
            require(consume(')'), ErrorCode::InvalidParameters, "missing ')' in expression");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        fail(ErrorCode::InvalidParameters, std::string("unexpected character '") + c + "' in expression");
    }

    NodePtr parse_number() {
        const char* start = text_.c_str() + pos_;
        char* end = nullptr;
        Scalar v = std::strtod(start, &end);
        require(end != start, ErrorCode::InvalidParameters, "malformed number in expression");
        pos_ += static_cast<std::size_t>(end - start);
        return make_const(v);
    }

    NodePtr parse_identifier() {
        std::size_t begin = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name = text_.substr(begin, pos_ - begin);
        if (name == "w" || name == "u") return make_node(Op::VarW);
        if (name.size() >= 2 && name[0] == 'r') {
            bool digits = true;
            for (std::size_t i = 1; i < name.size(); ++i)
                digits = digits && std::isdigit(static_cast<unsigned char>(name[i]));
            if (digits) {
                long idx = std::strtol(name.c_str() + 1, nullptr, 10);
                require(idx >= 1, ErrorCode::InvalidParameters, "coordinate index must be >= 1");
                return make_coord(static_cast<Eigen::Index>(idx - 1));
            }
        }
        if (name == "exp" || name == "log" || name == "sqrt" || name == "pow") {
            require(consume('('), ErrorCode::InvalidParameters, "expected '(' after " + name);
            NodePtr first = parse_sum();
            if (name == "pow") {
                require(consume(','), ErrorCode::InvalidParameters, "pow expects two arguments");
                NodePtr second = parse_sum();
                require(consume(')'), ErrorCode::InvalidParameters, "missing ')' in expression");
                return simplify(Op::Pow, first, second);
            }
            require(consume(')'), ErrorCode::InvalidParameters, "missing ')' in expression");
            if (name == "exp") return make_node(Op::Exp, first);
            if (name == "log") return make_node(Op::Log, first);
            return make_node(Op::Sqrt, first);
        }
        fail(ErrorCode::InvalidParameters, "unknown identifier '" + name + "' in expression");
    }

    const std::string& text_;
    std::size_t pos_ = 0;
};

Scalar eval_node(const Expression::Node& n, const Vector& r, Scalar w) {
    switch (n.op) {
        case Op::Constant: return n.value;
        case Op::CoordR:
            require(n.coord < r.size(), ErrorCode::InvalidParameters,
                    "expression references a coordinate beyond the model dimension");
            return r(n.coord);
        case Op::VarW: return w;
        case Op::Add: return eval_node(*n.a, r, w) + eval_node(*n.b, r, w);
        case Op::Sub: return eval_node(*n.a, r, w) - eval_node(*n.b, r, w);
        case Op::Mul: return eval_node(*n.a, r, w) * eval_node(*n.b, r, w);
        case Op::Div: return eval_node(*n.a, r, w) / eval_node(*n.b, r, w);
        case Op::Pow: return std::pow(eval_node(*n.a, r, w), eval_node(*n.b, r, w));
        case Op::Neg: return -eval_node(*n.a, r, w);
        case Op::Exp: return std::exp(eval_node(*n.a, r, w));
        case Op::Log: return std::log(eval_node(*n.a, r, w));
        case Op::Sqrt: return std::sqrt(eval_node(*n.a, r, w));
    }
    return 0.0;
}

// d/dx where x is either coordinate `coord` (when wrt_w is false) or w.
NodePtr diff_node(const NodePtr& n, Eigen::Index coord, bool wrt_w) {
    auto d = [&](const NodePtr& m) { return diff_node(m, coord, wrt_w); };
    switch (n->op) {
        case Op::Constant: return make_const(0.0);
        case Op::CoordR: return make_const(!wrt_w && n->coord == coord ? 1.0 : 0.0);
        case Op::VarW: return make_const(wrt_w ? 1.0 : 0.0);
        case Op::Add: return simplify(Op::Add, d(n->a), d(n->b));
        case Op::Sub: return simplify(Op::Sub, d(n->a), d(n->b));
        case Op::Mul:
            return simplify(Op::Add, simplify(Op::Mul, d(n->a), n->b), simplify(Op::Mul, n->a, d(n->b)));
        case Op::Div:
            // (a/b)' = a'/b - a b'/b^2
            return simplify(Op::Sub, simplify(Op::Div, d(n->a), n->b),
                            simplify(Op::Div, simplify(Op::Mul, n->a, d(n->b)),
                                     simplify(Op::Mul, n->b, n->b)));
        case Op::Pow: {
            // General rule a^b * (b' log a + b a'/a); constant exponents fold
            // to the power rule below.
            if (n->b->op == Op::Constant) {
                Scalar k = n->b->value;
                NodePtr lowered = simplify(Op::Pow, n->a, make_const(k - 1.0));
                return simplify(Op::Mul, make_const(k), simplify(Op::Mul, lowered, d(n->a)));
            }
            NodePtr self = make_node(Op::Pow, n->a, n->b);
            NodePtr t1 = simplify(Op::Mul, d(n->b), make_node(Op::Log, n->a));
            NodePtr t2 = simplify(Op::Div, simplify(Op::Mul, n->b, d(n->a)), n->a);
            return simplify(Op::Mul, self, simplify(Op::Add, t1, t2));
        }
        case Op::Neg: return simplify(Op::Neg, d(n->a), nullptr);
        case Op::Exp: return simplify(Op::Mul, make_node(Op::Exp, n->a), d(n->a));
        case Op::Log: return simplify(Op::Div, d(n->a), n->a);
        case Op::Sqrt:
            return simplify(Op::Div, d(n->a),
                            simplify(Op::Mul, make_const(2.0), make_node(Op::Sqrt, n->a)));
    }
    return make_const(0.0);
}

void scan(const NodePtr& n, bool& uses_w, Eigen::Index& max_coord) {
    if (!n) return;
    if (n->op == Op::VarW) uses_w = true;
    if (n->op == Op::CoordR) max_coord = std::max(max_coord, n->coord + 1);
    scan(n->a, uses_w, max_coord);
    scan(n->b, uses_w, max_coord);
}

}  // namespace

Expression::Expression(std::shared_ptr<const Node> root, std::string text)
    : root_(std::move(root)), text_(std::move(text)) {}

Expression Expression::parse(const std::string& text) {
    require(!text.empty(), ErrorCode::InvalidParameters, "empty expression");
    Parser parser(text);
    return Expression(parser.run(), text);
}

Scalar Expression::eval(const Vector& r, Scalar w) const { return eval_node(*root_, r, w); }

Expression Expression::derivative_r(Eigen::Index index) const {
    return Expression(diff_node(root_, index, false), "d/dr" + std::to_string(index + 1) + "(" + text_ + ")");
}

Expression Expression::derivative_w() const {
    return Expression(diff_node(root_, 0, true), "d/dw(" + text_ + ")");
}

bool Expression::uses_w() const {
    bool w = false;
    Eigen::Index c = 0;
    scan(root_, w, c);
    return w;
}

Eigen::Index Expression::max_coordinate() const {
    bool w = false;
    Eigen::Index c = 0;
    scan(root_, w, c);
    return c;
}

}  // namespace nlmarkov
