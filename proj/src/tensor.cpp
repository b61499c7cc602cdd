#include "pde/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pde/common.hpp"

namespace pde {

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(s[i]);
    }
    return out + "]";
}

int numel(const Shape& s) {
    int n = 1;
    for (int d : s) n *= d;
    return n;
}

double Tensor::value() const {
    if (!node_ || node_->data.size() != 1) {
        throw std::runtime_error("value() requires a scalar tensor, got shape " +
                                 (node_ ? shape_str(node_->shape) : std::string("<null>")));
    }
    return node_->data[0];
}

Tensor Tape::make(Shape shape, bool persistent, bool requires_grad) {
    auto node = std::make_unique<Node>();
    node->shape = std::move(shape);
    int n = numel(node->shape);
    if (n <= 0) throw ValidationError("tensor shape " + shape_str(node->shape) + " is empty");
    node->data.assign(n, 0.0);
    node->grad.assign(n, 0.0);
    node->requires_grad = requires_grad;
    Node* raw = node.get();
    (persistent ? persistent_ : transient_).push_back(std::move(node));
    return Tensor(raw);
}

Tensor Tape::param(Shape shape) { return make(std::move(shape), true, true); }

Tensor Tape::constant(Shape shape, std::vector<double> data) {
    Tensor t = make(std::move(shape), false, false);
    if (static_cast<int>(data.size()) != t.size()) {
        throw ValidationError("constant data length " + std::to_string(data.size()) +
                              " does not match shape " + shape_str(t.shape()));
    }
    t.node_->data = std::move(data);
    return t;
}

void Tape::finite_check(const char* op, const Tensor& t) const {
    if (!check_finite) return;
    for (double v : t.data()) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite value after op ") + op);
        }
    }
}

static void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ValidationError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                              " vs " + shape_str(b.shape()));
    }
}

Tensor Tape::add(Tensor a, Tensor b) {
    require_same_shape("add", a, b);
    Tensor out = make(a.shape(), false, a.requires_grad() || b.requires_grad());
    for (int i = 0; i < out.size(); ++i) out.node_->data[i] = a.data()[i] + b.data()[i];
    finite_check("add", out);
    if (out.requires_grad()) {
        Node *an = a.node_, *bn = b.node_, *on = out.node_;
        record([an, bn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (an->requires_grad) an->grad[i] += on->grad[i];
                if (bn->requires_grad) bn->grad[i] += on->grad[i];
            }
        });
    }
    return out;
}

Tensor Tape::mul(Tensor a, Tensor b) {
    require_same_shape("mul", a, b);
    Tensor out = make(a.shape(), false, a.requires_grad() || b.requires_grad());
    for (int i = 0; i < out.size(); ++i) out.node_->data[i] = a.data()[i] * b.data()[i];
    finite_check("mul", out);
    if (out.requires_grad()) {
        Node *an = a.node_, *bn = b.node_, *on = out.node_;
        record([an, bn, on] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (an->requires_grad) an->grad[i] += on->grad[i] * bn->data[i];
                if (bn->requires_grad) bn->grad[i] += on->grad[i] * an->data[i];
            }
        });
    }
    return out;
}

Tensor Tape::scale(Tensor a, double c) { return affine(a, c, 0.0); }

Tensor Tape::affine(Tensor a, double m, double c) {
    Tensor out = make(a.shape(), false, a.requires_grad());
    for (int i = 0; i < out.size(); ++i) out.node_->data[i] = m * a.data()[i] + c;
    finite_check("affine", out);
    if (out.requires_grad()) {
        Node *an = a.node_, *on = out.node_;
        record([an, on, m] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += m * on->grad[i];
        });
    }
    return out;
}

Tensor Tape::mul_const(Tensor a, const std::vector<double>& c) {
    if (static_cast<int>(c.size()) != a.size()) {
        throw ValidationError("mul_const: constant length " + std::to_string(c.size()) +
                              " vs shape " + shape_str(a.shape()));
    }
    Tensor out = make(a.shape(), false, a.requires_grad());
    for (int i = 0; i < out.size(); ++i) out.node_->data[i] = a.data()[i] * c[i];
    finite_check("mul_const", out);
    if (out.requires_grad()) {
        Node *an = a.node_, *on = out.node_;
        record([an, on, c] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) an->grad[i] += c[i] * on->grad[i];
        });
    }
    return out;
}

Tensor Tape::matmul(Tensor a, Tensor b) {
    if (a.shape().size() != 2 || b.shape().size() != 2 || a.shape()[1] != b.shape()[0]) {
        throw ValidationError("matmul: incompatible shapes " + shape_str(a.shape()) + " x " +
                              shape_str(b.shape()));
    }
    int m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
    Tensor out = make({m, n}, false, a.requires_grad() || b.requires_grad());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += a.data()[i * k + p] * b.data()[p * n + j];
            out.node_->data[i * n + j] = acc;
        }
    }
    finite_check("matmul", out);
    if (out.requires_grad()) {
        Node *an = a.node_, *bn = b.node_, *on = out.node_;
        record([an, bn, on, m, k, n] {
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < n; ++j) {
                    double g = on->grad[i * n + j];
                    if (g == 0.0) continue;
                    for (int p = 0; p < k; ++p) {
                        if (an->requires_grad) an->grad[i * k + p] += g * bn->data[p * n + j];
                        if (bn->requires_grad) bn->grad[p * n + j] += g * an->data[i * k + p];
                    }
                }
            }
        });
    }
    return out;
}

Tensor Tape::matvec(Tensor w, Tensor x) {
    if (w.shape().size() != 2 || x.shape().size() != 1 || w.shape()[1] != x.shape()[0]) {
        throw ValidationError("matvec: incompatible shapes " + shape_str(w.shape()) + " x " +
                              shape_str(x.shape()));
    }
    int m = w.shape()[0], k = w.shape()[1];
    Tensor out = make({m}, false, w.requires_grad() || x.requires_grad());
    for (int i = 0; i < m; ++i) {
        double acc = 0.0;
        for (int p = 0; p < k; ++p) acc += w.data()[i * k + p] * x.data()[p];
        out.node_->data[i] = acc;
    }
    finite_check("matvec", out);
    if (out.requires_grad()) {
        Node *wn = w.node_, *xn = x.node_, *on = out.node_;
        record([wn, xn, on, m, k] {
            for (int i = 0; i < m; ++i) {
                double g = on->grad[i];
                if (g == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    if (wn->requires_grad) wn->grad[i * k + p] += g * xn->data[p];
                    if (xn->requires_grad) xn->grad[p] += g * wn->data[i * k + p];
                }
            }
        });
    }
    return out;
}

Tensor Tape::matvec_t(Tensor h, Tensor a) {
    if (h.shape().size() != 2 || a.shape().size() != 1 || h.shape()[0] != a.shape()[0]) {
        throw ValidationError("matvec_t: incompatible shapes " + shape_str(h.shape()) + " x " +
                              shape_str(a.shape()));
    }
    int t = h.shape()[0], d = h.shape()[1];
    Tensor out = make({d}, false, h.requires_grad() || a.requires_grad());
    for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int i = 0; i < t; ++i) acc += h.data()[i * d + j] * a.data()[i];
        out.node_->data[j] = acc;
    }
    finite_check("matvec_t", out);
    if (out.requires_grad()) {
        Node *hn = h.node_, *an = a.node_, *on = out.node_;
        record([hn, an, on, t, d] {
            for (int i = 0; i < t; ++i) {
                for (int j = 0; j < d; ++j) {
                    double g = on->grad[j];
                    if (hn->requires_grad) hn->grad[i * d + j] += g * an->data[i];
                    if (an->requires_grad) an->grad[i] += g * hn->data[i * d + j];
                }
            }
        });
    }
    return out;
}

Tensor Tape::concat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ValidationError("concat: no parts");
    int total = 0;
    bool rg = false;
    for (const auto& p : parts) {
        if (p.shape().size() != 1) {
            throw ValidationError("concat: 1-D parts only, got " + shape_str(p.shape()));
        }
        total += p.size();
        rg = rg || p.requires_grad();
    }
    Tensor out = make({total}, false, rg);
    int off = 0;
    for (const auto& p : parts) {
        std::copy(p.data().begin(), p.data().end(), out.node_->data.begin() + off);
        off += p.size();
    }
    finite_check("concat", out);
    if (rg) {
        std::vector<Node*> nodes;
        for (const auto& p : parts) nodes.push_back(p.node_);
        Node* on = out.node_;
        record([nodes, on] {
            int off = 0;
            for (Node* n : nodes) {
                int len = static_cast<int>(n->data.size());
                if (n->requires_grad) {
                    for (int i = 0; i < len; ++i) n->grad[i] += on->grad[off + i];
                }
                off += len;
            }
        });
    }
    return out;
}

Tensor Tape::slice(Tensor a, int start, int len) {
    if (a.shape().size() != 1 || start < 0 || len < 1 || start + len > a.size()) {
        throw ValidationError("slice: range [" + std::to_string(start) + "," +
                              std::to_string(start + len) + ") out of shape " +
                              shape_str(a.shape()));
    }
    Tensor out = make({len}, false, a.requires_grad());
    std::copy(a.data().begin() + start, a.data().begin() + start + len,
              out.node_->data.begin());
    finite_check("slice", out);
    if (out.requires_grad()) {
        Node *an = a.node_, *on = out.node_;
        record([an, on, start, len] {
            for (int i = 0; i < len; ++i) an->grad[start + i] += on->grad[i];
        });
    }
    return out;
}

Tensor Tape::stack_rows(const std::vector<Tensor>& rows) {
    if (rows.empty()) throw ValidationError("stack_rows: no rows");
    int d = rows[0].size();
    bool rg = false;
    for (const auto& r : rows) {
        if (r.shape().size() != 1 || r.size() != d) {
            throw ValidationError("stack_rows: row shape " + shape_str(r.shape()) +
                                  " does not match width " + std::to_string(d));
        }
        rg = rg || r.requires_grad();
    }
    int t = static_cast<int>(rows.size());
    Tensor out = make({t, d}, false, rg);
    for (int i = 0; i < t; ++i) {
        std::copy(rows[i].data().begin(), rows[i].data().end(),
                  out.node_->data.begin() + i * d);
    }
    finite_check("stack_rows", out);
    if (rg) {
        std::vector<Node*> nodes;
        for (const auto& r : rows) nodes.push_back(r.node_);
        Node* on = out.node_;
        record([nodes, on, d] {
            for (std::size_t i = 0; i < nodes.size(); ++i) {
                if (!nodes[i]->requires_grad) continue;
                for (int j = 0; j < d; ++j) nodes[i]->grad[j] += on->grad[i * d + j];
            }
        });
    }
    return out;
}

Tensor Tape::row(Tensor table, int r) {
    if (table.shape().size() != 2 || r < 0 || r >= table.shape()[0]) {
        throw ValidationError("row: index " + std::to_string(r) + " out of table " +
                              shape_str(table.shape()));
    }
    int d = table.shape()[1];
    Tensor out = make({d}, false, table.requires_grad());
    std::copy(table.data().begin() + r * d, table.data().begin() + (r + 1) * d,
              out.node_->data.begin());
    finite_check("row", out);
    if (out.requires_grad()) {
        Node *tn = table.node_, *on = out.node_;
        record([tn, on, r, d] {
            for (int j = 0; j < d; ++j) tn->grad[r * d + j] += on->grad[j];
        });
    }
    return out;
}

Tensor Tape::unary_op(const char* name, Tensor a, const std::function<double(double)>& f,
                      const std::function<double(double, double)>& dfdx_from_x_y) {
    Tensor out = make(a.shape(), false, a.requires_grad());
    for (int i = 0; i < out.size(); ++i) out.node_->data[i] = f(a.data()[i]);
    finite_check(name, out);
    if (out.requires_grad()) {
        Node *an = a.node_, *on = out.node_;
        record([an, on, dfdx_from_x_y] {
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                an->grad[i] += on->grad[i] * dfdx_from_x_y(an->data[i], on->data[i]);
            }
        });
    }
    return out;
}

Tensor Tape::sigmoid(Tensor a) {
    return unary_op(
        "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
        [](double, double y) { return y * (1.0 - y); });
}

Tensor Tape::tanh(Tensor a) {
    return unary_op(
        "tanh", a, [](double x) { return std::tanh(x); },
        [](double, double y) { return 1.0 - y * y; });
}

Tensor Tape::log(Tensor a) {
    return unary_op(
        "log", a, [](double x) { return std::log(x); },
        [](double x, double) { return 1.0 / x; });
}

Tensor Tape::clamp(Tensor a, double lo, double hi) {
    if (!(lo < hi)) throw ValidationError("clamp: lo must be < hi");
    // Subgradient 0 outside the interval; inside, identity.
    return unary_op(
        "clamp", a, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); },
        [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor Tape::softmax(Tensor a) {
    std::vector<std::uint8_t> mask(a.size(), 1);
    return masked_softmax(a, mask);
}

Tensor Tape::masked_softmax(Tensor a, const std::vector<std::uint8_t>& mask) {
    if (a.shape().size() != 1 || static_cast<int>(mask.size()) != a.size()) {
        throw ValidationError("masked_softmax: mask length " + std::to_string(mask.size()) +
                              " vs shape " + shape_str(a.shape()));
    }
    int n = a.size();
    bool any = false;
    double maxv = 0.0;
    for (int i = 0; i < n; ++i) {
        if (mask[i] && (!any || a.data()[i] > maxv)) {
            maxv = a.data()[i];
            any = true;
        }
    }
    if (!any) throw ValidationError("masked_softmax: all positions masked");
    Tensor out = make(a.shape(), false, a.requires_grad());
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        if (mask[i]) {
            out.node_->data[i] = std::exp(a.data()[i] - maxv);
            total += out.node_->data[i];
        }
    }
    for (int i = 0; i < n; ++i) {
        out.node_->data[i] = mask[i] ? out.node_->data[i] / total : 0.0;
    }
    finite_check("masked_softmax", out);
    if (out.requires_grad()) {
        Node *an = a.node_, *on = out.node_;
        record([an, on, mask] {
            double dot = 0.0;
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (mask[i]) dot += on->grad[i] * on->data[i];
            }
            for (std::size_t i = 0; i < on->grad.size(); ++i) {
                if (mask[i]) an->grad[i] += on->data[i] * (on->grad[i] - dot);
            }
        });
    }
    return out;
}

Tensor Tape::masked_mean(Tensor m, const std::vector<std::uint8_t>& row_mask) {
    if (m.shape().size() != 2 || static_cast<int>(row_mask.size()) != m.shape()[0]) {
        throw ValidationError("masked_mean: mask length " + std::to_string(row_mask.size()) +
                              " vs shape " + shape_str(m.shape()));
    }
    int t = m.shape()[0], d = m.shape()[1];
    int kept = 0;
    for (auto b : row_mask) kept += b ? 1 : 0;
    Tensor out = make({d}, false, m.requires_grad() && kept > 0);
    if (kept > 0) {
        for (int i = 0; i < t; ++i) {
            if (!row_mask[i]) continue;
            for (int j = 0; j < d; ++j) out.node_->data[j] += m.data()[i * d + j];
        }
        for (int j = 0; j < d; ++j) out.node_->data[j] /= kept;
    }
    finite_check("masked_mean", out);
    if (out.requires_grad()) {
        Node *mn = m.node_, *on = out.node_;
        record([mn, on, row_mask, t, d, kept] {
            for (int i = 0; i < t; ++i) {
                if (!row_mask[i]) continue;
                for (int j = 0; j < d; ++j) mn->grad[i * d + j] += on->grad[j] / kept;
            }
        });
    }
    return out;
}

Tensor Tape::dropout(Tensor a, double p, bool train, std::mt19937_64& rng) {
    if (p < 0.0 || p >= 1.0) {
        throw ValidationError("dropout: p = " + std::to_string(p) + " outside [0,1)");
    }
    if (!train || p == 0.0) return a;
    std::vector<double> factor(a.size());
    double keep_scale = 1.0 / (1.0 - p);
    for (auto& f : factor) f = rand_uniform(rng, 0.0, 1.0) < p ? 0.0 : keep_scale;
    return mul_const(a, factor);
}

Tensor Tape::sum(Tensor a) {
    Tensor out = make({1}, false, a.requires_grad());
    double acc = 0.0;
    for (double v : a.data()) acc += v;
    out.node_->data[0] = acc;
    finite_check("sum", out);
    if (out.requires_grad()) {
        Node *an = a.node_, *on = out.node_;
        record([an, on] {
            for (auto& g : an->grad) g += on->grad[0];
        });
    }
    return out;
}

void Tape::backward(Tensor loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw std::runtime_error("backward: loss must be a scalar tensor");
    }
    if (backward_done_) {
        throw std::runtime_error("backward: tape already consumed; call start_batch first");
    }
    backward_done_ = true;
    loss.node_->grad[0] = 1.0;
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
}

void Tape::start_batch() {
    ops_.clear();
    transient_.clear();
    backward_done_ = false;
}

void Tape::zero_grad() {
    for (auto& n : persistent_) std::fill(n->grad.begin(), n->grad.end(), 0.0);
    for (auto& n : transient_) std::fill(n->grad.begin(), n->grad.end(), 0.0);
}

GradCheckResult grad_check(Tape& tape, const std::function<Tensor()>& forward,
                           const std::vector<Tensor>& leaves, double eps, double tol) {
    if (eps <= 0.0) throw ValidationError("grad_check: eps must be > 0");

    tape.start_batch();
    Tensor loss = forward();
    tape.zero_grad();
    tape.backward(loss);
    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (const auto& leaf : leaves) analytic.push_back(leaf.grad());

    GradCheckResult result;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        Tensor leaf = leaves[li];
        for (int i = 0; i < leaf.size(); ++i) {
            double saved = leaf.data()[i];
            leaf.data()[i] = saved + eps;
            tape.start_batch();
            double f_plus = forward().value();
            leaf.data()[i] = saved - eps;
            tape.start_batch();
            double f_minus = forward().value();
            leaf.data()[i] = saved;
            double fd = (f_plus - f_minus) / (2.0 * eps);
            double g = analytic[li][i];
            double denom = std::max({std::abs(fd), std::abs(g), 1e-6});
            result.max_rel_err = std::max(result.max_rel_err, std::abs(fd - g) / denom);
        }
    }
    tape.start_batch();
    result.pass = result.max_rel_err <= tol;
    return result;
}

}  // namespace pde
