#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace pde {

// Minimal dense reverse-mode autodiff over 64-bit floats: enough for the
// classifier's encoders and loss, nothing more. A Tape owns two kinds of
// nodes: persistent leaves (parameters, surviving across batches) and
// transient nodes (inputs and op outputs, dropped by start_batch). The
// backward rules are recorded closures replayed in reverse.

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
int numel(const Shape& s);

struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
};

class Tape;

// Lightweight handle; nodes are owned by the Tape.
class Tensor {
public:
    Tensor() = default;

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int size() const { return static_cast<int>(node_->data.size()); }
    std::vector<double>& data() { return node_->data; }
    const std::vector<double>& data() const { return node_->data; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    // Scalar convenience; throws unless the tensor has exactly one element.
    double value() const;

private:
    friend class Tape;
    explicit Tensor(Node* n) : node_(n) {}
    Node* node_ = nullptr;
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    // Moving is fine: nodes live on the heap, handles stay valid.
    Tape(Tape&&) = default;
    Tape& operator=(Tape&&) = default;

    // When set, every completed op checks its output for NaN/Inf.
    bool check_finite = true;

    // Persistent leaf with gradient tracking (a parameter).
    Tensor param(Shape shape);
    // Transient value node (an input); no gradient flows into it.
    Tensor constant(Shape shape, std::vector<double> data);
    Tensor zeros(Shape shape) { return constant(shape, std::vector<double>(numel(shape), 0.0)); }

    // --- ops -------------------------------------------------------------
    Tensor add(Tensor a, Tensor b);
    Tensor mul(Tensor a, Tensor b);  // elementwise
    Tensor scale(Tensor a, double c);
    Tensor affine(Tensor a, double m, double c);  // m*a + c, elementwise
    Tensor mul_const(Tensor a, const std::vector<double>& c);
    Tensor matmul(Tensor a, Tensor b);   // [m,k] x [k,n] -> [m,n]
    Tensor matvec(Tensor w, Tensor x);   // [m,k] x [k]   -> [m]
    Tensor matvec_t(Tensor h, Tensor a); // H^T a: [t,d],[t] -> [d]
    Tensor concat(const std::vector<Tensor>& parts);       // 1-D
    Tensor slice(Tensor a, int start, int len);            // 1-D
    Tensor stack_rows(const std::vector<Tensor>& rows);    // t x d
    Tensor row(Tensor table, int r);                       // [v,d] -> [d]
    Tensor sigmoid(Tensor a);
    Tensor tanh(Tensor a);
    Tensor log(Tensor a);
    Tensor clamp(Tensor a, double lo, double hi);
    Tensor softmax(Tensor a);  // 1-D
    Tensor masked_softmax(Tensor a, const std::vector<std::uint8_t>& mask);
    // Mean over unmasked rows of [t,d]; no unmasked rows -> zero vector.
    Tensor masked_mean(Tensor m, const std::vector<std::uint8_t>& row_mask);
    // Inverted dropout: kept entries divided by (1-p); identity when !train.
    Tensor dropout(Tensor a, double p, bool train, std::mt19937_64& rng);
    Tensor sum(Tensor a);  // -> [1]

    // --- engine ----------------------------------------------------------
    // Reverse sweep from a scalar loss; fills grad on every reachable
    // requires_grad node. Calling it twice without start_batch is an error.
    void backward(Tensor loss);
    // Drops transient nodes and recorded ops; parameters survive.
    void start_batch();
    void zero_grad();

    const std::vector<std::unique_ptr<Node>>& params() const { return persistent_; }
    std::size_t n_ops() const { return ops_.size(); }

private:
    Tensor make(Shape shape, bool persistent, bool requires_grad);
    Tensor unary_op(const char* name, Tensor a, const std::function<double(double)>& f,
                    const std::function<double(double, double)>& dfdx_from_x_y);
    void record(std::function<void()> bw) { ops_.push_back(std::move(bw)); }
    void finite_check(const char* op, const Tensor& t) const;

    std::vector<std::unique_ptr<Node>> persistent_;
    std::vector<std::unique_ptr<Node>> transient_;
    std::vector<std::function<void()>> ops_;
    bool backward_done_ = false;
};

// Central finite-difference verification of the analytic gradients.
// `forward` must rebuild the graph from scratch on every call (it is
// invoked after start_batch each time); `leaves` are the parameters to
// perturb. Relative error per coordinate is |fd - g| / max(|fd|,|g|,1e-6).
struct GradCheckResult {
    double max_rel_err = 0.0;
    bool pass = false;
};

GradCheckResult grad_check(Tape& tape, const std::function<Tensor()>& forward,
                           const std::vector<Tensor>& leaves, double eps, double tol);

}  // namespace pde
