#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "fusion/common.hpp"

namespace fusion {

// Reverse-mode autodiff node. Values are double precision throughout.
// grad buffers are allocated lazily so pure forward evaluation (finite
// difference probes, inference) never pays for them.
struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backfn;  // scatters this->grad into parents
    bool requires_grad = false;
    bool is_param = false;

    long long numel() const { return static_cast<long long>(value.size()); }
    double* grad_data();  // allocates zeros on first use
};

using NodePtr = std::shared_ptr<Node>;

// Immutable value handle. All library operations build new nodes; the only
// in-place mutation in the system is the optimizer writing parameter values
// between graphs.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr n) : n_(std::move(n)) {}

    static Tensor zeros(const Shape& s);
    static Tensor full(const Shape& s, double v);
    static Tensor from(const Shape& s, std::vector<double> data);
    static Tensor scalar(double v);

    bool defined() const { return static_cast<bool>(n_); }
    const Shape& shape() const { return n_->shape; }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    long long numel() const { return n_->numel(); }
    const std::vector<double>& data() const { return n_->value; }
    double at(long long i) const { return n_->value[i]; }
    double item() const;  // scalar tensors only

    bool requires_grad() const { return n_->requires_grad; }
    const NodePtr& node() const { return n_; }

private:
    NodePtr n_;
};

// Trainable leaf: persistent value with a gradient accumulator of the same
// shape. backward() accumulates; zero_grad() resets.
class Parameter {
public:
    Parameter() = default;
    Parameter(std::string name, const Shape& shape, std::vector<double> init);

    const std::string& name() const { return name_; }
    const Shape& shape() const { return n_->shape; }
    long long numel() const { return n_->numel(); }

    Tensor tensor() const { return Tensor(n_); }
    std::vector<double>& values() { return n_->value; }
    const std::vector<double>& values() const { return n_->value; }
    const std::vector<double>& grad() const;
    void zero_grad();
    void nudge(long long i, double delta) { n_->value[i] += delta; }

    bool defined() const { return static_cast<bool>(n_); }

private:
    NodePtr n_;
    std::string name_;
};

// Factory for differentiable ops. Drops parents and the back function when
// no parent requires grad, so constant subgraphs are freed eagerly.
Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<Tensor> parents, std::function<void(Node&)> backfn);

// Reverse sweep from a scalar root. Parameter grads accumulate across calls;
// interior grads are reset per call.
void backward(const Tensor& root);

// Owns the parameters of a model; names are unique.
class ParamRegistry {
public:
    Parameter create(const std::string& name, const Shape& shape,
                     std::vector<double> init);
    Parameter create_const(const std::string& name, const Shape& shape,
                           double fill);
    Parameter create_uniform(const std::string& name, const Shape& shape,
                             Rng& rng, double lo, double hi);

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    Parameter* find(const std::string& name);
    void zero_grads();
    long long total_size() const;

private:
    std::vector<Parameter> params_;
};

void check_finite(const Tensor& t, const std::string& what);

}  // namespace fusion
