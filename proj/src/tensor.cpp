#include "fusion/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace fusion {

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) {
        if (i) os << "x";
        os << s[i];
    }
    os << "]";
    return os.str();
}

long long shape_numel(const Shape& s) {
    long long n = 1;
    for (int e : s) n *= e;
    return n;
}

namespace {
uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

void Rng::reseed(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
}

uint64_t Rng::next_u64() {
    uint64_t result = rotl(s_[1] * 5, 7) * 9;
    uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int Rng::uniform_int(int lo, int hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
}

double* Node::grad_data() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
    return grad.data();
}

Tensor Tensor::zeros(const Shape& s) {
    return from(s, std::vector<double>(shape_numel(s), 0.0));
}

Tensor Tensor::full(const Shape& s, double v) {
    return from(s, std::vector<double>(shape_numel(s), v));
}

Tensor Tensor::from(const Shape& s, std::vector<double> data) {
    if (static_cast<long long>(data.size()) != shape_numel(s))
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(s));
    auto n = std::make_shared<Node>();
    n->shape = s;
    n->value = std::move(data);
    return Tensor(n);
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

double Tensor::item() const {
    if (numel() != 1)
        throw ShapeError("item() requires a scalar tensor, got shape " +
                         shape_str(shape()));
    return n_->value[0];
}

Parameter::Parameter(std::string name, const Shape& shape,
                     std::vector<double> init)
    : name_(std::move(name)) {
    if (static_cast<long long>(init.size()) != shape_numel(shape))
        throw ShapeError("parameter '" + name_ + "' init length mismatch for " +
                         shape_str(shape));
    n_ = std::make_shared<Node>();
    n_->shape = shape;
    n_->value = std::move(init);
    n_->requires_grad = true;
    n_->is_param = true;
    n_->grad.assign(n_->value.size(), 0.0);
}

const std::vector<double>& Parameter::grad() const {
    return n_->grad;
}

void Parameter::zero_grad() {
    std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
}

Tensor make_op(Shape shape, std::vector<double> value,
               std::vector<Tensor> parents,
               std::function<void(Node&)> backfn) {
    if (static_cast<long long>(value.size()) != shape_numel(shape))
        throw ShapeError("op output length does not match shape " +
                         shape_str(shape));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    bool req = false;
    for (const auto& p : parents) req = req || p.node()->requires_grad;
    n->requires_grad = req;
    if (req) {
        n->parents.reserve(parents.size());
        for (auto& p : parents) n->parents.push_back(p.node());
        n->backfn = std::move(backfn);
    }
    return Tensor(n);
}

void backward(const Tensor& root) {
    if (!root.defined())
        throw ShapeError("backward: undefined root");
    if (root.numel() != 1)
        throw ShapeError("backward: root must be scalar, got shape " +
                         shape_str(root.shape()));

    // iterative post-order topological sort over the grad-requiring subgraph
    std::vector<Node*> topo;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, size_t>> stack;
    if (root.node()->requires_grad) stack.push_back({root.node().get(), 0});
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx == 0 && seen.count(node)) {
            stack.pop_back();
            continue;
        }
        seen.insert(node);
        bool descended = false;
        while (idx < node->parents.size()) {
            Node* p = node->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                stack.push_back({p, 0});
                descended = true;
                break;
            }
        }
        if (!descended && idx >= node->parents.size()) {
            topo.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : topo) {
        if (!n->is_param) {
            n->grad.assign(n->value.size(), 0.0);
        }
    }
    if (!root.node()->requires_grad) return;  // no parameters reachable
    root.node()->grad_data()[0] += 1.0;

    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        Node* n = *it;
        if (n->backfn) n->backfn(*n);
    }
}

Parameter ParamRegistry::create(const std::string& name, const Shape& shape,
                                std::vector<double> init) {
    if (find(name))
        throw UsageError("duplicate parameter name '" + name + "'");
    params_.emplace_back(name, shape, std::move(init));
    return params_.back();
}

Parameter ParamRegistry::create_const(const std::string& name,
                                      const Shape& shape, double fill) {
    return create(name, shape,
                  std::vector<double>(shape_numel(shape), fill));
}

Parameter ParamRegistry::create_uniform(const std::string& name,
                                        const Shape& shape, Rng& rng,
                                        double lo, double hi) {
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return create(name, shape, std::move(v));
}

Parameter* ParamRegistry::find(const std::string& name) {
    for (auto& p : params_)
        if (p.name() == name) return &p;
    return nullptr;
}

void ParamRegistry::zero_grads() {
    for (auto& p : params_) p.zero_grad();
}

long long ParamRegistry::total_size() const {
    long long n = 0;
    for (const auto& p : params_) n += p.numel();
    return n;
}

void check_finite(const Tensor& t, const std::string& what) {
    for (double v : t.data())
        if (!std::isfinite(v))
            throw NumericError(what + " contains a non-finite value");
}

}  // namespace fusion
