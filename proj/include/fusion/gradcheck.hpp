#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fusion/tensor.hpp"

namespace fusion {

struct GradCheckEntry {
    std::string name;
    double max_rel_err = 0.0;
    long long worst_coord = -1;
    int coords_checked = 0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double tolerance = 0.0;

    double worst() const;
    bool passed() const;
    std::string table() const;
};

// Central finite differences against the analytic gradients of fn(), which
// must rebuild a scalar graph from the given parameters each call.
// probes_per_param <= 0 checks every coordinate. Coordinates where both the
// analytic and FD gradients are below abs_floor compare absolutely.
GradCheckReport grad_check(const std::function<Tensor()>& fn,
                           std::vector<Parameter> params, int probes_per_param,
                           double step, double tolerance, Rng& rng,
                           double abs_floor = 1e-6);

}  // namespace fusion
