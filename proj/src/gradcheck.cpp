#include "fusion/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace fusion {

double GradCheckReport::worst() const {
    double w = 0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
}

bool GradCheckReport::passed() const {
    for (const auto& e : entries)
        if (!(e.max_rel_err < tolerance)) return false;
    return true;
}

std::string GradCheckReport::table() const {
    std::ostringstream os;
    size_t w = 9;
    for (const auto& e : entries) w = std::max(w, e.name.size());
    os << "  parameter";
    os << std::string(w > 9 ? w - 9 : 0, ' ') << "  max_rel_err  coords\n";
    for (const auto& e : entries) {
        os << "  " << e.name << std::string(w - e.name.size(), ' ') << "  ";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%11.3e", e.max_rel_err);
        os << buf << "  " << e.coords_checked << "\n";
    }
    return os.str();
}

GradCheckReport grad_check(const std::function<Tensor()>& fn,
                           std::vector<Parameter> params, int probes_per_param,
                           double step, double tolerance, Rng& rng,
                           double abs_floor) {
    if (step <= 0) throw UsageError("grad_check step must be > 0");
    GradCheckReport report;
    report.tolerance = tolerance;

    for (auto& p : params) p.zero_grad();
    Tensor root = fn();
    if (root.numel() != 1)
        throw ShapeError("grad_check function must return a scalar");
    backward(root);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    for (size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = params[pi];
        long long n = p.numel();
        std::vector<long long> coords;
        if (probes_per_param <= 0 || n <= probes_per_param) {
            coords.resize(n);
            for (long long i = 0; i < n; ++i) coords[i] = i;
        } else {
            std::set<long long> picked;
            while (static_cast<int>(picked.size()) < probes_per_param)
                picked.insert(static_cast<long long>(rng.next_u64() % n));
            coords.assign(picked.begin(), picked.end());
        }

        GradCheckEntry entry;
        entry.name = p.name();
        entry.coords_checked = static_cast<int>(coords.size());
        for (long long c : coords) {
            p.nudge(c, step);
            double fp = fn().item();
            p.nudge(c, -2 * step);
            double fm = fn().item();
            p.nudge(c, step);
            double fd = (fp - fm) / (2 * step);
            double a = analytic[pi][c];
            double denom = std::max(std::fabs(a), std::fabs(fd));
            double err = denom < abs_floor ? std::fabs(a - fd)
                                           : std::fabs(a - fd) / denom;
            if (err > entry.max_rel_err) {
                entry.max_rel_err = err;
                entry.worst_coord = c;
            }
        }
        report.entries.push_back(std::move(entry));
    }
    return report;
}

}  // namespace fusion
