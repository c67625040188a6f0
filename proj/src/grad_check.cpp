#include "cueing/grad_check.hpp"

#include <algorithm>

namespace cueing::nn {

double grad_rel_err(double analytic, double numeric) {
    double denom = std::max({1.0, std::fabs(analytic), std::fabs(numeric)});
    return std::fabs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::string& name, const std::function<double()>& loss,
                           DTensor& value, const DTensor& analytic, double tol,
                           const std::vector<size_t>& coords) {
    GradCheckReport rep;
    rep.name = name;
    rep.tol = tol;

    auto check_coord = [&](size_t i) {
        const double orig = value.data[i];
        const double h = 1e-5 * std::max(1.0, std::fabs(orig));
        value.data[i] = orig + h;
        const double up = loss();
        value.data[i] = orig - h;
        const double dn = loss();
        value.data[i] = orig;
        const double numeric = (up - dn) / (2.0 * h);
        rep.max_rel_err = std::max(rep.max_rel_err, grad_rel_err(analytic.data[i], numeric));
        ++rep.checked;
    };

    if (coords.empty()) {
        for (size_t i = 0; i < value.numel(); ++i) check_coord(i);
    } else {
        for (size_t i : coords) check_coord(i);
    }
    return rep;
}

}  // namespace cueing::nn
