#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "noran/tensor.hpp"

namespace noran {

// |a - n| / max(|a|, |n|, 1e-2)
double relative_error(double analytic, double numeric);

// A scalar function of some parameters, rebuilt on a fresh tape per call.
struct GradcheckCase {
    std::string name;
    std::vector<Parameter*> params;
    std::function<Var(Tape&)> loss;
};

struct GradcheckResult {
    std::string component;
    std::string worst;  // "case:param[index]"
    double max_rel_error = 0.0;
    std::size_t entries = 0;
    bool passed = false;
};

// Central differences over every entry of every parameter.
GradcheckResult check_cases(const std::string& component, const std::vector<GradcheckCase>& cases, double h,
                            double tolerance);

// Components tensor, layers, lstm, discriminator, loss, in that order.
std::vector<GradcheckResult> run_gradcheck(std::uint64_t seed, double h = 1e-6, double tolerance = 1e-4);

std::string gradcheck_table(const std::vector<GradcheckResult>& results);

}  // namespace noran
