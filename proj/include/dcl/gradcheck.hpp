#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dcl/numkit.hpp"

namespace dcl {

struct GradcheckTolerance {
    double step = 1e-6;
    double relative = 1e-5;
    // Coordinates whose analytic value is below this are compared absolutely.
    double absolute_floor = 1e-8;
};

struct GradcheckCase {
    std::string name;
    std::size_t coordinates = 0;
    std::size_t failures = 0;
    double worst_error = 0.0;  // relative, or absolute below the floor

    bool passed() const noexcept { return failures == 0; }
};

// Compares analytic against central differences coordinate by coordinate.
GradcheckCase compare_gradients(std::string name, std::span<const double> analytic, std::span<const double> numeric,
                                const GradcheckTolerance& tol = {});

// Random batches with N in {2, 4, 8} and d in {4, 16} for cl_se, cl_su,
// focal_loss and total_loss, three seeds derived from `seed`.
std::vector<GradcheckCase> run_gradcheck_suite(std::uint64_t seed, const GradcheckTolerance& tol = {},
                                               const std::function<void(const GradcheckCase&)>& on_case = {});

}  // namespace dcl
