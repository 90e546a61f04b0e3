#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "rgan/ops.hpp"

// Finite-difference gradient checking. Always runs in double: float32 noise
// swamps a 1e-5 central difference long before a real bug does.

namespace rgan {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst;  // where the max occurred, for the test log

    bool ok(double tol = 1e-4) const { return max_rel_error < tol; }
};

// `build` maps (tape, leaves) to a scalar loss var. Each input tensor becomes
// one leaf, in order. Analytic gradients from one backward pass are compared
// against central differences with step h on every input element. `op_name`
// labels diagnostics so a failure says which primitive misbehaved.
inline GradCheckResult check_gradients(
    const std::string& op_name,
    const std::function<DVar(DTape&, const std::vector<DVar>&)>& build,
    const std::vector<DTensor>& inputs, double h = 1e-5) {
    RGAN_REQUIRE(!inputs.empty(), "grad_check(" + op_name + "): no inputs");

    DTape tape;
    std::vector<DVar> leaves;
    leaves.reserve(inputs.size());
    for (const auto& x : inputs) leaves.push_back(tape.leaf(x, true));
    DVar loss = build(tape, leaves);
    RGAN_REQUIRE(loss.val().size() == 1,
                 "grad_check(" + op_name + "): loss must be scalar");
    RGAN_REQUIRE(loss.val().all_finite(),
                 "grad_check(" + op_name + "): non-finite loss");
    tape.backward(loss);

    std::vector<DTensor> analytic;
    analytic.reserve(inputs.size());
    for (const auto& v : leaves)
        analytic.push_back(tape.has_grad(v.id) ? tape.grad_of(v.id)
                                               : DTensor(v.val().shape()));

    auto eval = [&](const std::vector<DTensor>& xs) {
        DTape t;
        std::vector<DVar> ls;
        ls.reserve(xs.size());
        for (const auto& x : xs) ls.push_back(t.leaf(x, false));
        return build(t, ls).val()[0];
    };

    GradCheckResult result;
    std::vector<DTensor> probe = inputs;
    for (size_t i = 0; i < inputs.size(); ++i) {
        RGAN_REQUIRE(analytic[i].all_finite(),
                     "grad_check(" + op_name + "): non-finite gradient");
        for (int64_t j = 0; j < probe[i].size(); ++j) {
            const double orig = probe[i][j];
            probe[i][j] = orig + h;
            const double fp = eval(probe);
            probe[i][j] = orig - h;
            const double fm = eval(probe);
            probe[i][j] = orig;
            const double numeric = (fp - fm) / (2.0 * h);
            const double a = analytic[i][j];
            // Absolute scale below 1e-4 so near-zero gradients don't trip it.
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > result.max_rel_error) {
                result.max_rel_error = rel;
                std::ostringstream os;
                os << "input " << i << " elem " << j << ": analytic=" << a
                   << " numeric=" << numeric;
                result.worst = os.str();
            }
        }
    }
    return result;
}

}  // namespace rgan
