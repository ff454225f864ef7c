#pragma once

// Central finite-difference oracle for gradient tests. Independent of the
// autodiff path: it only re-evaluates the forward closure at perturbed
// inputs. Relative error uses |analytic - numeric| / max(1, |analytic|).

#include <cmath>
#include <functional>
#include <vector>

#include "tensor.hpp"

namespace gradcheck {

struct Report {
    double max_rel_err = 0.0;
    long checked = 0;
};

// True when one evaluation of f stayed clear of relu zeros and max-pool
// ties, so central differences with step h cannot cross a kink. Callers
// redraw their random inputs until this holds.
inline bool kink_free(const std::function<genmc::Tensor()>& f, double margin = 1e-3) {
    genmc::diag::reset_kink_margins();
    (void)f();
    return genmc::diag::relu_min_abs_input() > margin && genmc::diag::pool_min_gap() > margin;
}

// f() must rebuild the scalar loss from the current contents of `leaves`.
// h is the central-difference step.
inline Report check(const std::function<genmc::Tensor()>& f,
                    const std::vector<genmc::Tensor>& leaves, double h = 1e-5) {
    for (const auto& leaf : leaves) const_cast<genmc::Tensor&>(leaf).zero_grad();
    genmc::Tensor loss = f();
    loss.backward();

    Report rep;
    for (const auto& leaf : leaves) {
        const std::vector<double> analytic = leaf.grad();
        auto& data = const_cast<genmc::Tensor&>(leaf).data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + h;
            const double up = f().item();
            data[i] = saved - h;
            const double down = f().item();
            data[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double rel =
                std::fabs(analytic[i] - numeric) / std::max(1.0, std::fabs(analytic[i]));
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace gradcheck
