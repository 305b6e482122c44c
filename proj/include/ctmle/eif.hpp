#pragma once

#include "ctmle/types.hpp"

namespace ctmle {

/// Inputs to the efficient influence function of the treatment-specific mean.
struct EifInputs {
    Vector or_pred;  ///< outcome regression under treatment, per row, in [0,1]
    Vector ps_pred;  ///< propensity of treatment, per row
    IntVector a;     ///< treatment indicator (0/1)
    Vector y;        ///< outcome in [0,1]
    double psi = 0.0;
};

/// Plug-in estimate: the empirical mean of the outcome-regression predictions.
double plugin_estimate(const Vector& or_pred);

/// Per-observation D*(o) = a/G(w) (y - Q(w)) + Q(w) - psi.
Vector eif_eval(const EifInputs& in);

/// Second-order remainder  sum_i weight_i (G_n - G_0)/G_n (Q*_n - Q_0), evaluated at
/// points drawn from the confounder law. Empty `weights` means equal weights 1/m.
double remainder_r2(const Vector& or_pred, const Vector& or_true, const Vector& ps_pred, const Vector& ps_true,
                    const Vector& weights = {});

}  // namespace ctmle
