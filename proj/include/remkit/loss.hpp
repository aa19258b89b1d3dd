#pragma once

#include "remkit/tensor.hpp"

#include <span>
#include <vector>

namespace remkit {

/// Lower clamp for cross-entropy values fed into logarithms.
inline constexpr double kCeFloor = 1e-12;

/// A batch-mean loss together with its gradient w.r.t. the logits.
struct LossResult {
    std::vector<double> per_example;
    double mean = 0.0;
    Matrix grad;  // d(mean)/d(logits)
};

/// Row-wise softmax of logits / temperature, max-subtracted.
Matrix softmax(const Matrix& logits, double temperature = 1.0);

/// Per-example cross-entropy. Computed as (m - z_y) + log1p(expm1(z_y - m) + sum_{c!=y} exp(z_c - m))
/// so that a saturated correct class yields a tiny positive loss rather than 0.
LossResult cross_entropy(const Matrix& logits, std::span<const int> labels);

/// Preference-style removal term
///
///     l_i = (2/beta) * log sigmoid(-beta * (log ce_i - log ref_ce_i))
///
/// averaged over the batch. Minimizing it pushes ce above ref_ce. Both
/// ce and ref_ce are clamped below at kCeFloor; below the floor the
/// gradient is zero.
LossResult npo_term(const Matrix& logits, std::span<const int> labels,
                    std::span<const double> ref_ce, double beta);

/// Temperature-scaled distillation loss T^2 * KL(p_teacher || p_student),
/// averaged over the batch; gradient is taken w.r.t. the student logits.
LossResult kl_distill(const Matrix& student_logits, const Matrix& teacher_logits,
                      double temperature);

/// Row-wise argmax.
std::vector<int> argmax_rows(const Matrix& logits);

}  // namespace remkit
