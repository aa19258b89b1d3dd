#include "remkit/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace remkit {

namespace {

using Index = Eigen::Index;

void check_labels(const Matrix& logits, std::span<const int> labels) {
    if (static_cast<Index>(labels.size()) != logits.rows())
        throw std::invalid_argument("loss: label count does not match batch size");
    for (int y : labels)
        if (y < 0 || y >= logits.cols())
            throw std::invalid_argument("loss: label " + std::to_string(y) + " out of range");
}

// log(sigmoid(u)), stable for large |u|.
double log_sigmoid(double u) {
    return u >= 0.0 ? -std::log1p(std::exp(-u)) : u - std::log1p(std::exp(u));
}

double sigmoid(double u) {
    if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
    const double e = std::exp(u);
    return e / (1.0 + e);
}

}  // namespace

Matrix softmax(const Matrix& logits, double temperature) {
    Matrix p(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const auto row = logits.row(i) / temperature;
        const double m = row.maxCoeff();
        auto e = (row.array() - m).exp();
        p.row(i) = e / e.sum();
    }
    return p;
}

LossResult cross_entropy(const Matrix& logits, std::span<const int> labels) {
    check_labels(logits, labels);
    const Index n = logits.rows();
    LossResult r;
    r.per_example.resize(static_cast<std::size_t>(n));
    r.grad = softmax(logits);
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const int y = labels[static_cast<std::size_t>(i)];
        const double m = logits.row(i).maxCoeff();
        const double zy = logits(i, y);
        double others = 0.0;
        for (Index c = 0; c < logits.cols(); ++c)
            if (c != y) others += std::exp(logits(i, c) - m);
        const double ce = (m - zy) + std::log1p(std::expm1(zy - m) + others);
        r.per_example[static_cast<std::size_t>(i)] = ce;
        total += ce;
        r.grad(i, y) -= 1.0;
    }
    if (n > 0) {
        r.mean = total / static_cast<double>(n);
        r.grad /= static_cast<double>(n);
    }
    return r;
}

LossResult npo_term(const Matrix& logits, std::span<const int> labels,
                    std::span<const double> ref_ce, double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("npo_term: beta must be > 0");
    if (ref_ce.size() != labels.size())
        throw std::invalid_argument("npo_term: reference loss count does not match batch size");
    LossResult ce = cross_entropy(logits, labels);
    const Index n = logits.rows();
    LossResult r;
    r.per_example.resize(static_cast<std::size_t>(n));
    r.grad = ce.grad;  // (softmax - onehot) / n
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double c = std::max(ce.per_example[k], kCeFloor);
        const double ref = std::max(ref_ce[k], kCeFloor);
        const double u = -beta * (std::log(c) - std::log(ref));
        const double l = (2.0 / beta) * log_sigmoid(u);
        r.per_example[k] = l;
        total += l;
        const double dl_dce = ce.per_example[k] > kCeFloor ? -2.0 * (1.0 - sigmoid(u)) / c : 0.0;
        r.grad.row(i) *= dl_dce;
    }
    if (n > 0) r.mean = total / static_cast<double>(n);
    return r;
}

LossResult kl_distill(const Matrix& student_logits, const Matrix& teacher_logits, double temperature) {
    if (student_logits.rows() != teacher_logits.rows() || student_logits.cols() != teacher_logits.cols())
        throw std::invalid_argument("kl_distill: student/teacher shape mismatch");
    if (!(temperature > 0.0)) throw std::invalid_argument("kl_distill: temperature must be > 0");
    const Index n = student_logits.rows();
    const double t2 = temperature * temperature;
    const Matrix ps = softmax(student_logits, temperature);
    const Matrix pt = softmax(teacher_logits, temperature);
    LossResult r;
    r.per_example.resize(static_cast<std::size_t>(n));
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
        // log-softmax directly from logits for accuracy
        const auto zs = student_logits.row(i) / temperature;
        const auto zt = teacher_logits.row(i) / temperature;
        const double ms = zs.maxCoeff();
        const double mt = zt.maxCoeff();
        const double lse_s = ms + std::log((zs.array() - ms).exp().sum());
        const double lse_t = mt + std::log((zt.array() - mt).exp().sum());
        double kl = 0.0;
        for (Index c = 0; c < student_logits.cols(); ++c) {
            const double p = pt(i, c);
            if (p > 0.0) kl += p * ((zt(c) - lse_t) - (zs(c) - lse_s));
        }
        kl *= t2;
        r.per_example[static_cast<std::size_t>(i)] = kl;
        total += kl;
    }
    // d/dz_s [T^2 KL] = T (p_s - p_t)
    r.grad = (ps - pt) * temperature;
    if (n > 0) {
        r.mean = total / static_cast<double>(n);
        r.grad /= static_cast<double>(n);
    }
    return r;
}

std::vector<int> argmax_rows(const Matrix& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.rows()));
    for (Index i = 0; i < logits.rows(); ++i) {
        Index arg = 0;
        logits.row(i).maxCoeff(&arg);
        out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
    }
    return out;
}

}  // namespace remkit
