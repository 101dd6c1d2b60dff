#pragma once

// Dual contrastive objective: self-supervised NT-Xent over dropout views,
// supervised contrastive loss over labels, and binary focal loss, each with
// hand-derived gradients. All terms are summed over the batch unless mean
// reduction is requested.

#include <span>
#include <vector>

#include "dcl/encoder.hpp"
#include "dcl/numkit.hpp"

namespace dcl {

struct ContrastiveResult {
    double loss = 0.0;
    std::vector<Vector> grads;
};

// Self-supervised loss over the 2N views of `pairs`. For every view the
// positive is its partner; the denominator covers every other view,
// positive included. grads[2j] / grads[2j + 1] belong to view_a / view_b of
// pair j.
ContrastiveResult cl_se(std::span<const AugmentedPair> pairs, double tau_se);

// Supervised contrastive loss over N vectors. Anchors whose class appears
// only once in the batch contribute zero.
ContrastiveResult cl_su(std::span<const Vector> vectors, std::span<const int> labels, double tau_su);

inline constexpr double kProbabilityClamp = 1e-7;

struct FocalResult {
    double loss = 0.0;
    Vector grads;  // d loss / d p_i
};

// p_i is the positive-class probability. Entries are clamped to
// [1e-7, 1 - 1e-7]; the gradient is zero where the clamp is active.
FocalResult focal_loss(std::span<const double> probs, std::span<const int> labels, double alpha, double gamma);

struct LossBreakdown {
    double cl_se = 0.0;
    double cl_su = 0.0;
    double cl = 0.0;
    double fl = 0.0;
    double total = 0.0;

    friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

struct LossGradients {
    std::vector<Vector> d_vectors;  // 2N, ordered like cl_se grads
    Matrix d_weights;
    Vector d_bias;  // empty when the head has no bias
};

struct LossSettings {
    double tau_se = 0.1;
    double tau_su = 0.05;
    double alpha = 0.3;
    double gamma = 2.0;
    double lambda = 1.0;
    bool mean_reduction = false;
};

struct TermFlags {
    bool use_cl_se = true;
    bool use_cl_su = true;

    friend bool operator==(const TermFlags&, const TermFlags&) = default;
};

struct TotalLoss {
    LossBreakdown breakdown;
    LossGradients grads;
};

// total = FL + lambda * (CL_se + CL_su). FL and CL_su read view_a of each
// pair; CL_se reads both views. Disabled terms are reported as zero.
TotalLoss total_loss(std::span<const AugmentedPair> pairs, std::span<const int> labels,
                     const ClassifierHead& head, const LossSettings& settings, TermFlags flags);

}  // namespace dcl
