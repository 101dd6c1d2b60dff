#include "dcl/gradcheck.hpp"

#include <cmath>

#include "dcl/encoder.hpp"
#include "dcl/losses.hpp"

namespace dcl {

GradcheckCase compare_gradients(std::string name, std::span<const double> analytic, std::span<const double> numeric,
                                const GradcheckTolerance& tol) {
    GradcheckCase result;
    result.name = std::move(name);
    result.coordinates = analytic.size();
    if (analytic.size() != numeric.size()) {
        result.failures = 1;
        result.worst_error = INFINITY;
        return result;
    }
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double diff = std::abs(analytic[i] - numeric[i]);
        double err;
        bool ok;
        if (std::abs(analytic[i]) < tol.absolute_floor) {
            err = diff;
            ok = diff < tol.absolute_floor;
        } else {
            err = diff / std::abs(analytic[i]);
            ok = err < tol.relative;
        }
        if (!std::isfinite(err)) ok = false;
        if (!ok) ++result.failures;
        result.worst_error = std::max(result.worst_error, err);
    }
    return result;
}

namespace {

struct RandomBatch {
    std::vector<AugmentedPair> pairs;
    std::vector<int> labels;
    ClassifierHead head;
};

RandomBatch random_batch(std::size_t n, std::size_t d, Rng& rng) {
    RandomBatch b;
    for (std::size_t j = 0; j < n; ++j) {
        Vector base(d);
        for (double& x : base) x = rng.normal();
        AugmentedPair p;
        p.view_a = base;
        p.view_b = base;
        for (std::size_t r = 0; r < d; ++r) {
            p.view_a[r] += 0.5 * rng.normal();
            p.view_b[r] += 0.5 * rng.normal();
        }
        b.pairs.push_back(std::move(p));
        b.labels.push_back(static_cast<int>(rng.below(2)));
    }
    b.head.weights = Matrix(d, kNumClasses);
    for (double& w : b.head.weights.values()) w = 0.5 * rng.normal();
    return b;
}

Vector pack_views(const std::vector<AugmentedPair>& pairs) {
    Vector x;
    for (const AugmentedPair& p : pairs) {
        x.insert(x.end(), p.view_a.begin(), p.view_a.end());
        x.insert(x.end(), p.view_b.begin(), p.view_b.end());
    }
    return x;
}

std::vector<AugmentedPair> unpack_views(std::span<const double> x, std::size_t n, std::size_t d) {
    std::vector<AugmentedPair> pairs(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double* a = x.data() + 2 * j * d;
        pairs[j].view_a.assign(a, a + d);
        pairs[j].view_b.assign(a + d, a + 2 * d);
    }
    return pairs;
}

Vector flatten(const std::vector<Vector>& grads) {
    Vector out;
    for (const Vector& g : grads) out.insert(out.end(), g.begin(), g.end());
    return out;
}

}  // namespace

std::vector<GradcheckCase> run_gradcheck_suite(std::uint64_t seed, const GradcheckTolerance& tol,
                                               const std::function<void(const GradcheckCase&)>& on_case) {
    std::vector<GradcheckCase> cases;
    const auto record = [&](GradcheckCase c) {
        if (on_case) on_case(c);
        cases.push_back(std::move(c));
    };
    const LossSettings settings;
    const Rng root(seed);
    for (std::uint64_t rep = 0; rep < 3; ++rep) {
        for (std::size_t n : {2, 4, 8}) {
            for (std::size_t d : {4, 16}) {
                Rng rng = root.derive(rep * 1000 + n * 100 + d);
                const RandomBatch batch = random_batch(n, d, rng);
                const std::string tag =
                    "[seed " + std::to_string(rep) + " N=" + std::to_string(n) + " d=" + std::to_string(d) + "]";
                const Vector x = pack_views(batch.pairs);

                {
                    const auto f = [&](std::span<const double> v) { return cl_se(unpack_views(v, n, d), settings.tau_se).loss; };
                    record(compare_gradients("cl_se " + tag, flatten(cl_se(batch.pairs, settings.tau_se).grads),
                                             finite_diff_grad(f, x, tol.step), tol));
                }
                {
                    std::vector<Vector> anchors;
                    Vector xa;
                    for (const AugmentedPair& p : batch.pairs) {
                        anchors.push_back(p.view_a);
                        xa.insert(xa.end(), p.view_a.begin(), p.view_a.end());
                    }
                    const auto f = [&](std::span<const double> v) {
                        std::vector<Vector> vs(n);
                        for (std::size_t j = 0; j < n; ++j) vs[j].assign(v.begin() + j * d, v.begin() + (j + 1) * d);
                        return cl_su(vs, batch.labels, settings.tau_su).loss;
                    };
                    record(compare_gradients("cl_su " + tag, flatten(cl_su(anchors, batch.labels, settings.tau_su).grads),
                                             finite_diff_grad(f, xa, tol.step), tol));
                }
                {
                    Vector probs(n);
                    for (double& p : probs) p = rng.uniform(0.05, 0.95);
                    const auto f = [&](std::span<const double> v) {
                        return focal_loss(v, batch.labels, settings.alpha, settings.gamma).loss;
                    };
                    record(compare_gradients("focal " + tag,
                                             focal_loss(probs, batch.labels, settings.alpha, settings.gamma).grads,
                                             finite_diff_grad(f, probs, tol.step), tol));
                }
                {
                    Vector full = x;
                    const auto w = batch.head.weights.values();
                    full.insert(full.end(), w.begin(), w.end());
                    const std::size_t nv = x.size();
                    const auto f = [&](std::span<const double> v) {
                        ClassifierHead head;
                        head.weights = Matrix(d, kNumClasses, Vector(v.begin() + nv, v.end()));
                        return total_loss(unpack_views(v.first(nv), n, d), batch.labels, head, settings, {}).breakdown.total;
                    };
                    const TotalLoss tl = total_loss(batch.pairs, batch.labels, batch.head, settings, {});
                    Vector analytic = flatten(tl.grads.d_vectors);
                    const auto dw = tl.grads.d_weights.values();
                    analytic.insert(analytic.end(), dw.begin(), dw.end());
                    record(compare_gradients("total " + tag, analytic, finite_diff_grad(f, full, tol.step), tol));
                }
            }
        }
    }
    return cases;
}

}  // namespace dcl
