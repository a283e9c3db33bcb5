#pragma once

#include "cdrx/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace cdrx::ml {

template <std::size_t Dim>
using Vec = std::array<double, Dim>;

/// A point with a non-negative multiplicity. A tower with 40 calls is one
/// point of weight 40 rather than 40 identical points.
template <std::size_t Dim>
struct WeightedPoint {
    Vec<Dim> x{};
    double weight = 1.0;
};

template <std::size_t Dim>
struct Cluster {
    Vec<Dim> centroid{};
    double weight = 0.0;       // mixing fraction (EM) or mass fraction (k-means)
    Vec<Dim> spread{};         // per-dimension variance
    std::size_t members = 0;   // points hard-assigned here
};

template <std::size_t Dim>
struct ClusterModel {
    std::vector<Cluster<Dim>> clusters;
    std::vector<int> assignment;   // point index -> cluster index
    double quality = 0.0;          // log-likelihood (EM) or BIC (X-Means, EM selection)
    std::vector<double> trace;     // EM: log-likelihood per iteration
    std::size_t k() const { return clusters.size(); }
};

/// Squared (1e-4 degree) floor: repeated tower coordinates would otherwise
/// collapse a component onto a point.
inline constexpr double default_variance_floor = 1e-8;

namespace detail {

/// Platform-independent uniform draw in [0, 1).
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::size_t index_below(std::mt19937_64& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
}

template <std::size_t Dim>
double sqdist(const Vec<Dim>& a, const Vec<Dim>& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < Dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
    return s;
}

template <std::size_t Dim>
std::size_t count_distinct(std::span<const WeightedPoint<Dim>> pts) {
    std::vector<Vec<Dim>> xs;
    xs.reserve(pts.size());
    for (const auto& p : pts) xs.push_back(p.x);
    std::sort(xs.begin(), xs.end());
    return static_cast<std::size_t>(std::unique(xs.begin(), xs.end()) - xs.begin());
}

template <std::size_t Dim>
void check_points(std::span<const WeightedPoint<Dim>> pts, std::size_t k) {
    if (k < 1) throw ConfigError("cluster count must be >= 1");
    for (const auto& p : pts)
        if (!(p.weight > 0.0) || !std::isfinite(p.weight)) throw DataError("cluster point weights must be positive");
    if (count_distinct(pts) < k)
        throw DataError("cannot fit " + std::to_string(k) + " clusters to " + std::to_string(count_distinct(pts)) +
                        " distinct points");
}

/// Weighted k-means++ seeding with greedy local trials. Centres are always
/// distinct input points.
template <std::size_t Dim>
std::vector<Vec<Dim>> kmeanspp(std::span<const WeightedPoint<Dim>> pts, std::size_t k, std::mt19937_64& rng) {
    const std::size_t n = pts.size();
    auto draw = [&](const std::vector<double>& mass) {
        double total = 0.0;
        for (double m : mass) total += m;
        double u = unit(rng) * total;
        for (std::size_t i = 0; i < n; ++i) {
            if (mass[i] <= 0.0) continue;
            u -= mass[i];
            if (u < 0.0) return i;
        }
        for (std::size_t i = n; i-- > 0;)
            if (mass[i] > 0.0) return i;
        return std::size_t{0};
    };
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = pts[i].weight;
    std::vector<Vec<Dim>> centers{pts[draw(w)].x};
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sqdist(pts[i].x, centers[0]);
    const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
    std::vector<double> mass(n);
    while (centers.size() < k) {
        for (std::size_t i = 0; i < n; ++i) mass[i] = pts[i].weight * d2[i];
        std::size_t best = n;
        double best_pot = std::numeric_limits<double>::infinity();
        for (int t = 0; t < trials; ++t) {
            std::size_t c = draw(mass);
            double pot = 0.0;
            for (std::size_t i = 0; i < n; ++i) pot += pts[i].weight * std::min(d2[i], sqdist(pts[i].x, pts[c].x));
            if (pot < best_pot) {
                best_pot = pot;
                best = c;
            }
        }
        centers.push_back(pts[best].x);
        for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], sqdist(pts[i].x, centers.back()));
    }
    return centers;
}

template <std::size_t Dim>
std::vector<int> nearest_assignment(std::span<const WeightedPoint<Dim>> pts, const std::vector<Vec<Dim>>& centers) {
    std::vector<int> a(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.size(); ++c) {
            double d = sqdist(pts[i].x, centers[c]);
            if (d < best) {
                best = d;
                a[i] = static_cast<int>(c);
            }
        }
    }
    return a;
}

/// Weighted Lloyd iterations. Empty clusters keep their previous centre.
template <std::size_t Dim>
std::vector<int> lloyd(std::span<const WeightedPoint<Dim>> pts, std::vector<Vec<Dim>>& centers, int max_iter) {
    auto assign = nearest_assignment(pts, centers);
    for (int it = 0; it < max_iter; ++it) {
        std::vector<Vec<Dim>> sum(centers.size(), Vec<Dim>{});
        std::vector<double> mass(centers.size(), 0.0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto c = static_cast<std::size_t>(assign[i]);
            mass[c] += pts[i].weight;
            for (std::size_t d = 0; d < Dim; ++d) sum[c][d] += pts[i].weight * pts[i].x[d];
        }
        for (std::size_t c = 0; c < centers.size(); ++c)
            if (mass[c] > 0.0)
                for (std::size_t d = 0; d < Dim; ++d) centers[c][d] = sum[c][d] / mass[c];
        auto next = nearest_assignment(pts, centers);
        if (next == assign) break;
        assign = std::move(next);
    }
    return assign;
}

/// Spherical-Gaussian BIC of a hard partition (identical variance across
/// clusters): log-likelihood - p/2 ln R with p = (K-1) + Dim*K + 1 and
/// R the total point weight.
template <std::size_t Dim>
double spherical_bic(std::span<const WeightedPoint<Dim>> pts, const std::vector<Vec<Dim>>& centers,
                     const std::vector<int>& assign, double variance_floor) {
    const double K = static_cast<double>(centers.size());
    std::vector<double> mass(centers.size(), 0.0);
    double R = 0.0, sse = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto c = static_cast<std::size_t>(assign[i]);
        mass[c] += pts[i].weight;
        R += pts[i].weight;
        sse += pts[i].weight * sqdist(pts[i].x, centers[c]);
    }
    double var = R > K ? sse / (Dim * (R - K)) : 0.0;
    var = std::max(var, variance_floor);
    double ll = 0.0;
    for (std::size_t c = 0; c < centers.size(); ++c)
        if (mass[c] > 0.0) ll += mass[c] * std::log(mass[c] / R);
    ll -= R * Dim / 2.0 * std::log(2.0 * std::numbers::pi * var);
    ll -= sse / (2.0 * var);
    double p = (K - 1.0) + Dim * K + 1.0;
    return ll - p / 2.0 * std::log(R);
}

template <std::size_t Dim>
ClusterModel<Dim> hard_model(std::span<const WeightedPoint<Dim>> pts, const std::vector<Vec<Dim>>& centers,
                             const std::vector<int>& assign) {
    ClusterModel<Dim> m;
    m.clusters.resize(centers.size());
    m.assignment = assign;
    double total = 0.0;
    std::vector<double> mass(centers.size(), 0.0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        auto c = static_cast<std::size_t>(assign[i]);
        mass[c] += pts[i].weight;
        total += pts[i].weight;
        m.clusters[c].members += 1;
        for (std::size_t d = 0; d < Dim; ++d) {
            double dx = pts[i].x[d] - centers[c][d];
            m.clusters[c].spread[d] += pts[i].weight * dx * dx;
        }
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
        m.clusters[c].centroid = centers[c];
        m.clusters[c].weight = total > 0.0 ? mass[c] / total : 0.0;
        for (std::size_t d = 0; d < Dim; ++d)
            m.clusters[c].spread[d] = mass[c] > 0.0 ? m.clusters[c].spread[d] / mass[c] : 0.0;
    }
    return m;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Expectation-maximisation for diagonal-covariance Gaussian mixtures.

struct EmOptions {
    std::size_t k = 1;
    int max_iter = 200;
    double tol = 1e-9;
    std::uint64_t seed = 1;
    double variance_floor = default_variance_floor;
};

/// Fits a mixture of `k` axis-aligned Gaussians to weighted points.
///
/// Initialisation is seeded k-means++ followed by a nearest-centre split
/// for the starting variances. Each iteration records the log-likelihood of
/// the current parameters; iteration stops once the gain falls below `tol`.
/// A variance clamped to the floor is still the constrained maximiser, so
/// the trace never decreases. Points are finally assigned to the component
/// of highest responsibility.
template <std::size_t Dim>
ClusterModel<Dim> em_cluster(std::span<const WeightedPoint<Dim>> pts, const EmOptions& opt) {
    detail::check_points(pts, opt.k);
    const std::size_t n = pts.size(), k = opt.k;
    std::mt19937_64 rng(opt.seed);
    auto mean = detail::kmeanspp(pts, k, rng);
    auto init = detail::nearest_assignment(pts, mean);

    std::vector<double> pi(k, 0.0);
    std::vector<Vec<Dim>> var(k, Vec<Dim>{});
    {
        double total = 0.0;
        Vec<Dim> gmean{}, gvar{};
        for (const auto& p : pts) {
            total += p.weight;
            for (std::size_t d = 0; d < Dim; ++d) gmean[d] += p.weight * p.x[d];
        }
        for (std::size_t d = 0; d < Dim; ++d) gmean[d] /= total;
        for (const auto& p : pts)
            for (std::size_t d = 0; d < Dim; ++d) gvar[d] += p.weight * (p.x[d] - gmean[d]) * (p.x[d] - gmean[d]);
        for (std::size_t d = 0; d < Dim; ++d) gvar[d] = std::max(gvar[d] / total, opt.variance_floor);
        std::vector<double> mass(k, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto c = static_cast<std::size_t>(init[i]);
            mass[c] += pts[i].weight;
            for (std::size_t d = 0; d < Dim; ++d) {
                double dx = pts[i].x[d] - mean[c][d];
                var[c][d] += pts[i].weight * dx * dx;
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            pi[c] = mass[c] / total;
            for (std::size_t d = 0; d < Dim; ++d)
                var[c][d] = mass[c] > 0.0 ? std::max(var[c][d] / mass[c], opt.variance_floor) : gvar[d];
        }
    }

    std::vector<double> resp(n * k);
    auto e_step = [&]() {
        double ll = 0.0;
        std::vector<double> logp(k);
        for (std::size_t i = 0; i < n; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                if (pi[c] <= 0.0) {
                    logp[c] = -std::numeric_limits<double>::infinity();
                    continue;
                }
                double lp = std::log(pi[c]);
                for (std::size_t d = 0; d < Dim; ++d) {
                    double dx = pts[i].x[d] - mean[c][d];
                    lp -= 0.5 * (std::log(2.0 * std::numbers::pi * var[c][d]) + dx * dx / var[c][d]);
                }
                logp[c] = lp;
                mx = std::max(mx, lp);
            }
            double s = 0.0;
            for (std::size_t c = 0; c < k; ++c) s += std::exp(logp[c] - mx);
            double lse = mx + std::log(s);
            for (std::size_t c = 0; c < k; ++c) resp[i * k + c] = std::exp(logp[c] - lse);
            ll += pts[i].weight * lse;
        }
        return ll;
    };

    ClusterModel<Dim> model;
    double ll = e_step();
    model.trace.push_back(ll);
    for (int it = 0; it < opt.max_iter; ++it) {
        std::vector<double> mass(k, 0.0);
        std::vector<Vec<Dim>> sum(k, Vec<Dim>{});
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += pts[i].weight;
            for (std::size_t c = 0; c < k; ++c) {
                double r = pts[i].weight * resp[i * k + c];
                mass[c] += r;
                for (std::size_t d = 0; d < Dim; ++d) sum[c][d] += r * pts[i].x[d];
            }
        }
        for (std::size_t c = 0; c < k; ++c) {
            pi[c] = mass[c] / total;
            if (mass[c] <= 0.0) continue;
            for (std::size_t d = 0; d < Dim; ++d) mean[c][d] = sum[c][d] / mass[c];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (mass[c] <= 0.0) continue;
            Vec<Dim> sq{};
            for (std::size_t i = 0; i < n; ++i) {
                double r = pts[i].weight * resp[i * k + c];
                for (std::size_t d = 0; d < Dim; ++d) {
                    double dx = pts[i].x[d] - mean[c][d];
                    sq[d] += r * dx * dx;
                }
            }
            for (std::size_t d = 0; d < Dim; ++d) var[c][d] = std::max(sq[d] / mass[c], opt.variance_floor);
        }
        double next = e_step();
        model.trace.push_back(next);
        bool converged = next - ll < opt.tol;
        ll = next;
        if (converged) break;
    }

    model.quality = ll;
    model.clusters.resize(k);
    model.assignment.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (resp[i * k + c] > resp[i * k + best]) best = c;
        model.assignment[i] = static_cast<int>(best);
        model.clusters[best].members += 1;
    }
    for (std::size_t c = 0; c < k; ++c) {
        model.clusters[c].centroid = mean[c];
        model.clusters[c].weight = pi[c];
        model.clusters[c].spread = var[c];
    }
    return model;
}

/// Free parameters of a diagonal mixture: weights, means and variances.
template <std::size_t Dim>
constexpr double em_parameter_count(std::size_t k) {
    return static_cast<double>(k - 1) + 2.0 * Dim * static_cast<double>(k);
}

/// EM with the cluster count chosen by BIC = LL - p/2 ln(total weight) over
/// `k = 1..k_max` (capped at the number of distinct points). `quality` of the
/// result is its BIC.
template <std::size_t Dim>
ClusterModel<Dim> em_cluster_bic(std::span<const WeightedPoint<Dim>> pts, std::size_t k_max, EmOptions opt) {
    detail::check_points(pts, 1);
    k_max = std::min(k_max, detail::count_distinct(pts));
    double total = 0.0;
    for (const auto& p : pts) total += p.weight;
    ClusterModel<Dim> best;
    double best_bic = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k <= k_max; ++k) {
        opt.k = k;
        auto m = em_cluster(pts, opt);
        double bic = m.quality - em_parameter_count<Dim>(k) / 2.0 * std::log(std::max(total, 1.0));
        if (bic > best_bic) {
            best_bic = bic;
            best = std::move(m);
        }
    }
    best.quality = best_bic;
    return best;
}

// ---------------------------------------------------------------------------
// X-Means.

struct XmeansOptions {
    std::size_t k_min = 1;
    std::size_t k_max = 10;
    std::uint64_t seed = 1;
    int max_iter = 100;
    double variance_floor = default_variance_floor;
};

/// k-means that grows its cluster count by local BIC tests.
///
/// Starts from `k_min` seeded centres; every round tries to split each
/// centre with a 2-means run on its members and keeps the split when the
/// children's BIC beats the parent's. A round where no split wins still
/// splits the centre with the largest local gain. Stops at `k_max` or when
/// nothing can be split, and returns the model with the best global BIC
/// seen (so never worse than the initial `k_min` fit). `quality` is that BIC.
template <std::size_t Dim>
ClusterModel<Dim> xmeans_cluster(std::span<const WeightedPoint<Dim>> pts, const XmeansOptions& opt) {
    if (opt.k_min < 1 || opt.k_min > opt.k_max) throw ConfigError("x-means needs 1 <= k_min <= k_max");
    detail::check_points(pts, opt.k_min);
    const std::size_t k_cap = std::min(opt.k_max, detail::count_distinct(pts));
    std::mt19937_64 rng(opt.seed);
    auto centers = detail::kmeanspp(pts, opt.k_min, rng);
    auto assign = detail::lloyd(pts, centers, opt.max_iter);
    double bic = detail::spherical_bic(pts, centers, assign, opt.variance_floor);
    auto best_centers = centers;
    auto best_assign = assign;
    double best_bic = bic;

    while (centers.size() < k_cap) {
        struct Trial {
            std::vector<Vec<Dim>> kids;
            double gain = -std::numeric_limits<double>::infinity();
        };
        std::vector<Trial> trials(centers.size());
        for (std::size_t c = 0; c < centers.size(); ++c) {
            std::vector<WeightedPoint<Dim>> members;
            for (std::size_t i = 0; i < pts.size(); ++i)
                if (static_cast<std::size_t>(assign[i]) == c) members.push_back(pts[i]);
            if (members.size() < 2 || detail::count_distinct<Dim>(members) < 2) continue;
            std::span<const WeightedPoint<Dim>> ms(members);
            std::vector<int> one(members.size(), 0);
            double parent = detail::spherical_bic(ms, std::vector<Vec<Dim>>{centers[c]}, one, opt.variance_floor);
            trials[c].kids = detail::kmeanspp(ms, 2, rng);
            auto kid_assign = detail::lloyd(ms, trials[c].kids, opt.max_iter);
            trials[c].gain = detail::spherical_bic(ms, trials[c].kids, kid_assign, opt.variance_floor) - parent;
        }
        std::size_t room = k_cap - centers.size(), accepted = 0;
        std::optional<std::size_t> forced;
        for (std::size_t c = 0; c < trials.size(); ++c) {
            if (trials[c].kids.empty()) continue;
            if (trials[c].gain > 0.0) ++accepted;
            if (!forced || trials[c].gain > trials[*forced].gain) forced = c;
        }
        if (!forced) break;
        std::vector<Vec<Dim>> next;
        std::size_t splits = 0;
        for (std::size_t c = 0; c < centers.size(); ++c) {
            bool split = splits < room && !trials[c].kids.empty() &&
                         (accepted ? trials[c].gain > 0.0 : c == *forced);
            if (split) {
                next.push_back(trials[c].kids[0]);
                next.push_back(trials[c].kids[1]);
                ++splits;
            } else {
                next.push_back(centers[c]);
            }
        }
        centers = std::move(next);
        assign = detail::lloyd(pts, centers, opt.max_iter);
        bic = detail::spherical_bic(pts, centers, assign, opt.variance_floor);
        if (bic > best_bic) {
            best_bic = bic;
            best_centers = centers;
            best_assign = assign;
        }
    }
    auto m = detail::hard_model(pts, best_centers, best_assign);
    m.quality = best_bic;
    return m;
}

/// Plain weighted k-means with k-means++ seeding; `quality` is the
/// spherical BIC.
template <std::size_t Dim>
ClusterModel<Dim> kmeans_cluster(std::span<const WeightedPoint<Dim>> pts, std::size_t k, std::uint64_t seed,
                                 int max_iter = 100) {
    detail::check_points(pts, k);
    std::mt19937_64 rng(seed);
    auto centers = detail::kmeanspp(pts, k, rng);
    auto assign = detail::lloyd(pts, centers, max_iter);
    auto m = detail::hard_model(pts, centers, assign);
    m.quality = detail::spherical_bic(pts, centers, assign, default_variance_floor);
    return m;
}

// ---------------------------------------------------------------------------
// Linear max-margin classifier.

template <class Label>
struct Sample {
    std::vector<double> x;
    Label label{};
};

/// `classes.first` is the negative side, `classes.second` the positive
/// side. A decision value of exactly zero maps to `classes.first`.
template <class Label>
struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    std::pair<Label, Label> classes{};

    double decision(std::span<const double> x) const {
        if (x.size() != weights.size())
            throw DataError("feature dimension " + std::to_string(x.size()) + " does not match model dimension " +
                            std::to_string(weights.size()));
        double s = bias;
        for (std::size_t i = 0; i < x.size(); ++i) s += weights[i] * x[i];
        return s;
    }
};

template <class Label>
Label predict_linear(const LinearModel<Label>& m, std::span<const double> x) {
    return m.decision(x) > 0.0 ? m.classes.second : m.classes.first;
}

struct LinearTrainOptions {
    int epochs = 200;
    double learning_rate = 0.1;
    double regularization = 1e-4;
    std::uint64_t seed = 1;
    /// Project weights onto w >= 0 after each step, for features where more
    /// must never mean less (activity levels).
    bool nonnegative_weights = false;
};

/// Minimises mean hinge loss + (λ/2)||w||² by per-sample subgradient steps
/// with step size lr / (1 + lr·λ·t). Each epoch visits the samples in a
/// seeded permutation; training stops early after an epoch with no margin
/// violation. The bias is not regularised. The two classes are ordered so
/// the smaller label is `classes.first`.
template <class Label>
LinearModel<Label> train_linear(std::span<const Sample<Label>> samples, const LinearTrainOptions& opt = {}) {
    if (samples.empty()) throw DataError("train_linear: no samples");
    const std::size_t dim = samples[0].x.size();
    Label lo = samples[0].label, hi = samples[0].label;
    for (const auto& s : samples) {
        if (s.x.size() != dim) throw DataError("train_linear: inconsistent feature dimension");
        if (s.label < lo) lo = s.label;
        if (hi < s.label) hi = s.label;
    }
    if (!(lo < hi)) throw DataError("train_linear: both classes must be present");
    for (const auto& s : samples)
        if (!(s.label == lo) && !(s.label == hi)) throw DataError("train_linear: more than two classes");

    LinearModel<Label> m;
    m.weights.assign(dim, 0.0);
    m.classes = {lo, hi};
    std::mt19937_64 rng(opt.seed);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    double t = 0.0;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[detail::index_below(rng, i)]);
        std::size_t violations = 0;
        for (std::size_t idx : order) {
            const auto& s = samples[idx];
            t += 1.0;
            double eta = opt.learning_rate / (1.0 + opt.learning_rate * opt.regularization * t);
            double y = s.label == hi ? 1.0 : -1.0;
            double margin = y * m.decision(s.x);
            double shrink = 1.0 - eta * opt.regularization;
            for (auto& w : m.weights) w *= shrink;
            if (margin < 1.0) {
                ++violations;
                for (std::size_t d = 0; d < dim; ++d) m.weights[d] += eta * y * s.x[d];
                m.bias += eta * y;
            }
            if (opt.nonnegative_weights)
                for (auto& w : m.weights) w = std::max(0.0, w);
        }
        if (violations == 0) break;
    }
    return m;
}

template <class Label>
double training_accuracy(const LinearModel<Label>& m, std::span<const Sample<Label>> samples) {
    if (samples.empty()) return 0.0;
    std::size_t ok = 0;
    for (const auto& s : samples) ok += predict_linear(m, std::span<const double>(s.x)) == s.label;
    return static_cast<double>(ok) / static_cast<double>(samples.size());
}

/// Per-feature z-scoring; constant features pass through centred.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> scale;

    static Standardizer fit(const std::vector<std::vector<double>>& rows) {
        Standardizer s;
        if (rows.empty()) return s;
        const std::size_t dim = rows[0].size();
        s.mean.assign(dim, 0.0);
        s.scale.assign(dim, 1.0);
        for (const auto& r : rows)
            for (std::size_t d = 0; d < dim; ++d) s.mean[d] += r[d];
        for (auto& m : s.mean) m /= static_cast<double>(rows.size());
        std::vector<double> var(dim, 0.0);
        for (const auto& r : rows)
            for (std::size_t d = 0; d < dim; ++d) var[d] += (r[d] - s.mean[d]) * (r[d] - s.mean[d]);
        for (std::size_t d = 0; d < dim; ++d) {
            double sd = std::sqrt(var[d] / static_cast<double>(rows.size()));
            s.scale[d] = sd > 0.0 ? sd : 1.0;
        }
        return s;
    }

    std::vector<double> apply(std::span<const double> x) const {
        std::vector<double> out(x.begin(), x.end());
        for (std::size_t d = 0; d < out.size() && d < mean.size(); ++d) out[d] = (out[d] - mean[d]) / scale[d];
        return out;
    }
};

} // namespace cdrx::ml
