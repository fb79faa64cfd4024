// SPDX-License-Identifier: Apache-2.0
//
// wchlab - dimensionality-guided sizing laboratory for wireless channel models
// Copyright (C) 2026 the wchlab authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef WCH_MANIFOLD_HPP
#define WCH_MANIFOLD_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <cblas.h>
#include <lapacke.h>

#include "wch/channel.hpp"
#include "wch/errors.hpp"
#include "wch/parallel.hpp"

extern "C" void openblas_set_num_threads(int num_threads);

namespace wch::manifold {

/// Dense row-major matrix of points: one row per sample.
struct PointMatrix {
    std::size_t n = 0;   // number of points
    std::size_t dim = 0; // ambient dimension
    std::vector<double> x;

    PointMatrix() = default;
    PointMatrix(std::size_t n_, std::size_t dim_) : n(n_), dim(dim_), x(n_ * dim_, 0.0) {}

    double &at(std::size_t i, std::size_t j) { return x[i * dim + j]; }
    const double &at(std::size_t i, std::size_t j) const { return x[i * dim + j]; }
    const double *row(std::size_t i) const { return x.data() + i * dim; }
};

/// The k smallest neighbor distances per point, ascending, self and exact
/// duplicates excluded. Exclusion statistics feed the reliability note.
struct KnnResult {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<double> dist; // n * k, row-major, ascending per row
    std::uint64_t duplicate_exclusions = 0;
    std::uint64_t duplicate_pairs = 0;
    std::uint64_t total_pairs = 0;

    double at(std::size_t i, std::size_t j) const { return dist[i * k + j]; }
};

/// Collapse-risk indicator: rho = n_samples / 2^d_nl with a regime label.
struct CollapseRisk {
    double rho = 0.0;
    std::string label;
};

/// Intrinsic-dimension estimates plus the collapse-risk indicator.
struct DimReport {
    double d_twonn = 0.0;
    double d_mle = 0.0;
    std::uint32_t d_pca_90 = 0;
    std::uint32_t d_pca_95 = 0;
    double rho = 0.0;
    std::uint32_t n_samples = 0;
    std::string notes;
};

struct ProfileOptions {
    std::uint32_t k_mle = 10;
    double discard_fraction = 0.10; // Two-NN: drop the largest ratio tail
    double pca_low = 0.90;
    double pca_high = 0.95;
    double rho_collapse = 1e-4;
    double rho_healthy = 10.0;
    std::vector<std::uint32_t> k_band = {5, 10, 15}; // MLE stability band
};

namespace detail {

inline void pin_blas_single_thread() {
    // One BLAS thread keeps reductions in a fixed order, so results do not
    // depend on machine load; coarse parallelism lives in wch::parallel_for.
    static const bool done = [] {
        openblas_set_num_threads(1);
        return true;
    }();
    (void)done;
}

/// Gram matrix of the point set plus exact-duplicate bookkeeping. One
/// symmetric rank-k update powers the exact kNN distances
/// (d^2(i,j) = G_ii + G_jj - 2 G_ij) and, after double-centering, the PCA
/// spectrum, so the point matrix is touched exactly once.
struct GramCache {
    std::size_t n = 0;
    std::vector<double> g;                  // n*n, full symmetric
    std::vector<std::uint32_t> group;       // duplicate-group id per point
    std::vector<std::uint32_t> group_size;  // per group id
    std::uint64_t duplicate_pairs = 0;
    double trace = 0.0;
};

inline std::uint64_t hash_row(const double *row, std::size_t dim) {
    std::uint64_t h = 1469598103934665603ULL; // FNV-1a
    for (std::size_t j = 0; j < dim; ++j) {
        const double canon = row[j] + 0.0; // folds -0.0 into +0.0
        std::uint64_t bits;
        std::memcpy(&bits, &canon, 8);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFF;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

inline GramCache build_gram(const PointMatrix &pts) {
    require(pts.n >= 1 && pts.dim >= 1, ErrorCode::invalid_argument, "empty point matrix");
    pin_blas_single_thread();
    const std::size_t n = pts.n;

    GramCache c;
    c.n = n;
    c.g.assign(n * n, 0.0);
    cblas_dsyrk(CblasRowMajor, CblasLower, CblasNoTrans, int(n), int(pts.dim), 1.0,
                pts.x.data(), int(pts.dim), 0.0, c.g.data(), int(n));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            c.g[i * n + j] = c.g[j * n + i];
    for (std::size_t i = 0; i < n; ++i)
        c.trace += c.g[i * n + i];

    // Group points with identical coordinates (value equality; r1 = 0 would
    // make neighbor ratios undefined). Sorting by hash keeps this O(n log n).
    std::vector<std::uint64_t> hash(n);
    parallel_for(n, [&](std::size_t i) { hash[i] = hash_row(pts.row(i), pts.dim); });
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    auto row_less = [&](std::uint32_t a, std::uint32_t b) {
        if (hash[a] != hash[b])
            return hash[a] < hash[b];
        return std::lexicographical_compare(pts.row(a), pts.row(a) + pts.dim, pts.row(b),
                                            pts.row(b) + pts.dim);
    };
    std::sort(order.begin(), order.end(), row_less);
    auto rows_equal = [&](std::uint32_t a, std::uint32_t b) {
        return hash[a] == hash[b] &&
               std::equal(pts.row(a), pts.row(a) + pts.dim, pts.row(b));
    };
    c.group.assign(n, 0);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && rows_equal(order[i], order[j]))
            ++j;
        const std::uint32_t gid = std::uint32_t(c.group_size.size());
        const std::uint64_t g = j - i;
        for (std::size_t t = i; t < j; ++t)
            c.group[order[t]] = gid;
        c.group_size.push_back(std::uint32_t(g));
        c.duplicate_pairs += g * (g - 1) / 2;
        i = j;
    }
    return c;
}

inline KnnResult knn_from_gram(const GramCache &c, std::size_t k) {
    const std::size_t n = c.n;
    require(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
    require(k < n, ErrorCode::invalid_argument,
            "k = " + std::to_string(k) + " must be smaller than n_points = " + std::to_string(n));
    require(c.group_size.size() > 1, ErrorCode::degenerate_distances,
            "all points are identical");

    KnnResult r;
    r.n = n;
    r.k = k;
    r.dist.assign(n * k, 0.0);
    r.duplicate_pairs = c.duplicate_pairs;
    r.total_pairs = std::uint64_t(n) * (n - 1) / 2;
    for (const std::uint32_t g : c.group_size)
        r.duplicate_exclusions += std::uint64_t(g) * (g - 1);

    parallel_for(n, [&](std::size_t i) {
        const double gii = c.g[i * n + i];
        const std::uint32_t gi = c.group[i];
        std::vector<double> cand;
        cand.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i || c.group[j] == gi)
                continue; // self or exact duplicate
            const double d2 = gii + c.g[j * n + j] - 2.0 * c.g[i * n + j];
            cand.push_back(d2 > 0.0 ? d2 : 0.0);
        }
        require(cand.size() >= k, ErrorCode::degenerate_distances,
                "point " + std::to_string(i) +
                    " has fewer than k distinct neighbors after duplicate exclusion");
        std::partial_sort(cand.begin(), cand.begin() + std::ptrdiff_t(k), cand.end());
        for (std::size_t j = 0; j < k; ++j)
            r.dist[i * k + j] = std::sqrt(cand[j]);
    });
    return r;
}

inline double twonn_from_knn(const KnnResult &knn, double discard_fraction) {
    require(knn.k >= 2, ErrorCode::invalid_argument, "two-NN needs k >= 2 distances");
    require(discard_fraction >= 0.0 && discard_fraction <= 0.5, ErrorCode::invalid_argument,
            "discard_fraction must be in [0, 0.5]");
    const std::size_t n = knn.n;
    std::vector<double> mu(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r1 = knn.at(i, 0);
        const double r2 = knn.at(i, 1);
        require(r1 > 0.0, ErrorCode::degenerate_distances,
                "zero first-neighbor distance at point " + std::to_string(i));
        mu[i] = r2 / r1;
    }
    std::sort(mu.begin(), mu.end());

    // Keep the smallest ratios; the top tail (and with it the F = 1 plotting
    // position) is discarded, at least one point always.
    const std::size_t drop =
        std::max<std::size_t>(1, std::size_t(std::floor(discard_fraction * double(n))));
    require(n > drop + 1, ErrorCode::invalid_argument, "too few points after tail discard");
    const std::size_t m = n - drop;

    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 1; i <= m; ++i) {
        const double x = std::log(mu[i - 1]);
        const double y = -std::log(1.0 - double(i) / double(n));
        sxy += x * y;
        sxx += x * x;
    }
    require(sxx > 0.0, ErrorCode::degenerate_distances,
            "neighbor ratios carry no spread (all mu = 1)");
    return sxy / sxx;
}

inline double mle_from_knn(const KnnResult &knn, std::size_t k) {
    require(k >= 2, ErrorCode::invalid_argument, "MLE needs k >= 2");
    require(k <= knn.k, ErrorCode::invalid_argument, "k exceeds available neighbor distances");
    const std::size_t n = knn.n;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double tk = knn.at(i, k - 1);
        require(tk > 0.0, ErrorCode::degenerate_distances,
                "zero neighbor distance at point " + std::to_string(i));
        for (std::size_t j = 0; j + 1 < k; ++j) {
            const double tj = knn.at(i, j);
            require(tj > 0.0, ErrorCode::degenerate_distances,
                    "zero neighbor distance at point " + std::to_string(i));
            s += std::log(tk / tj);
        }
    }
    require(s > 0.0, ErrorCode::degenerate_distances,
            "neighbor distances carry no spread across orders");
    return double(n) * double(k - 1) / s;
}

/// Eigenvalues of the double-centered Gram matrix, descending and clamped at
/// zero. These are (n-1) times the PCA covariance eigenvalues, so variance
/// fractions come out identical without ever forming the covariance.
inline std::vector<double> eigenvalues_from_gram(const GramCache &c) {
    pin_blas_single_thread();
    const std::size_t n = c.n;
    std::vector<double> m = c.g;
    std::vector<double> rowmean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
            acc += m[i * n + j];
        rowmean[i] = acc / double(n);
        grand += acc;
    }
    grand /= double(n) * double(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            m[i * n + j] += grand - rowmean[i] - rowmean[j];

    std::vector<double> w(n, 0.0);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_ROW_MAJOR, 'N', 'L', lapack_int(n),
                                           m.data(), lapack_int(n), w.data());
    require(info == 0, ErrorCode::invalid_state,
            "symmetric eigenvalue solver failed with info " + std::to_string(info));
    std::reverse(w.begin(), w.end());
    // Zero out the numerical-noise floor so exact low-rank data reports its
    // true rank.
    const double floor_val = w.empty() || w.front() <= 0.0 ? 0.0 : 1e-12 * w.front();
    for (auto &v : w)
        v = v > floor_val ? v : 0.0;
    return w;
}

inline std::uint32_t pca_from_eigenvalues(const std::vector<double> &eigs, double threshold,
                                          double scale_reference) {
    require(threshold > 0.0 && threshold < 1.0, ErrorCode::invalid_argument,
            "variance threshold must be in (0, 1)");
    double total = 0.0;
    for (const double v : eigs)
        total += v;
    require(total > 1e-12 * std::max(1.0, scale_reference), ErrorCode::degenerate_data,
            "all points are identical: zero total variance");
    double cum = 0.0;
    for (std::size_t m = 0; m < eigs.size(); ++m) {
        cum += eigs[m];
        if (cum >= threshold * total)
            return std::uint32_t(m + 1);
    }
    return std::uint32_t(eigs.size());
}

} // namespace detail

/// Flattens each complex sample into [real parts; imaginary parts] (row-major
/// within each half) and scales it to unit Euclidean norm. Unit norm removes
/// the path-loss scale, which would otherwise add a spurious dimension.
inline PointMatrix flatten_normalize(const synth::ChannelDataset &ds) {
    require(!ds.samples.empty(), ErrorCode::invalid_argument, "dataset is empty");
    const std::size_t n = ds.samples.size();
    const std::size_t entries = ds.samples.front().h.size();
    for (const auto &s : ds.samples)
        require(s.h.size() == entries, ErrorCode::invalid_shape, "samples disagree on shape");

    PointMatrix pts(n, 2 * entries);
    parallel_for(n, [&](std::size_t i) {
        const auto &h = ds.samples[i].h;
        double *row = pts.x.data() + i * pts.dim;
        double norm2 = 0.0;
        for (std::size_t e = 0; e < entries; ++e) {
            row[e] = double(h[e].real());
            row[entries + e] = double(h[e].imag());
            norm2 += row[e] * row[e] + row[entries + e] * row[entries + e];
        }
        require(norm2 > 0.0, ErrorCode::degenerate_sample,
                "sample " + std::to_string(i) + " has zero norm");
        const double inv = 1.0 / std::sqrt(norm2);
        for (std::size_t e = 0; e < 2 * entries; ++e)
            row[e] *= inv;
    });
    return pts;
}

/// Exact k-nearest-neighbor distances (Euclidean, brute force via the Gram
/// matrix). Self and exact duplicates are excluded from each neighbor list.
inline KnnResult knn_distances(const PointMatrix &points, std::size_t k) {
    require(points.n >= 2, ErrorCode::invalid_argument, "need at least two points");
    const auto cache = detail::build_gram(points);
    return detail::knn_from_gram(cache, k);
}

/// Two-NN intrinsic-dimension estimate: per-point ratio mu = r2/r1, the
/// largest 10% (configurable) of ratios discarded, then a least-squares fit
/// through the origin of -log(1 - i/n) against log mu over the sorted rest.
inline double twonn_estimate(const PointMatrix &points, double discard_fraction = 0.10) {
    require(points.n >= 10, ErrorCode::invalid_argument,
            "two-NN needs at least 10 points");
    const auto cache = detail::build_gram(points);
    return detail::twonn_from_knn(detail::knn_from_gram(cache, 2), discard_fraction);
}

/// Levina-Bickel MLE intrinsic dimension, corrected global form:
/// d = [ (1/(n(k-1))) sum_x sum_{j<k} log(T_k(x)/T_j(x)) ]^{-1}.
inline double mle_estimate(const PointMatrix &points, std::size_t k) {
    require(k >= 2, ErrorCode::invalid_argument, "MLE needs k >= 2");
    require(points.n > k, ErrorCode::invalid_argument, "need more points than k");
    const auto cache = detail::build_gram(points);
    return detail::mle_from_knn(detail::knn_from_gram(cache, k), k);
}

/// Smallest number of principal components whose eigenvalues cover at least
/// threshold x total variance.
inline std::uint32_t pca_dimension(const PointMatrix &points, double variance_threshold) {
    require(points.n >= 2, ErrorCode::invalid_argument, "PCA needs at least two points");
    const auto cache = detail::build_gram(points);
    const auto eigs = detail::eigenvalues_from_gram(cache);
    return detail::pca_from_eigenvalues(eigs, variance_threshold, cache.trace);
}

inline std::string label_for_rho(double rho, double collapse_threshold = 1e-4,
                                 double healthy_threshold = 10.0) {
    if (rho < collapse_threshold)
        return "collapse";
    if (rho > healthy_threshold)
        return "healthy";
    return "intermediate";
}

/// rho = n_samples / 2^d_nl with the regime label. The thresholds separate
/// sample-starved (collapse) from comfortably covered (healthy) manifolds;
/// the band between them is labeled, never interpolated.
inline CollapseRisk collapse_risk(std::uint64_t n_samples, double d_nl,
                                  double collapse_threshold = 1e-4,
                                  double healthy_threshold = 10.0) {
    require(n_samples >= 1, ErrorCode::invalid_argument, "n_samples must be >= 1");
    require(d_nl > 0.0 && std::isfinite(d_nl), ErrorCode::invalid_argument,
            "d_nl must be positive and finite");
    CollapseRisk r;
    r.rho = double(n_samples) * std::exp2(-d_nl);
    r.label = label_for_rho(r.rho, collapse_threshold, healthy_threshold);
    return r;
}

/// Full dimensionality profile of a dataset: flatten/normalize once, compute
/// the Gram matrix once, then Two-NN, MLE (with a k-stability band), PCA at
/// both thresholds, and the collapse-risk indicator.
inline DimReport profile(const synth::ChannelDataset &ds, const ProfileOptions &opts = {}) {
    require(opts.k_mle >= 2, ErrorCode::invalid_argument, "k_mle must be >= 2");
    const PointMatrix pts = flatten_normalize(ds);
    require(pts.n >= 10, ErrorCode::invalid_argument, "profiling needs at least 10 samples");

    std::size_t k_max = std::max<std::size_t>(2, opts.k_mle);
    for (const auto k : opts.k_band)
        k_max = std::max<std::size_t>(k_max, k);
    require(k_max < pts.n, ErrorCode::invalid_argument,
            "neighbor count exceeds the number of samples");

    const auto cache = detail::build_gram(pts);
    const auto knn = detail::knn_from_gram(cache, k_max);

    DimReport rep;
    rep.n_samples = std::uint32_t(pts.n);
    rep.d_twonn = detail::twonn_from_knn(knn, opts.discard_fraction);
    rep.d_mle = detail::mle_from_knn(knn, opts.k_mle);
    const auto eigs = detail::eigenvalues_from_gram(cache);
    rep.d_pca_90 = detail::pca_from_eigenvalues(eigs, opts.pca_low, cache.trace);
    rep.d_pca_95 = detail::pca_from_eigenvalues(eigs, opts.pca_high, cache.trace);

    const CollapseRisk risk =
        collapse_risk(pts.n, rep.d_twonn, opts.rho_collapse, opts.rho_healthy);
    rep.rho = risk.rho;

    std::ostringstream notes;
    notes.precision(3);
    notes << "regime=" << risk.label;
    notes << "; mle_band";
    for (const auto k : opts.k_band)
        notes << " k" << k << "=" << detail::mle_from_knn(knn, k);
    const double dup_pct =
        knn.total_pairs == 0 ? 0.0
                             : 100.0 * double(knn.duplicate_pairs) / double(knn.total_pairs);
    notes << "; duplicate_pairs=" << knn.duplicate_pairs << " (" << dup_pct << "% of pairs)";
    if (dup_pct > 1.0)
        notes << "; UNRELIABLE: more than 1% of point pairs are exact duplicates";
    rep.notes = notes.str();
    return rep;
}

} // namespace wch::manifold

#endif
