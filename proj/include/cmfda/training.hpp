#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmfda/detection.hpp"

namespace cmfda {

// ---------------------------------------------------------------------------
// Confusion matrix and skill scores
// ---------------------------------------------------------------------------

/// S: predicted 1, observed 1. T: predicted 0, observed 1.
/// U: predicted 0, observed 0. V: predicted 1, observed 0.
struct ConfusionCounts {
    long S = 0;
    long T = 0;
    long U = 0;
    long V = 0;

    long R() const noexcept { return V + S; }
    long W() const noexcept { return U + T; }
    long N0() const noexcept { return U + V; }
    long N1() const noexcept { return T + S; }
    long N() const noexcept { return N0() + N1(); }

    void add(bool predicted, bool observed) noexcept;
    ConfusionCounts& operator+=(const ConfusionCounts& o) noexcept;
    bool operator==(const ConfusionCounts&) const = default;
};

/// Binary flags, one byte per pixel.
using Flags = std::vector<std::uint8_t>;

/// Throws KeyMismatch unless both maps have the same pixel set.
ConfusionCounts confusion(const std::map<PixelId, bool>& preds, const std::map<PixelId, bool>& labels);
/// Position-aligned variant; throws KeyMismatch on a length mismatch.
ConfusionCounts confusion(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> labels);

/// S/N1 + U/N0 - 1. Throws DegenerateClass when either class is empty.
double tss(const ConfusionCounts& c);

struct Accuracies {
    double producer;              ///< S/N1
    std::optional<double> user;   ///< S/R, empty when nothing was predicted positive
};

/// Throws DegenerateClass when N1 = 0.
Accuracies accuracies(const ConfusionCounts& c);
/// Throws NoPositivePredictions when R = 0.
double user_accuracy(const ConfusionCounts& c);

// ---------------------------------------------------------------------------
// Training data
// ---------------------------------------------------------------------------

/// Prediction errors of one pixel with its ground-truth label. The errors
/// are shared so that folds and site subsets copy cheaply.
struct LabeledPixel {
    std::shared_ptr<const PixelErrors> errors;
    bool z = false;
};

Flags labels_of(std::span<const LabeledPixel> data);

/// Flags of `rule` over every pixel, evaluated in parallel.
Flags predict_all(const DetectionRule& rule, std::span<const LabeledPixel> data, int threads = 1);

// ---------------------------------------------------------------------------
// Threshold search
// ---------------------------------------------------------------------------

/// Threshold grids at the scale used in practice.
std::vector<double> default_grid(RuleKind kind, Band band = Band::NIR);
/// Inclusive arithmetic range; throws InvalidConfig on a non-positive step or
/// an empty range.
std::vector<double> make_grid(double first, double last, double step);

struct GridResult {
    double threshold = 0.0;
    double tss = 0.0;
    ConfusionCounts counts;
};

/// Maximizes tss over `grid` for pixels with scores s, flagged iff L < s.
/// Ties go to the smallest threshold. Throws DegenerateClass or InvalidConfig
/// (empty grid).
GridResult grid_search_scores(std::span<const double> scores, std::span<const std::uint8_t> labels,
                              std::span<const double> grid);

GridResult grid_search_univariate(std::span<const LabeledPixel> data, Band band, int consec,
                                  std::span<const double> grid, int threads = 1);
GridResult grid_search_mahalanobis(std::span<const LabeledPixel> data, const CubeCovarianceTable& cov, int consec,
                                   std::span<const double> grid, int threads = 1);

/// Geometric cooling T <- cooling*T every `iters_per_level` proposals.
struct AnnealConfig {
    double t0 = 0.1;
    double cooling = 0.95;
    int iters_per_level = 200;
    int iterations = 4000;
};

struct AnnealResult {
    std::size_t ix = 0;
    std::size_t iy = 0;
    double tss = 0.0;
    long evaluations = 0;  ///< distinct grid points whose utility was computed
};

/// Simulated annealing over an nx-by-ny grid of utilities. Proposals move to
/// a uniformly chosen neighbor (up to 8); uphill moves are always taken,
/// downhill ones with probability exp(delta/T). Returns the best point seen.
AnnealResult anneal_grid(const std::function<double(std::size_t, std::size_t)>& utility, std::size_t nx,
                         std::size_t ny, std::size_t ix0, std::size_t iy0, const AnnealConfig& cfg,
                         std::uint64_t seed);

struct AnnealMultivariateResult {
    double threshold_nir = 0.0;
    double threshold_ndvi = 0.0;
    double tss = 0.0;
    ConfusionCounts counts;
};

/// Throws InitOffGrid when the init point is not a grid node, and
/// DegenerateClass when labels hold a single class.
AnnealMultivariateResult anneal_multivariate(std::span<const LabeledPixel> data, int consec,
                                             std::span<const double> grid_nir, std::span<const double> grid_ndvi,
                                             double init_nir, double init_ndvi, const AnnealConfig& cfg,
                                             std::uint64_t seed, int threads = 1);

/// Index of the grid node closest to `value`.
std::size_t nearest_grid_index(std::span<const double> grid, double value);

// ---------------------------------------------------------------------------
// Cross-validation and fixed-threshold sweeps
// ---------------------------------------------------------------------------

/// Fold id (0..k-1) per pixel; each class is shuffled and dealt round-robin.
/// Throws TooFewPositives when a class has fewer than k members and
/// InvalidConfig when k < 2.
std::vector<int> stratified_folds(std::span<const std::uint8_t> labels, int k, std::uint64_t seed);

using Trainer = std::function<DetectionRule(std::span<const LabeledPixel> train)>;

struct CvResult {
    double mean_tss = 0.0;  ///< mean of held-out fold tss
    ConfusionCounts pooled;
    std::vector<ConfusionCounts> folds;
};

CvResult cross_validate(std::span<const LabeledPixel> data, const Trainer& trainer, int k, std::uint64_t seed,
                        int threads = 1);

struct SweepRow {
    int consec = 0;
    ConfusionCounts counts;
    std::optional<double> tss;  ///< empty when a class is missing
};

/// Applies `rule` unchanged except for C = 2..6.
std::vector<SweepRow> sweep_fixed(const DetectionRule& rule, std::span<const LabeledPixel> data, int threads = 1);

// ---------------------------------------------------------------------------
// End-to-end training report
// ---------------------------------------------------------------------------

struct TrainRow {
    std::string scope;  ///< site id, or "all"
    std::string mode;   ///< "optimized" or "fixed"
    int consec = 0;
    std::vector<double> thresholds;
    ConfusionCounts counts;
    std::optional<double> train_tss;
    std::optional<double> cv_tss;
    std::optional<double> producer_accuracy;
    std::optional<double> user_accuracy;
};

struct TrainReport {
    RuleKind kind = RuleKind::Univariate;
    std::string rule;  ///< human-readable rule family
    std::vector<TrainRow> rows;
};

struct TrainOptions {
    RuleKind kind = RuleKind::Univariate;
    Band band = Band::NIR;
    std::vector<double> grid;       ///< univariate and Mahalanobis; empty = default
    std::vector<double> grid_nir;   ///< multivariate; empty = default
    std::vector<double> grid_ndvi;  ///< multivariate; empty = default
    std::shared_ptr<const CubeCovarianceTable> covariances;
    AnnealConfig anneal;
    std::optional<std::pair<double, double>> anneal_init;
    /// Site types used to derive the anneal starting point.
    std::map<std::string, DefoType> site_types;
    int cv_folds = 5;
    std::uint64_t seed = 1;
    int threads = 1;
};

/// Univariate rules are trained site by site, the others over all sites.
/// Rows cover C = 2..6 plus a fixed sweep at the C = 3 optimum.
TrainReport train(std::span<const LabeledPixel> data, const TrainOptions& opts);

}  // namespace cmfda
