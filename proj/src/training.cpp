#include "cmfda/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cmfda/parallel.hpp"

namespace cmfda {

void ConfusionCounts::add(bool predicted, bool observed) noexcept {
    if (predicted && observed) ++S;
    else if (!predicted && observed) ++T;
    else if (!predicted && !observed) ++U;
    else ++V;
}

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) noexcept {
    S += o.S;
    T += o.T;
    U += o.U;
    V += o.V;
    return *this;
}

ConfusionCounts confusion(const std::map<PixelId, bool>& preds, const std::map<PixelId, bool>& labels) {
    if (preds.size() != labels.size())
        throw Error(ErrorCode::KeyMismatch, "prediction and label sets differ in size");
    ConfusionCounts c;
    // Both maps are ordered, so equal key sets line up element by element.
    auto l = labels.begin();
    for (const auto& [id, p] : preds) {
        if (id != l->first) throw Error(ErrorCode::KeyMismatch, "pixel " + id + " has no label");
        c.add(p, l->second);
        ++l;
    }
    return c;
}

ConfusionCounts confusion(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> labels) {
    if (preds.size() != labels.size())
        throw Error(ErrorCode::KeyMismatch, "prediction and label vectors differ in length");
    ConfusionCounts c;
    for (std::size_t i = 0; i < preds.size(); ++i) c.add(preds[i], labels[i]);
    return c;
}

double tss(const ConfusionCounts& c) {
    if (c.N0() == 0 || c.N1() == 0)
        throw Error(ErrorCode::DegenerateClass, "tss needs both deforested and intact pixels");
    return static_cast<double>(c.S) / static_cast<double>(c.N1()) +
           static_cast<double>(c.U) / static_cast<double>(c.N0()) - 1.0;
}

double user_accuracy(const ConfusionCounts& c) {
    if (c.R() == 0) throw Error(ErrorCode::NoPositivePredictions, "user's accuracy undefined without positive predictions");
    return static_cast<double>(c.S) / static_cast<double>(c.R());
}

Accuracies accuracies(const ConfusionCounts& c) {
    if (c.N1() == 0) throw Error(ErrorCode::DegenerateClass, "producer's accuracy needs deforested pixels");
    Accuracies a{static_cast<double>(c.S) / static_cast<double>(c.N1()), std::nullopt};
    if (c.R() > 0) a.user = user_accuracy(c);
    return a;
}

// ---------------------------------------------------------------------------

Flags labels_of(std::span<const LabeledPixel> data) {
    Flags z;
    z.reserve(data.size());
    for (const auto& p : data) z.push_back(p.z);
    return z;
}

Flags predict_all(const DetectionRule& rule, std::span<const LabeledPixel> data, int threads) {
    Flags flags(data.size(), 0);
    parallel_for(data.size(), threads, [&](std::size_t i) { flags[i] = evaluate(rule, *data[i].errors).flagged; });
    return flags;
}

namespace {

void require_both_classes(std::span<const std::uint8_t> labels) {
    const auto pos = std::count_if(labels.begin(), labels.end(), [](std::uint8_t z) { return z != 0; });
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size()))
        throw Error(ErrorCode::DegenerateClass, "training labels hold a single class");
}

template <class ScoreFn>
auto compute_scores(std::span<const LabeledPixel> data, int threads, ScoreFn&& fn) {
    using T = decltype(fn(*data[0].errors));
    std::vector<T> scores(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) { scores[i] = fn(*data[i].errors); });
    return scores;
}

}  // namespace

std::vector<double> make_grid(double first, double last, double step) {
    if (!(step > 0.0) || last < first) throw Error(ErrorCode::InvalidConfig, "invalid threshold grid range");
    std::vector<double> g;
    // Integer stepping keeps nodes free of accumulated rounding.
    const auto n = static_cast<long>(std::floor((last - first) / step + 1e-9));
    for (long i = 0; i <= n; ++i) g.push_back(first + static_cast<double>(i) * step);
    return g;
}

std::vector<double> default_grid(RuleKind kind, Band band) {
    switch (kind) {
        case RuleKind::Mahalanobis: return make_grid(0.5, 30.0, 0.5);
        case RuleKind::Multivariate: return make_grid(0.01, band == Band::NDVI ? 0.50 : 0.30, 0.01);
        case RuleKind::Univariate: return make_grid(0.01, is_vegetation_index(band) ? 0.50 : 0.30, 0.01);
    }
    return {};
}

GridResult grid_search_scores(std::span<const double> scores, std::span<const std::uint8_t> labels,
                              std::span<const double> grid) {
    if (grid.empty()) throw Error(ErrorCode::InvalidConfig, "empty threshold grid");
    if (scores.size() != labels.size()) throw Error(ErrorCode::KeyMismatch, "scores and labels differ in length");
    require_both_classes(labels);
    std::optional<GridResult> best;
    for (double L : grid) {
        ConfusionCounts c;
        for (std::size_t i = 0; i < scores.size(); ++i) c.add(L < scores[i], labels[i]);
        const double t = tss(c);
        if (!best || t > best->tss || (t == best->tss && L < best->threshold)) best = GridResult{L, t, c};
    }
    return *best;
}

GridResult grid_search_univariate(std::span<const LabeledPixel> data, Band band, int consec,
                                  std::span<const double> grid, int threads) {
    const auto scores =
        compute_scores(data, threads, [&](const PixelErrors& e) { return univariate_score(e, band, consec); });
    return grid_search_scores(scores, labels_of(data), grid);
}

GridResult grid_search_mahalanobis(std::span<const LabeledPixel> data, const CubeCovarianceTable& cov, int consec,
                                   std::span<const double> grid, int threads) {
    const auto scores =
        compute_scores(data, threads, [&](const PixelErrors& e) { return mahalanobis_score(e, cov, consec); });
    return grid_search_scores(scores, labels_of(data), grid);
}

AnnealResult anneal_grid(const std::function<double(std::size_t, std::size_t)>& utility, std::size_t nx,
                         std::size_t ny, std::size_t ix0, std::size_t iy0, const AnnealConfig& cfg,
                         std::uint64_t seed) {
    if (nx == 0 || ny == 0 || ix0 >= nx || iy0 >= ny)
        throw Error(ErrorCode::InitOffGrid, "annealing start lies outside the grid");
    if (!(cfg.t0 > 0.0) || !(cfg.cooling > 0.0 && cfg.cooling <= 1.0) || cfg.iters_per_level < 1 || cfg.iterations < 0)
        throw Error(ErrorCode::InvalidConfig, "invalid annealing schedule");

    std::vector<std::optional<double>> memo(nx * ny);
    AnnealResult res{ix0, iy0, 0.0, 0};
    auto u = [&](std::size_t ix, std::size_t iy) {
        auto& slot = memo[ix * ny + iy];
        if (!slot) {
            slot = utility(ix, iy);
            ++res.evaluations;
        }
        return *slot;
    };

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::size_t cx = ix0, cy = iy0;
    double current = u(cx, cy);
    res.tss = current;
    double temperature = cfg.t0;

    std::vector<std::pair<std::size_t, std::size_t>> nbrs;
    nbrs.reserve(8);
    for (int it = 0; it < cfg.iterations; ++it) {
        if (it > 0 && it % cfg.iters_per_level == 0) temperature *= cfg.cooling;
        nbrs.clear();
        for (int dx = -1; dx <= 1; ++dx) {
            for (int dy = -1; dy <= 1; ++dy) {
                if (dx == 0 && dy == 0) continue;
                const auto x = static_cast<long>(cx) + dx;
                const auto y = static_cast<long>(cy) + dy;
                if (x < 0 || y < 0 || x >= static_cast<long>(nx) || y >= static_cast<long>(ny)) continue;
                nbrs.emplace_back(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
            }
        }
        if (nbrs.empty()) break;
        const auto [px, py] = nbrs[std::uniform_int_distribution<std::size_t>(0, nbrs.size() - 1)(rng)];
        const double proposed = u(px, py);
        const double delta = proposed - current;
        if (delta >= 0.0 || unit(rng) < std::exp(delta / temperature)) {
            cx = px;
            cy = py;
            current = proposed;
            if (current > res.tss) {
                res.tss = current;
                res.ix = cx;
                res.iy = cy;
            }
        }
    }
    return res;
}

namespace {

std::optional<std::size_t> exact_grid_index(std::span<const double> grid, double value) {
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid[i] - value) <= 1e-9 * std::max(1.0, std::abs(value))) return i;
    }
    return std::nullopt;
}

}  // namespace

std::size_t nearest_grid_index(std::span<const double> grid, double value) {
    if (grid.empty()) throw Error(ErrorCode::InvalidConfig, "empty threshold grid");
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (std::abs(grid[i] - value) < std::abs(grid[best] - value)) best = i;
    }
    return best;
}

AnnealMultivariateResult anneal_multivariate(std::span<const LabeledPixel> data, int consec,
                                             std::span<const double> grid_nir, std::span<const double> grid_ndvi,
                                             double init_nir, double init_ndvi, const AnnealConfig& cfg,
                                             std::uint64_t seed, int threads) {
    const auto ix0 = exact_grid_index(grid_nir, init_nir);
    const auto iy0 = exact_grid_index(grid_ndvi, init_ndvi);
    if (!ix0 || !iy0) throw Error(ErrorCode::InitOffGrid, "annealing start is not a grid node");
    const auto labels = labels_of(data);
    require_both_classes(labels);

    const auto scores =
        compute_scores(data, threads, [&](const PixelErrors& e) { return multivariate_score(e, consec); });
    auto counts_at = [&](std::size_t ix, std::size_t iy) {
        ConfusionCounts c;
        for (std::size_t i = 0; i < scores.size(); ++i)
            c.add(grid_nir[ix] < scores[i].nir || grid_ndvi[iy] < scores[i].ndvi, labels[i]);
        return c;
    };
    const auto best = anneal_grid([&](std::size_t ix, std::size_t iy) { return tss(counts_at(ix, iy)); },
                                  grid_nir.size(), grid_ndvi.size(), *ix0, *iy0, cfg, seed);
    return {grid_nir[best.ix], grid_ndvi[best.iy], best.tss, counts_at(best.ix, best.iy)};
}

// ---------------------------------------------------------------------------

std::vector<int> stratified_folds(std::span<const std::uint8_t> labels, int k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorCode::InvalidConfig, "cross-validation needs at least 2 folds");
    std::vector<std::size_t> members[2];
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i] ? 1 : 0].push_back(i);
    for (const auto& m : members) {
        if (m.size() < static_cast<std::size_t>(k))
            throw Error(ErrorCode::TooFewPositives, "each class needs at least " + std::to_string(k) +
                                                        " pixels to stratify, found " + std::to_string(m.size()));
    }
    std::mt19937_64 rng(seed);
    std::vector<int> fold(labels.size(), 0);
    for (auto& m : members) {
        std::shuffle(m.begin(), m.end(), rng);
        for (std::size_t j = 0; j < m.size(); ++j) fold[m[j]] = static_cast<int>(j % static_cast<std::size_t>(k));
    }
    return fold;
}

CvResult cross_validate(std::span<const LabeledPixel> data, const Trainer& trainer, int k, std::uint64_t seed,
                        int threads) {
    const auto folds = stratified_folds(labels_of(data), k, seed);
    CvResult res;
    double sum = 0.0;
    for (int f = 0; f < k; ++f) {
        std::vector<LabeledPixel> train, test;
        for (std::size_t i = 0; i < data.size(); ++i) (folds[i] == f ? test : train).push_back(data[i]);
        const DetectionRule rule = trainer(train);
        const auto c = confusion(predict_all(rule, test, threads), labels_of(test));
        sum += tss(c);
        res.pooled += c;
        res.folds.push_back(c);
    }
    res.mean_tss = sum / k;
    return res;
}

std::vector<SweepRow> sweep_fixed(const DetectionRule& rule, std::span<const LabeledPixel> data, int threads) {
    const auto labels = labels_of(data);
    std::vector<SweepRow> rows;
    for (int c = kMinConsec; c <= kMaxConsec; ++c) {
        SweepRow row{c, confusion(predict_all(rule.with_consec(c), data, threads), labels), std::nullopt};
        if (row.counts.N0() > 0 && row.counts.N1() > 0) row.tss = tss(row.counts);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> thresholds_of(const DetectionRule& rule) {
    return std::visit(
        [](const auto& r) -> std::vector<double> {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, MultivariateRule>) return {r.threshold_nir, r.threshold_ndvi};
            else return {r.threshold};
        },
        rule.rule());
}

TrainRow optimized_row(const std::string& scope, const DetectionRule& rule, const ConfusionCounts& counts,
                       std::optional<double> cv) {
    TrainRow row{scope, "optimized", rule.consec(), thresholds_of(rule), counts, tss(counts), cv, {}, {}};
    const auto acc = accuracies(counts);
    row.producer_accuracy = acc.producer;
    row.user_accuracy = acc.user;
    return row;
}

void append_fixed_rows(std::vector<TrainRow>& rows, const std::string& scope, const DetectionRule& rule,
                       std::span<const LabeledPixel> data, int threads) {
    for (const auto& s : sweep_fixed(rule, data, threads)) {
        TrainRow row{scope, "fixed", s.consec, thresholds_of(rule), s.counts, s.tss, {}, {}, {}};
        if (s.counts.N1() > 0) row.producer_accuracy = accuracies(s.counts).producer;
        if (s.counts.R() > 0) row.user_accuracy = user_accuracy(s.counts);
        rows.push_back(row);
    }
}

// Site-wise optima of one band averaged over sites of one type; all sites
// when none has that type.
double mean_site_optimum(std::span<const LabeledPixel> data, const TrainOptions& opts, Band band, DefoType type,
                         int consec, std::span<const double> grid) {
    std::map<std::string, std::vector<LabeledPixel>> by_site;
    for (const auto& p : data) by_site[p.errors->site_id].push_back(p);
    auto average = [&](bool filter) {
        double sum = 0.0;
        int n = 0;
        for (const auto& [site, pixels] : by_site) {
            const auto it = opts.site_types.find(site);
            if (filter && (it == opts.site_types.end() || it->second != type)) continue;
            const auto labels = labels_of(pixels);
            const auto pos = std::count(labels.begin(), labels.end(), 1);
            if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) continue;
            sum += grid_search_univariate(pixels, band, consec, grid, opts.threads).threshold;
            ++n;
        }
        return n ? std::optional<double>(sum / n) : std::nullopt;
    };
    if (auto v = average(true)) return *v;
    if (auto v = average(false)) return *v;
    return grid[grid.size() / 2];
}

}  // namespace

TrainReport train(std::span<const LabeledPixel> data, const TrainOptions& opts) {
    TrainReport report;
    report.kind = opts.kind;
    const int k = opts.cv_folds;

    if (opts.kind == RuleKind::Univariate) {
        report.rule = "univariate " + std::string(band_name(opts.band));
        const auto grid = opts.grid.empty() ? default_grid(RuleKind::Univariate, opts.band) : opts.grid;
        std::map<std::string, std::vector<LabeledPixel>> by_site;
        for (const auto& p : data) by_site[p.errors->site_id].push_back(p);
        for (const auto& [site, pixels] : by_site) {
            std::optional<DetectionRule> at_c3;
            for (int c = kMinConsec; c <= kMaxConsec; ++c) {
                const auto best = grid_search_univariate(pixels, opts.band, c, grid, opts.threads);
                const auto rule = DetectionRule::univariate(opts.band, best.threshold, c);
                const Trainer trainer = [&](std::span<const LabeledPixel> tr) {
                    return DetectionRule::univariate(
                        opts.band, grid_search_univariate(tr, opts.band, c, grid, opts.threads).threshold, c);
                };
                const auto cv = k >= 2 ? std::optional(cross_validate(pixels, trainer, k, opts.seed, opts.threads).mean_tss)
                                       : std::nullopt;
                report.rows.push_back(optimized_row(site, rule, best.counts, cv));
                if (c == 3) at_c3 = rule;
            }
            append_fixed_rows(report.rows, site, *at_c3, pixels, opts.threads);
        }
        return report;
    }

    if (opts.kind == RuleKind::Mahalanobis) {
        if (!opts.covariances) throw Error(ErrorCode::InvalidConfig, "Mahalanobis training needs covariances");
        report.rule = "mahalanobis";
        const auto grid = opts.grid.empty() ? default_grid(RuleKind::Mahalanobis) : opts.grid;
        std::optional<DetectionRule> at_c3;
        for (int c = kMinConsec; c <= kMaxConsec; ++c) {
            const auto best = grid_search_mahalanobis(data, *opts.covariances, c, grid, opts.threads);
            const auto rule = DetectionRule::mahalanobis(best.threshold, opts.covariances, c);
            const Trainer trainer = [&](std::span<const LabeledPixel> tr) {
                return DetectionRule::mahalanobis(
                    grid_search_mahalanobis(tr, *opts.covariances, c, grid, opts.threads).threshold,
                    opts.covariances, c);
            };
            const auto cv = k >= 2 ? std::optional(cross_validate(data, trainer, k, opts.seed, opts.threads).mean_tss)
                                   : std::nullopt;
            report.rows.push_back(optimized_row("all", rule, best.counts, cv));
            if (c == 3) at_c3 = rule;
        }
        append_fixed_rows(report.rows, "all", *at_c3, data, opts.threads);
        return report;
    }

    report.rule = "multivariate";
    const auto grid_nir = opts.grid_nir.empty() ? default_grid(RuleKind::Multivariate, Band::NIR) : opts.grid_nir;
    const auto grid_ndvi = opts.grid_ndvi.empty() ? default_grid(RuleKind::Multivariate, Band::NDVI) : opts.grid_ndvi;
    std::optional<DetectionRule> at_c3;
    for (int c = kMinConsec; c <= kMaxConsec; ++c) {
        auto start_for = [&](std::span<const LabeledPixel> d) -> std::pair<double, double> {
            if (opts.anneal_init) return *opts.anneal_init;
            const double nir = mean_site_optimum(d, opts, Band::NIR, DefoType::ForestToWater, c, grid_nir);
            const double ndvi = mean_site_optimum(d, opts, Band::NDVI, DefoType::ForestToUrbanCropland, c, grid_ndvi);
            return {grid_nir[nearest_grid_index(grid_nir, nir)], grid_ndvi[nearest_grid_index(grid_ndvi, ndvi)]};
        };
        const auto run = [&](std::span<const LabeledPixel> d) {
            const auto [n0, d0] = start_for(d);
            return anneal_multivariate(d, c, grid_nir, grid_ndvi, n0, d0, opts.anneal, opts.seed, opts.threads);
        };
        const auto best = run(data);
        const auto rule = DetectionRule::multivariate(best.threshold_nir, best.threshold_ndvi, c);
        const Trainer trainer = [&](std::span<const LabeledPixel> tr) {
            const auto r = run(tr);
            return DetectionRule::multivariate(r.threshold_nir, r.threshold_ndvi, c);
        };
        const auto cv = k >= 2 ? std::optional(cross_validate(data, trainer, k, opts.seed, opts.threads).mean_tss)
                               : std::nullopt;
        report.rows.push_back(optimized_row("all", rule, best.counts, cv));
        if (c == 3) at_c3 = rule;
    }
    append_fixed_rows(report.rows, "all", *at_c3, data, opts.threads);
    return report;
}

}  // namespace cmfda
