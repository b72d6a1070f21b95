#include "cmfda/detection.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace cmfda {

std::string_view to_string(RuleKind k) noexcept {
    switch (k) {
        case RuleKind::Univariate: return "univariate";
        case RuleKind::Multivariate: return "multivariate";
        case RuleKind::Mahalanobis: return "mahalanobis";
    }
    return "?";
}

RuleKind parse_rule_kind(std::string_view text) {
    for (RuleKind k : {RuleKind::Univariate, RuleKind::Multivariate, RuleKind::Mahalanobis})
        if (text == to_string(k)) return k;
    throw Error(ErrorCode::InvalidConfig, "unknown rule '" + std::string(text) + "'");
}

DetectionRule::DetectionRule(Variant rule, int consec) : rule_(std::move(rule)), consec_(consec) {
    if (consec_ < kMinConsec || consec_ > kMaxConsec)
        throw Error(ErrorCode::InvalidConfig, "consecutive count " + std::to_string(consec_) + " outside 2..6");
    auto positive = [](double v, const char* what) {
        if (!(v > 0.0)) throw Error(ErrorCode::InvalidConfig, std::string(what) + " threshold must be positive");
    };
    std::visit(
        [&](const auto& r) {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, UnivariateRule>) {
                positive(r.threshold, "univariate");
            } else if constexpr (std::is_same_v<T, MultivariateRule>) {
                positive(r.threshold_nir, "NIR");
                positive(r.threshold_ndvi, "NDVI");
            } else {
                positive(r.threshold, "Mahalanobis");
                if (!r.covariances) throw Error(ErrorCode::InvalidConfig, "Mahalanobis rule needs covariances");
            }
        },
        rule_);
}

DetectionRule DetectionRule::univariate(Band band, double threshold, int consec) {
    return {UnivariateRule{band, threshold}, consec};
}

DetectionRule DetectionRule::multivariate(double threshold_nir, double threshold_ndvi, int consec) {
    return {MultivariateRule{threshold_nir, threshold_ndvi}, consec};
}

DetectionRule DetectionRule::mahalanobis(double threshold, std::shared_ptr<const CubeCovarianceTable> cov,
                                         int consec) {
    return {MahalanobisRule{threshold, std::move(cov)}, consec};
}

std::vector<Band> DetectionRule::bands() const {
    if (const auto* u = std::get_if<UnivariateRule>(&rule_)) return {u->band};
    return {Band::NIR, Band::NDVI};
}

std::string DetectionRule::describe() const {
    char buf[160];
    switch (kind()) {
        case RuleKind::Univariate: {
            const auto& r = std::get<UnivariateRule>(rule_);
            std::snprintf(buf, sizeof buf, "univariate band=%s L=%.9g C=%d", std::string(band_name(r.band)).c_str(),
                          r.threshold, consec_);
            break;
        }
        case RuleKind::Multivariate: {
            const auto& r = std::get<MultivariateRule>(rule_);
            std::snprintf(buf, sizeof buf, "multivariate L_nir=%.9g L_ndvi=%.9g C=%d", r.threshold_nir,
                          r.threshold_ndvi, consec_);
            break;
        }
        case RuleKind::Mahalanobis: {
            const auto& r = std::get<MahalanobisRule>(rule_);
            std::snprintf(buf, sizeof buf, "mahalanobis L=%.9g C=%d", r.threshold, consec_);
            break;
        }
    }
    return buf;
}

DetectionRule default_multivariate_rule() {
    return DetectionRule::multivariate(kDefaultThresholdNir, kDefaultThresholdNdvi, kDefaultConsec);
}

DetectionRule default_mahalanobis_rule(std::shared_ptr<const CubeCovarianceTable> cov) {
    return DetectionRule::mahalanobis(kDefaultMahalanobisThreshold, std::move(cov), kDefaultConsec);
}

// ---------------------------------------------------------------------------

namespace {

void check_length(std::span<const double> errors, int consec) {
    if (errors.size() != static_cast<std::size_t>(consec))
        throw Error(ErrorCode::WrongWindowLength, "expected " + std::to_string(consec) + " errors, got " +
                                                      std::to_string(errors.size()));
}

}  // namespace

bool univariate_flag(std::span<const double> errors, double threshold, int consec) {
    check_length(errors, consec);
    const bool above = std::all_of(errors.begin(), errors.end(), [&](double e) { return e > threshold; });
    const bool below = std::all_of(errors.begin(), errors.end(), [&](double e) { return e < -threshold; });
    return above || below;
}

int multivariate_violations(std::span<const double> errors_nir, std::span<const double> errors_ndvi,
                            double threshold_nir, double threshold_ndvi, int consec) {
    check_length(errors_ndvi, consec);
    return int{univariate_flag(errors_nir, threshold_nir, consec)} +
           int{univariate_flag(errors_ndvi, threshold_ndvi, consec)};
}

bool multivariate_flag(std::span<const double> errors_nir, std::span<const double> errors_ndvi,
                       double threshold_nir, double threshold_ndvi, int consec) {
    return multivariate_violations(errors_nir, errors_ndvi, threshold_nir, threshold_ndvi, consec) > 0;
}

bool mahalanobis_flag(std::span<const double> indices, double threshold, int consec) {
    check_length(indices, consec);
    return std::all_of(indices.begin(), indices.end(), [&](double v) { return v > threshold; });
}

// ---------------------------------------------------------------------------

namespace {

/// Calls fn(window, usable_points, start) for every run of `consec` usable
/// points that starts inside the window's prediction year.
template <typename Fn>
void for_each_run(const PixelErrors& errors, std::span<const Band> bands, int consec, Fn&& fn) {
    std::vector<const ErrorPoint*> usable;
    for (const WindowErrors& w : errors.windows) {
        usable.clear();
        for (const ErrorPoint& p : w.points) {
            if (std::all_of(bands.begin(), bands.end(), [&](Band b) { return p.has(b); })) usable.push_back(&p);
        }
        const auto c = static_cast<std::size_t>(consec);
        for (std::size_t i = 0; i + c <= usable.size(); ++i) {
            if (!w.predict_year.contains(usable[i]->date)) continue;
            fn(w, std::span<const ErrorPoint* const>(usable.data() + i, c));
        }
    }
}

std::vector<double> band_run(std::span<const ErrorPoint* const> run, Band b) {
    std::vector<double> v;
    v.reserve(run.size());
    for (const ErrorPoint* p : run) v.push_back(p->get(b));
    return v;
}

std::vector<double> index_run(std::span<const ErrorPoint* const> run, const PixelErrors& errors,
                              const CubeCovarianceTable& cov) {
    std::vector<double> v;
    v.reserve(run.size());
    for (const ErrorPoint* p : run)
        v.push_back(mahalanobis_index(p->get(Band::NIR), p->get(Band::NDVI),
                                      cov.lookup(errors.site_id, errors.col, errors.row, p->doy)));
    return v;
}

}  // namespace

DetectionResult evaluate(const DetectionRule& rule, const PixelErrors& errors) {
    DetectionResult result{errors.pixel_id, false, std::nullopt, std::nullopt};
    const auto bands = rule.bands();
    const int c = rule.consec();

    auto record = [&](Date end, std::optional<Band> trigger) {
        if (!result.flagged || end < *result.first_flag_date) {
            result.flagged = true;
            result.first_flag_date = end;
            result.triggering_band = trigger;
        }
    };

    for_each_run(errors, bands, c, [&](const WindowErrors&, std::span<const ErrorPoint* const> run) {
        const Date end = run.back()->date;
        if (result.flagged && !(end < *result.first_flag_date)) return;
        std::visit(
            [&](const auto& r) {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, UnivariateRule>) {
                    if (univariate_flag(band_run(run, r.band), r.threshold, c)) record(end, std::nullopt);
                } else if constexpr (std::is_same_v<T, MultivariateRule>) {
                    const auto nir = band_run(run, Band::NIR);
                    const auto ndvi = band_run(run, Band::NDVI);
                    if (univariate_flag(nir, r.threshold_nir, c))
                        record(end, Band::NIR);
                    else if (univariate_flag(ndvi, r.threshold_ndvi, c))
                        record(end, Band::NDVI);
                } else {
                    if (mahalanobis_flag(index_run(run, errors, *r.covariances), r.threshold, c))
                        record(end, std::nullopt);
                }
            },
            rule.rule());
    });
    return result;
}

DetectionResult detect_pixel(const PixelSeries& series, std::span<const WindowModels> models,
                             const DetectionRule& rule, std::span<const WindowPair> windows) {
    const PixelErrors errors = compute_errors(series, windows, models);
    if (errors.windows.empty()) throw Error(ErrorCode::NoModels, "no fitted models for pixel " + series.pixel_id);
    return evaluate(rule, errors);
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kNoRun = -std::numeric_limits<double>::infinity();

double two_sided_score(std::span<const ErrorPoint* const> run, Band b) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const ErrorPoint* p : run) {
        lo = std::min(lo, p->get(b));
        hi = std::max(hi, p->get(b));
    }
    // all > L  <=>  L < min;   all < -L  <=>  L < -max
    return std::max(lo, -hi);
}

}  // namespace

double univariate_score(const PixelErrors& errors, Band band, int consec) {
    double best = kNoRun;
    const Band bands[] = {band};
    for_each_run(errors, bands, consec, [&](const WindowErrors&, std::span<const ErrorPoint* const> run) {
        best = std::max(best, two_sided_score(run, band));
    });
    return best;
}

MultivariateScore multivariate_score(const PixelErrors& errors, int consec) {
    MultivariateScore best{kNoRun, kNoRun};
    const Band bands[] = {Band::NIR, Band::NDVI};
    for_each_run(errors, bands, consec, [&](const WindowErrors&, std::span<const ErrorPoint* const> run) {
        best.nir = std::max(best.nir, two_sided_score(run, Band::NIR));
        best.ndvi = std::max(best.ndvi, two_sided_score(run, Band::NDVI));
    });
    return best;
}

double mahalanobis_score(const PixelErrors& errors, const CubeCovarianceTable& cov, int consec) {
    double best = kNoRun;
    const Band bands[] = {Band::NIR, Band::NDVI};
    for_each_run(errors, bands, consec, [&](const WindowErrors&, std::span<const ErrorPoint* const> run) {
        const auto idx = index_run(run, errors, cov);
        best = std::max(best, *std::min_element(idx.begin(), idx.end()));
    });
    return best;
}

}  // namespace cmfda
