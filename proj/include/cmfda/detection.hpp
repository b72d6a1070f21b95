#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>

#include "cmfda/covariance.hpp"
#include "cmfda/errors.hpp"

namespace cmfda {

inline constexpr int kMinConsec = 2;
inline constexpr int kMaxConsec = 6;

struct UnivariateRule {
    Band band = Band::NIR;
    double threshold = 0.08;
};

/// Lax OR rule over NIR and NDVI errors.
struct MultivariateRule {
    double threshold_nir = 0.082;
    double threshold_ndvi = 0.182;
};

struct MahalanobisRule {
    double threshold = 11.72;
    std::shared_ptr<const CubeCovarianceTable> covariances;
};

enum class RuleKind { Univariate, Multivariate, Mahalanobis };

std::string_view to_string(RuleKind k) noexcept;
RuleKind parse_rule_kind(std::string_view text);

class DetectionRule {
public:
    using Variant = std::variant<UnivariateRule, MultivariateRule, MahalanobisRule>;

    /// Throws InvalidConfig unless thresholds are positive and 2 <= consec <= 6.
    DetectionRule(Variant rule, int consec);

    static DetectionRule univariate(Band band, double threshold, int consec);
    static DetectionRule multivariate(double threshold_nir, double threshold_ndvi, int consec);
    static DetectionRule mahalanobis(double threshold, std::shared_ptr<const CubeCovarianceTable> cov, int consec);

    const Variant& rule() const noexcept { return rule_; }
    int consec() const noexcept { return consec_; }
    RuleKind kind() const noexcept { return static_cast<RuleKind>(rule_.index()); }
    /// Bands whose errors must all be present at a date for it to count.
    std::vector<Band> bands() const;
    std::string describe() const;

    DetectionRule with_consec(int consec) const { return {rule_, consec}; }

private:
    Variant rule_;
    int consec_;
};

/// Operational defaults: multivariate (0.082, 0.182) and Mahalanobis 11.72,
/// both applied over four consecutive clear dates.
inline constexpr int kDefaultConsec = 4;
inline constexpr double kDefaultThresholdNir = 0.082;
inline constexpr double kDefaultThresholdNdvi = 0.182;
inline constexpr double kDefaultMahalanobisThreshold = 11.72;

DetectionRule default_multivariate_rule();
DetectionRule default_mahalanobis_rule(std::shared_ptr<const CubeCovarianceTable> cov);

/// True iff all errors exceed +threshold or all fall below -threshold.
/// Throws WrongWindowLength unless errors.size() == consec.
bool univariate_flag(std::span<const double> errors, double threshold, int consec);

/// Number of bands (0..2) whose run violates its threshold.
int multivariate_violations(std::span<const double> errors_nir, std::span<const double> errors_ndvi,
                            double threshold_nir, double threshold_ndvi, int consec);
bool multivariate_flag(std::span<const double> errors_nir, std::span<const double> errors_ndvi,
                       double threshold_nir, double threshold_ndvi, int consec);

/// Index values never go negative, so only the upper branch can fire.
bool mahalanobis_flag(std::span<const double> indices, double threshold, int consec);

struct DetectionResult {
    PixelId pixel_id;
    bool flagged = false;
    std::optional<Date> first_flag_date;  ///< last date of the earliest triggering run
    std::optional<Band> triggering_band;  ///< multivariate rule only

    bool operator==(const DetectionResult&) const = default;
};

/// Evaluates every run of `consec` consecutive usable dates whose first date
/// lies in a prediction year; the run may extend into the window's extension.
DetectionResult evaluate(const DetectionRule& rule, const PixelErrors& errors);

/// Residuals from `models` followed by evaluate(). Throws NoModels when no
/// window has a fitted model.
DetectionResult detect_pixel(const PixelSeries& series, std::span<const WindowModels> models,
                             const DetectionRule& rule, std::span<const WindowPair> windows);

/// Scores s such that the pixel is flagged at threshold L iff L < s. They
/// turn threshold searches into comparisons. -inf when no run exists.
double univariate_score(const PixelErrors& errors, Band band, int consec);
struct MultivariateScore {
    double nir;
    double ndvi;
};
MultivariateScore multivariate_score(const PixelErrors& errors, int consec);
double mahalanobis_score(const PixelErrors& errors, const CubeCovarianceTable& cov, int consec);

}  // namespace cmfda
