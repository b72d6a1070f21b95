#pragma once

#include <array>
#include <span>

#include "cmfda/core.hpp"

namespace cmfda {

inline constexpr std::size_t kCoeffCount = 5;
using Coeffs = std::array<double, kCoeffCount>;

/// (1, cos(2πd/T), sin(2πd/T), cos(4πd/T), sin(4πd/T)) with T = 366.
/// Throws OutOfRangeDay unless 1 <= doy <= 366.
Coeffs design_vector(int doy);

/// Annual-plus-semiannual harmonic model of one band of one pixel.
/// Coefficients are ordered (α0, α1, β1, α2, β2).
struct HarmonicModel {
    Band band = Band::NIR;
    PixelId pixel_id;
    Coeffs coeffs{};
    DateInterval train_window;
    int n_obs = 0;

    bool operator==(const HarmonicModel&) const = default;
};

struct FitOptions {
    int min_obs = 12;              ///< clear observations required per window
    double min_rcond = 1e-10;      ///< reciprocal condition floor of XᵀX
};

struct Sample {
    int doy;
    double value;
};

/// Ordinary least squares through the normal equations.
/// Throws InsufficientData (< min_obs samples) or RankDeficient.
Coeffs fit_coefficients(std::span<const Sample> samples, const FitOptions& opts = {});

/// Clear, non-fill observations of `band` with nominal date inside
/// `window`, keyed by composite day.
std::vector<Sample> training_samples(const PixelSeries& series, Band band, const DateInterval& window);

HarmonicModel fit(const PixelSeries& series, Band band, const DateInterval& window, const FitOptions& opts = {});

double predict(const Coeffs& coeffs, int doy);
inline double predict(const HarmonicModel& model, int doy) { return predict(model.coeffs, doy); }

/// Observed minus predicted. Throws MissingBandValue for a fill value.
double residual(const HarmonicModel& model, const Observation& obs, Band band);

// ---------------------------------------------------------------------------
// Model order 2 (two-year cycle) variant, kept for comparison with the
// annual model; the rest of the pipeline uses HarmonicModel.
// ---------------------------------------------------------------------------

inline constexpr std::size_t kInterAnnualCoeffCount = 7;
using InterAnnualCoeffs = std::array<double, kInterAnnualCoeffCount>;

/// (1, cos(2πd/T), sin(2πd/T), cos(2πd/2T), sin(2πd/2T), cos(4πd/T), sin(4πd/T)).
InterAnnualCoeffs design_vector_order2(int doy);

enum class InterAnnualPrediction {
    Zeroed,    ///< two-year terms dropped at prediction time
    Retained,  ///< all fitted terms used
};

InterAnnualCoeffs fit_order2(std::span<const Sample> samples, const FitOptions& opts = {});
double predict_order2(const InterAnnualCoeffs& coeffs, int doy, InterAnnualPrediction mode);

}  // namespace cmfda
