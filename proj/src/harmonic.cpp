#include "cmfda/harmonic.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "cmfda/small_linalg.hpp"

namespace cmfda {

namespace {

void check_day(int doy) {
    if (doy < 1 || doy > kYearLength)
        throw Error(ErrorCode::OutOfRangeDay, "day of year " + std::to_string(doy) + " outside 1..366");
}

template <std::size_t N, typename RowFn>
std::array<double, N> least_squares(std::span<const Sample> samples, const FitOptions& opts, RowFn row_of) {
    if (samples.size() < static_cast<std::size_t>(std::max<int>(opts.min_obs, static_cast<int>(N))))
        throw Error(ErrorCode::InsufficientData, "only " + std::to_string(samples.size()) +
                                                     " clear observations, need " + std::to_string(opts.min_obs));
    linalg::Matrix<N> xtx{};
    linalg::Vector<N> xty{};
    for (const Sample& s : samples) {
        const auto x = row_of(s.doy);
        for (std::size_t i = 0; i < N; ++i) {
            xty[i] += x[i] * s.value;
            for (std::size_t j = 0; j <= i; ++j) xtx[i * N + j] += x[i] * x[j];
        }
    }
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = i + 1; j < N; ++j) xtx[i * N + j] = xtx[j * N + i];

    const auto l = linalg::cholesky<N>(xtx);
    if (!l) throw Error(ErrorCode::RankDeficient, "normal equations are not positive definite");
    const double rcond = linalg::reciprocal_condition<N>(xtx, *l);
    if (rcond < opts.min_rcond)
        throw Error(ErrorCode::RankDeficient, "normal equations ill-conditioned (rcond " + std::to_string(rcond) + ")");
    return linalg::cholesky_solve<N>(*l, xty);
}

}  // namespace

Coeffs design_vector(int doy) {
    check_day(doy);
    const double w = 2.0 * std::numbers::pi * doy / kYearLength;
    return {1.0, std::cos(w), std::sin(w), std::cos(2.0 * w), std::sin(2.0 * w)};
}

Coeffs fit_coefficients(std::span<const Sample> samples, const FitOptions& opts) {
    return least_squares<kCoeffCount>(samples, opts, design_vector);
}

std::vector<Sample> training_samples(const PixelSeries& series, Band band, const DateInterval& window) {
    std::vector<Sample> out;
    for (const Observation& o : series.observations) {
        if (window.contains(o.nominal) && o.is_clear(band)) out.push_back({o.composite_doy, o.value(band)});
    }
    return out;
}

HarmonicModel fit(const PixelSeries& series, Band band, const DateInterval& window, const FitOptions& opts) {
    const auto samples = training_samples(series, band, window);
    HarmonicModel m;
    m.band = band;
    m.pixel_id = series.pixel_id;
    m.train_window = window;
    m.n_obs = static_cast<int>(samples.size());
    m.coeffs = fit_coefficients(samples, opts);
    return m;
}

double predict(const Coeffs& coeffs, int doy) {
    const auto x = design_vector(doy);
    double y = 0.0;
    for (std::size_t i = 0; i < kCoeffCount; ++i) y += coeffs[i] * x[i];
    return y;
}

double residual(const HarmonicModel& model, const Observation& obs, Band band) {
    if (!obs.has_value(band))
        throw Error(ErrorCode::MissingBandValue,
                    std::string(band_name(band)) + " is a fill value on " + obs.nominal.iso());
    return obs.value(band) - predict(model, obs.composite_doy);
}

InterAnnualCoeffs design_vector_order2(int doy) {
    check_day(doy);
    const double w = 2.0 * std::numbers::pi * doy / kYearLength;
    return {1.0, std::cos(w), std::sin(w), std::cos(0.5 * w), std::sin(0.5 * w), std::cos(2.0 * w), std::sin(2.0 * w)};
}

InterAnnualCoeffs fit_order2(std::span<const Sample> samples, const FitOptions& opts) {
    return least_squares<kInterAnnualCoeffCount>(samples, opts, design_vector_order2);
}

double predict_order2(const InterAnnualCoeffs& coeffs, int doy, InterAnnualPrediction mode) {
    const auto x = design_vector_order2(doy);
    double y = 0.0;
    for (std::size_t i = 0; i < kInterAnnualCoeffCount; ++i) {
        if (mode == InterAnnualPrediction::Zeroed && (i == 3 || i == 4)) continue;
        y += coeffs[i] * x[i];
    }
    return y;
}

}  // namespace cmfda
