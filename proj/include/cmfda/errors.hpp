#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "cmfda/harmonic.hpp"
#include "cmfda/windows.hpp"

namespace cmfda {

/// Prediction errors of every modeled band at one clear date.
struct ErrorPoint {
    Date date;
    int doy = 1;
    std::array<double, kBandCount> eps{};
    std::uint8_t mask = 0;  ///< bit band_slot(b) set when eps for b is present

    bool has(Band b) const noexcept { return (mask >> band_slot(b)) & 1U; }
    double get(Band b) const noexcept { return eps[band_slot(b)]; }
    void set(Band b, double v) noexcept {
        eps[band_slot(b)] = v;
        mask = static_cast<std::uint8_t>(mask | (1U << band_slot(b)));
    }
};

struct WindowErrors {
    int window_index = 1;
    DateInterval predict_year;
    DateInterval predict;
    std::vector<ErrorPoint> points;  ///< clear dates inside `predict`, in order
};

/// All prediction errors of one pixel, one entry per window that had models.
struct PixelErrors {
    PixelId pixel_id;
    std::string site_id;
    int col = 0;
    int row = 0;
    std::vector<WindowErrors> windows;
};

/// Fitted models of one window, indexed by band_slot; a missing entry means
/// the fit was skipped.
using WindowModels = std::array<std::optional<HarmonicModel>, kBandCount>;

struct FitSkip {
    PixelId pixel_id;
    int window_index;
    Band band;
    ErrorCode reason;
};

/// Fits every requested band of one pixel for every window. Failed fits are
/// reported in `skips` and left empty.
std::vector<WindowModels> fit_pixel_models(const PixelSeries& series, std::span<const WindowPair> windows,
                                           std::span<const Band> bands, const FitOptions& opts,
                                           std::vector<FitSkip>* skips = nullptr);

/// Residuals over each window's prediction interval. `models` is aligned
/// with `windows`; windows whose models are all empty are dropped.
PixelErrors compute_errors(const PixelSeries& series, std::span<const WindowPair> windows,
                           std::span<const WindowModels> models);

}  // namespace cmfda
