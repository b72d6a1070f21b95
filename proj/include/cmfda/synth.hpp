#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cmfda/harmonic.hpp"
#include "cmfda/landuse.hpp"

namespace cmfda {

/// A level shift applied to every observation of the listed pixels from
/// `date` onwards.
struct SynthEvent {
    std::vector<std::pair<int, int>> pixels;  ///< (col, row)
    Date date;
    std::array<double, kBandCount> shift{};   ///< indexed by band_slot
};

struct SynthConfig {
    std::string site_id = "site";
    DefoType defo_type = DefoType::Unknown;
    int first_year = 2003;
    int last_year = 2010;

    std::array<Coeffs, kBandCount> coeffs{};        ///< per band_slot
    std::array<double, kBandCount> noise_sd{};      ///< per band_slot
    /// Per-pixel Gaussian perturbation of every coefficient.
    double pixel_coeff_sd = 0.0;

    /// Probability, by month (Jan = 0), that a date is Cloudy / Marginal.
    std::array<double, 12> cloudy_prob{};
    std::array<double, 12> marginal_prob{};
    double not_processed_prob = 0.0;
    /// Brightening added to reflectances (and subtracted from indices) on
    /// cloudy dates.
    double cloud_bias = 0.15;

    std::vector<SynthEvent> events;
    std::uint64_t seed = 1;
};

/// Throws InvalidConfig for negative noise, probabilities outside [0, 1],
/// a bad year range, or event pixels outside the grid.
void validate(const SynthConfig& cfg);

/// Monthly profile with `cloudy`/`marginal` probabilities, doubled from
/// April to September (capped at 1).
void set_seasonal_reliability(SynthConfig& cfg, double cloudy, double marginal);

/// True coefficients of one pixel and band after the per-pixel perturbation.
Coeffs pixel_coefficients(const SynthConfig& cfg, int col, int row, Band band);

struct SynthSite {
    SiteGrid grid;
    std::vector<DeforestationLabel> labels;  ///< row-major, one per pixel
    LanduseFineGrid landuse_t0;
    LanduseFineGrid landuse_t1;
};

/// Deterministic per seed. Every clear value is the harmonic at the
/// observation's composite day plus noise, plus any event shift.
SynthSite generate_site(const SynthConfig& cfg);

/// `n` distinct random (col, row) pairs.
std::vector<std::pair<int, int>> random_pixels(int n, std::uint64_t seed);

/// Bundled scenarios: "sonora-like" (forest to water, NIR drop) and
/// "yucatan-like" (forest to urban or cropland, NDVI drop). Events are
/// spread over the prediction years first_year+2 .. last_year-1. Throws
/// InvalidConfig for an unknown name.
SynthConfig scenario(const std::string& name, std::uint64_t seed, int n_events = 30, double noise_scale = 1.0);
std::vector<std::string> scenario_names();

}  // namespace cmfda
