#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmfda/error.hpp"

namespace cmfda {

// ---------------------------------------------------------------------------
// Bands
// ---------------------------------------------------------------------------

/// The six per-date series carried by every pixel. Numeric values are the
/// band numbers used throughout the literature for this product.
enum class Band : int { Red = 1, NIR = 2, Blue = 3, MIR = 7, NDVI = 8, EVI = 9 };

inline constexpr std::size_t kBandCount = 6;
inline constexpr std::array<Band, kBandCount> kAllBands = {
    Band::Red, Band::NIR, Band::Blue, Band::MIR, Band::NDVI, Band::EVI};

/// Dense slot 0..5 of a band inside per-band arrays.
std::size_t band_slot(Band b) noexcept;
Band band_from_code(int code);
std::string_view band_name(Band b) noexcept;
/// Accepts numeric codes ("2") and names ("nir", "NDVI").
Band parse_band(std::string_view text);

bool is_vegetation_index(Band b) noexcept;
/// Dataset fill value for the band: -0.1 for reflectances, -0.3 for indices.
double fill_value(Band b) noexcept;
/// Inclusive range accepted at ingestion (fill value included).
double min_accepted(Band b) noexcept;
inline constexpr double kMaxAccepted = 1.0;

// ---------------------------------------------------------------------------
// Reliability
// ---------------------------------------------------------------------------

enum class Reliability : int { NotProcessed = -1, Good = 0, Marginal = 1, SnowIce = 2, Cloudy = 3 };

Reliability reliability_from_code(int code);
inline bool is_clear(Reliability r) noexcept {
    return r == Reliability::Good || r == Reliability::Marginal;
}

// ---------------------------------------------------------------------------
// Dates
// ---------------------------------------------------------------------------

/// Calendar date stored as (year, day-of-year). Ordering is chronological.
struct Date {
    int year = 1970;
    int doy = 1;

    static Date from_ymd(int y, unsigned m, unsigned d);
    static Date from_serial(std::int64_t days_since_epoch);
    /// Parses YYYY-MM-DD.
    static Date parse(std::string_view iso);

    std::int64_t serial() const;  ///< days since 1970-01-01
    unsigned month() const;
    unsigned day_of_month() const;
    std::string iso() const;
    Date plus_days(std::int64_t n) const { return from_serial(serial() + n); }

    auto operator<=>(const Date&) const = default;
};

int days_in_year(int year) noexcept;
std::int64_t days_between(Date from, Date to);  ///< to - from

/// Closed interval [first, last].
struct DateInterval {
    Date first;
    Date last;

    bool contains(Date d) const noexcept { return first <= d && d <= last; }
    std::int64_t length_days() const { return days_between(first, last) + 1; }
    bool operator==(const DateInterval&) const = default;
};

/// Number of days shared by two closed intervals (0 when disjoint).
std::int64_t overlap_days(const DateInterval& a, const DateInterval& b);

// ---------------------------------------------------------------------------
// Observations and series
// ---------------------------------------------------------------------------

inline constexpr int kDaysPerComposite = 16;
inline constexpr int kYearLength = 366;  ///< T in the harmonic model

struct Observation {
    Date nominal;
    int composite_doy = 1;  ///< day of year the composite value was acquired
    std::array<double, kBandCount> values{};
    Reliability reliability = Reliability::NotProcessed;

    double value(Band b) const noexcept { return values[band_slot(b)]; }
    void set(Band b, double v) noexcept { values[band_slot(b)] = v; }
    bool has_value(Band b) const noexcept { return value(b) != fill_value(b); }

    bool is_clear() const noexcept { return cmfda::is_clear(reliability); }
    /// Clear for a specific band: clear date and a non-fill value.
    bool is_clear(Band b) const noexcept { return is_clear() && has_value(b); }
};

/// Throws InvalidValue when the observation breaks the value-range or
/// composite-day invariants.
void validate(const Observation& obs);

using PixelId = std::string;

struct PixelSeries {
    PixelId pixel_id;
    std::string site_id;
    int col = 0;
    int row = 0;
    std::vector<Observation> observations;
};

/// Strict ordering, 16-day cadence and per-observation invariants.
void validate(const PixelSeries& series);

/// Observations whose reliability is Good or Marginal, in order.
std::vector<Observation> clear_observations(std::span<const Observation> obs);

// ---------------------------------------------------------------------------
// Sites and labels
// ---------------------------------------------------------------------------

inline constexpr int kSiteSide = 25;  ///< 1 km pixels per site edge
inline constexpr int kSitePixels = kSiteSide * kSiteSide;

enum class DefoType { ForestToWater, ForestToUrbanCropland, Unknown };

std::string_view to_string(DefoType t) noexcept;
DefoType parse_defo_type(std::string_view text);

PixelId make_pixel_id(std::string_view site_id, int col, int row);

class SiteGrid {
public:
    SiteGrid() = default;
    /// Pixels may arrive in any order; they are placed by (col, row).
    SiteGrid(std::string site_id, DefoType type, std::vector<PixelSeries> pixels);

    const std::string& site_id() const noexcept { return site_id_; }
    DefoType defo_type() const noexcept { return type_; }
    const PixelSeries& at(int col, int row) const;
    const std::vector<PixelSeries>& pixels() const noexcept { return pixels_; }

private:
    std::string site_id_;
    DefoType type_ = DefoType::Unknown;
    std::vector<PixelSeries> pixels_;  // row-major
};

struct DeforestationLabel {
    PixelId pixel_id;
    int col = 0;
    int row = 0;
    int defo_count = 0;  ///< deforested 250 m subpixels, 0..16
    bool z = false;

    bool operator==(const DeforestationLabel&) const = default;
};

void validate(const DeforestationLabel& label);

}  // namespace cmfda
