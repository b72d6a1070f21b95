#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmfda/errors.hpp"

namespace cmfda {

/// Prediction-error standardization schemes. Date-keyed stages use five-day
/// periods of the year; chained schemes apply the date stage, then the
/// pixel stage to its output.
enum class Scheme {
    Identity,                   // ---
    DaySdOverall,               // 2
    DaySdSite,                  // 3
    DayEcdfOverall,             // II
    DayEcdfSite,                // III
    PixelSd,                    // 1
    PixelEcdf,                  // I
    DayPixel_SdOverall_Sd,      // 4a
    DayPixel_SdSite_Sd,         // 4b
    DayPixel_EcdfOverall_Sd,    // II.1
    DayPixel_EcdfSite_Sd,       // III.1
    DayPixel_SdOverall_Ecdf,    // 2.I
    DayPixel_SdSite_Ecdf,       // 3.I
    DayPixel_EcdfOverall_Ecdf,  // IVi
    DayPixel_EcdfSite_Ecdf,     // IVii
    CubeSd,                     // 4c
    CubeEcdf,                   // IViii
};

inline constexpr std::size_t kSchemeCount = 17;
extern const std::array<Scheme, kSchemeCount> kAllSchemes;

std::string_view scheme_code(Scheme s) noexcept;
std::string_view scheme_name(Scheme s) noexcept;
/// Accepts either the short code ("4a", "IVii", "---") or the long name.
Scheme parse_scheme(std::string_view text);

enum class StageStat { Sd, Ecdf };
enum class StageKey { Pixel, PeriodOverall, PeriodSite, Cube };

struct StageSpec {
    StageStat stat;
    StageKey key;

    bool operator==(const StageSpec&) const = default;
};

std::vector<StageSpec> stages_of(Scheme s);

struct ErrorContext {
    PixelId pixel_id;
    std::string site_id;
    int col = 0;
    int row = 0;
    int doy = 1;
};

struct ErrorRecord {
    ErrorContext ctx;
    double eps = 0.0;
};

/// Statistic behind one key. `sorted` is filled for ecdf stages only.
struct StageEntry {
    long n = 0;
    double sd = 0.0;
    std::vector<double> sorted;

    bool operator==(const StageEntry&) const = default;
};

/// Lookup keys for a context, most specific first. The last one is the
/// global key "*".
std::vector<std::string> key_chain(StageKey key, const ErrorContext& ctx);

struct StageTable {
    StageSpec spec{StageStat::Sd, StageKey::Pixel};
    bool final_stage = true;
    /// Every usable entry, keyed by the strings of key_chain(). An sd entry
    /// is usable with n >= 2 and sd > 0; an ecdf entry with n >= 1.
    std::unordered_map<std::string, StageEntry> entries;

    const StageEntry& resolve(const ErrorContext& ctx) const;
    double apply(double eps, const ErrorContext& ctx) const;

    bool operator==(const StageTable&) const = default;
};

struct Standardizer {
    Scheme scheme = Scheme::Identity;
    Band band = Band::NIR;
    std::vector<StageTable> stages;

    bool operator==(const Standardizer&) const = default;
};

/// Throws EmptyHistory on an empty history.
Standardizer fit_standardizer(std::span<const ErrorRecord> history, Scheme scheme, Band band);

/// Throws UnknownKey when no fallback level has a usable entry.
double transform(const Standardizer& std, double eps, const ErrorContext& ctx);

/// r/(n+1) with r = #{sample <= x}, clamped to [1/(n+1), n/(n+1)].
/// Throws EmptySample.
double ecdf_eval(std::span<const double> sorted_sample, double x);

/// Standard normal quantile. Throws OutOfDomain unless 0 < p < 1.
double inverse_normal_cdf(double p);

double sample_sd(std::span<const double> values);  ///< n-1 denominator

// ---------------------------------------------------------------------------
// Applying standardizers to prediction errors
// ---------------------------------------------------------------------------

using StandardizerSet = std::map<Band, Standardizer>;

/// Every present error of `band` in `errors`, as fitting history.
std::vector<ErrorRecord> error_history(std::span<const PixelErrors> errors, Band band);

StandardizerSet fit_standardizers(std::span<const PixelErrors> errors, Scheme scheme, std::span<const Band> bands);

/// Bands without a standardizer are left untouched.
PixelErrors standardize(const PixelErrors& errors, const StandardizerSet& set);

}  // namespace cmfda
