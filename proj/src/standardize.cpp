#include "cmfda/standardize.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmfda/covariance.hpp"

namespace cmfda {

const std::array<Scheme, kSchemeCount> kAllSchemes = {
    Scheme::Identity,
    Scheme::DaySdOverall,
    Scheme::DaySdSite,
    Scheme::DayEcdfOverall,
    Scheme::DayEcdfSite,
    Scheme::PixelSd,
    Scheme::PixelEcdf,
    Scheme::DayPixel_SdOverall_Sd,
    Scheme::DayPixel_SdSite_Sd,
    Scheme::DayPixel_EcdfOverall_Sd,
    Scheme::DayPixel_EcdfSite_Sd,
    Scheme::DayPixel_SdOverall_Ecdf,
    Scheme::DayPixel_SdSite_Ecdf,
    Scheme::DayPixel_EcdfOverall_Ecdf,
    Scheme::DayPixel_EcdfSite_Ecdf,
    Scheme::CubeSd,
    Scheme::CubeEcdf,
};

namespace {

struct SchemeInfo {
    Scheme scheme;
    std::string_view code;
    std::string_view name;
};

constexpr SchemeInfo kSchemeInfo[] = {
    {Scheme::Identity, "---", "---"},
    {Scheme::DaySdOverall, "2", "day-sd.overall--"},
    {Scheme::DaySdSite, "3", "day-sd.site--"},
    {Scheme::DayEcdfOverall, "II", "day-qs.overall--"},
    {Scheme::DayEcdfSite, "III", "day-qs.site--"},
    {Scheme::PixelSd, "1", "pixel--sd-"},
    {Scheme::PixelEcdf, "I", "pixel--qs-"},
    {Scheme::DayPixel_SdOverall_Sd, "4a", "day_pixel-sd.overall-sd-"},
    {Scheme::DayPixel_SdSite_Sd, "4b", "day_pixel-sd.site-sd-"},
    {Scheme::DayPixel_EcdfOverall_Sd, "II.1", "day_pixel-qs.overall-sd-"},
    {Scheme::DayPixel_EcdfSite_Sd, "III.1", "day_pixel-qs.site-sd-"},
    {Scheme::DayPixel_SdOverall_Ecdf, "2.I", "day_pixel-sd.overall-qs-"},
    {Scheme::DayPixel_SdSite_Ecdf, "3.I", "day_pixel-sd.site-qs-"},
    {Scheme::DayPixel_EcdfOverall_Ecdf, "IVi", "day_pixel-qs.overall-qs-"},
    {Scheme::DayPixel_EcdfSite_Ecdf, "IVii", "day_pixel-qs.site-qs-"},
    {Scheme::CubeSd, "4c", "cube---sd"},
    {Scheme::CubeEcdf, "IViii", "cube---qs"},
};

const SchemeInfo& info(Scheme s) {
    for (const auto& i : kSchemeInfo)
        if (i.scheme == s) return i;
    return kSchemeInfo[0];
}

}  // namespace

std::string_view scheme_code(Scheme s) noexcept { return info(s).code; }
std::string_view scheme_name(Scheme s) noexcept { return info(s).name; }

Scheme parse_scheme(std::string_view text) {
    for (const auto& i : kSchemeInfo)
        if (text == i.code || text == i.name) return i.scheme;
    throw Error(ErrorCode::InvalidConfig, "unknown standardization scheme '" + std::string(text) + "'");
}

std::vector<StageSpec> stages_of(Scheme s) {
    using S = StageStat;
    using K = StageKey;
    switch (s) {
        case Scheme::Identity: return {};
        case Scheme::DaySdOverall: return {{S::Sd, K::PeriodOverall}};
        case Scheme::DaySdSite: return {{S::Sd, K::PeriodSite}};
        case Scheme::DayEcdfOverall: return {{S::Ecdf, K::PeriodOverall}};
        case Scheme::DayEcdfSite: return {{S::Ecdf, K::PeriodSite}};
        case Scheme::PixelSd: return {{S::Sd, K::Pixel}};
        case Scheme::PixelEcdf: return {{S::Ecdf, K::Pixel}};
        case Scheme::DayPixel_SdOverall_Sd: return {{S::Sd, K::PeriodOverall}, {S::Sd, K::Pixel}};
        case Scheme::DayPixel_SdSite_Sd: return {{S::Sd, K::PeriodSite}, {S::Sd, K::Pixel}};
        case Scheme::DayPixel_EcdfOverall_Sd: return {{S::Ecdf, K::PeriodOverall}, {S::Sd, K::Pixel}};
        case Scheme::DayPixel_EcdfSite_Sd: return {{S::Ecdf, K::PeriodSite}, {S::Sd, K::Pixel}};
        case Scheme::DayPixel_SdOverall_Ecdf: return {{S::Sd, K::PeriodOverall}, {S::Ecdf, K::Pixel}};
        case Scheme::DayPixel_SdSite_Ecdf: return {{S::Sd, K::PeriodSite}, {S::Ecdf, K::Pixel}};
        case Scheme::DayPixel_EcdfOverall_Ecdf: return {{S::Ecdf, K::PeriodOverall}, {S::Ecdf, K::Pixel}};
        case Scheme::DayPixel_EcdfSite_Ecdf: return {{S::Ecdf, K::PeriodSite}, {S::Ecdf, K::Pixel}};
        case Scheme::CubeSd: return {{S::Sd, K::Cube}};
        case Scheme::CubeEcdf: return {{S::Ecdf, K::Cube}};
    }
    return {};
}

std::vector<std::string> key_chain(StageKey key, const ErrorContext& ctx) {
    const std::string period = std::to_string(period_of_day(ctx.doy));
    switch (key) {
        case StageKey::Pixel: return {"px:" + ctx.pixel_id, "site:" + ctx.site_id, "*"};
        case StageKey::PeriodOverall: return {"p:" + period, "*"};
        case StageKey::PeriodSite: return {"sp:" + ctx.site_id + "|" + period, "p:" + period, "*"};
        case StageKey::Cube: {
            const CubeIndex cube = cube_of(ctx.col, ctx.row, ctx.doy);
            return {"cube:" + ctx.site_id + "|" + std::to_string(cube.square) + "|" + period,
                    "sp:" + ctx.site_id + "|" + period, "site:" + ctx.site_id, "*"};
        }
    }
    return {"*"};
}

// ---------------------------------------------------------------------------

double sample_sd(std::span<const double> values) {
    if (values.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double ecdf_eval(std::span<const double> sorted_sample, double x) {
    if (sorted_sample.empty()) throw Error(ErrorCode::EmptySample, "ecdf of an empty sample");
    const auto n = static_cast<double>(sorted_sample.size());
    const auto r = static_cast<double>(std::upper_bound(sorted_sample.begin(), sorted_sample.end(), x) -
                                       sorted_sample.begin());
    return std::clamp(r, 1.0, n) / (n + 1.0);
}

double inverse_normal_cdf(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::OutOfDomain, "inverse normal cdf needs 0 < p < 1");
    // Upper half by symmetry; 1 - p is exact for p >= 0.5.
    if (p > 0.5) return -inverse_normal_cdf(1.0 - p);

    // Rational approximation (Acklam), relative error ~1e-9 ...
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    }
    // ... polished with one Halley step on the lower tail.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

// ---------------------------------------------------------------------------

const StageEntry& StageTable::resolve(const ErrorContext& ctx) const {
    for (const auto& key : key_chain(spec.key, ctx)) {
        if (auto it = entries.find(key); it != entries.end()) return it->second;
    }
    throw Error(ErrorCode::UnknownKey, "no usable standardization entry for pixel " + ctx.pixel_id);
}

double StageTable::apply(double eps, const ErrorContext& ctx) const {
    const StageEntry& e = resolve(ctx);
    if (spec.stat == StageStat::Sd) return eps / e.sd;
    const double u = ecdf_eval(e.sorted, eps);
    return final_stage ? u - 0.5 : inverse_normal_cdf(u);
}

namespace {

StageTable fit_stage(std::span<const ErrorRecord> history, StageSpec spec, bool final_stage) {
    std::unordered_map<std::string, std::vector<double>> groups;
    for (const auto& r : history) {
        for (auto& key : key_chain(spec.key, r.ctx)) groups[std::move(key)].push_back(r.eps);
    }
    StageTable t{spec, final_stage, {}};
    for (auto& [key, values] : groups) {
        StageEntry e;
        e.n = static_cast<long>(values.size());
        if (spec.stat == StageStat::Sd) {
            e.sd = sample_sd(values);
            if (e.n < 2 || !(e.sd > 0.0)) continue;
        } else {
            std::sort(values.begin(), values.end());
            e.sorted = std::move(values);
        }
        t.entries.emplace(key, std::move(e));
    }
    return t;
}

}  // namespace

Standardizer fit_standardizer(std::span<const ErrorRecord> history, Scheme scheme, Band band) {
    if (history.empty()) throw Error(ErrorCode::EmptyHistory, "cannot fit a standardizer on an empty history");
    Standardizer s{scheme, band, {}};
    const auto specs = stages_of(scheme);
    std::vector<ErrorRecord> current(history.begin(), history.end());
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const bool final_stage = i + 1 == specs.size();
        s.stages.push_back(fit_stage(current, specs[i], final_stage));
        if (!final_stage) {
            for (auto& r : current) r.eps = s.stages.back().apply(r.eps, r.ctx);
        }
    }
    return s;
}

double transform(const Standardizer& std, double eps, const ErrorContext& ctx) {
    for (const auto& stage : std.stages) eps = stage.apply(eps, ctx);
    return eps;
}

// ---------------------------------------------------------------------------

std::vector<ErrorRecord> error_history(std::span<const PixelErrors> errors, Band band) {
    std::vector<ErrorRecord> out;
    for (const auto& px : errors) {
        for (const auto& w : px.windows) {
            for (const auto& p : w.points) {
                if (p.has(band)) out.push_back({{px.pixel_id, px.site_id, px.col, px.row, p.doy}, p.get(band)});
            }
        }
    }
    return out;
}

StandardizerSet fit_standardizers(std::span<const PixelErrors> errors, Scheme scheme, std::span<const Band> bands) {
    StandardizerSet set;
    for (Band b : bands) set.emplace(b, fit_standardizer(error_history(errors, b), scheme, b));
    return set;
}

PixelErrors standardize(const PixelErrors& errors, const StandardizerSet& set) {
    PixelErrors out = errors;
    for (auto& w : out.windows) {
        for (auto& p : w.points) {
            const ErrorContext ctx{out.pixel_id, out.site_id, out.col, out.row, p.doy};
            for (const auto& [band, stdz] : set) {
                if (p.has(band)) p.eps[band_slot(band)] = transform(stdz, p.get(band), ctx);
            }
        }
    }
    return out;
}

}  // namespace cmfda
