#include "cmfda/core.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cstdio>

namespace cmfda {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::DegenerateInput: return "DegenerateInput";
        case ErrorCode::OutOfRangeDay: return "OutOfRangeDay";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::InvalidValue: return "InvalidValue";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::RankDeficient: return "RankDeficient";
        case ErrorCode::MissingBandValue: return "MissingBandValue";
        case ErrorCode::WrongWindowLength: return "WrongWindowLength";
        case ErrorCode::SingularCovariance: return "SingularCovariance";
        case ErrorCode::NoModels: return "NoModels";
        case ErrorCode::EmptyHistory: return "EmptyHistory";
        case ErrorCode::UnknownKey: return "UnknownKey";
        case ErrorCode::EmptySample: return "EmptySample";
        case ErrorCode::OutOfDomain: return "OutOfDomain";
        case ErrorCode::KeyMismatch: return "KeyMismatch";
        case ErrorCode::DegenerateClass: return "DegenerateClass";
        case ErrorCode::NoPositivePredictions: return "NoPositivePredictions";
        case ErrorCode::InitOffGrid: return "InitOffGrid";
        case ErrorCode::TooFewPositives: return "TooFewPositives";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::InvalidConfig: return "InvalidConfig";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

ParseError::ParseError(std::string file, std::size_t line, std::size_t column, const std::string& msg)
    : Error(ErrorCode::ParseError,
            file + ":" + std::to_string(line) + (column ? ":" + std::to_string(column) : std::string{}) +
                ": " + msg),
      file_(std::move(file)),
      line_(line),
      column_(column) {}

// ---------------------------------------------------------------------------

std::size_t band_slot(Band b) noexcept {
    switch (b) {
        case Band::Red: return 0;
        case Band::NIR: return 1;
        case Band::Blue: return 2;
        case Band::MIR: return 3;
        case Band::NDVI: return 4;
        case Band::EVI: return 5;
    }
    return 0;
}

Band band_from_code(int code) {
    switch (code) {
        case 1: return Band::Red;
        case 2: return Band::NIR;
        case 3: return Band::Blue;
        case 7: return Band::MIR;
        case 8: return Band::NDVI;
        case 9: return Band::EVI;
        default: break;
    }
    throw Error(ErrorCode::InvalidValue, "unknown band code " + std::to_string(code));
}

std::string_view band_name(Band b) noexcept {
    switch (b) {
        case Band::Red: return "red";
        case Band::NIR: return "nir";
        case Band::Blue: return "blue";
        case Band::MIR: return "mir";
        case Band::NDVI: return "ndvi";
        case Band::EVI: return "evi";
    }
    return "?";
}

Band parse_band(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    for (Band b : kAllBands) {
        if (lower == band_name(b)) return b;
    }
    int code = 0;
    auto [ptr, ec] = std::from_chars(lower.data(), lower.data() + lower.size(), code);
    if (ec == std::errc{} && ptr == lower.data() + lower.size()) return band_from_code(code);
    throw Error(ErrorCode::InvalidValue, "unknown band '" + std::string(text) + "'");
}

bool is_vegetation_index(Band b) noexcept { return b == Band::NDVI || b == Band::EVI; }

double fill_value(Band b) noexcept { return is_vegetation_index(b) ? -0.3 : -0.1; }

double min_accepted(Band b) noexcept { return fill_value(b); }

Reliability reliability_from_code(int code) {
    if (code < -1 || code > 3)
        throw Error(ErrorCode::InvalidValue, "unknown reliability code " + std::to_string(code));
    return static_cast<Reliability>(code);
}

// ---------------------------------------------------------------------------

namespace chr = std::chrono;

namespace {

chr::sys_days to_sys(Date d) {
    return chr::sys_days{chr::year{d.year} / chr::January / 1} + chr::days{d.doy - 1};
}

}  // namespace

int days_in_year(int year) noexcept { return chr::year{year}.is_leap() ? 366 : 365; }

Date Date::from_ymd(int y, unsigned m, unsigned d) {
    chr::year_month_day ymd{chr::year{y}, chr::month{m}, chr::day{d}};
    if (!ymd.ok())
        throw Error(ErrorCode::InvalidValue,
                    "invalid date " + std::to_string(y) + "-" + std::to_string(m) + "-" + std::to_string(d));
    const auto jan1 = chr::sys_days{chr::year{y} / chr::January / 1};
    return Date{y, static_cast<int>((chr::sys_days{ymd} - jan1).count()) + 1};
}

Date Date::from_serial(std::int64_t days_since_epoch) {
    const chr::sys_days sd{chr::days{days_since_epoch}};
    const chr::year_month_day ymd{sd};
    const int y = static_cast<int>(ymd.year());
    const auto jan1 = chr::sys_days{chr::year{y} / chr::January / 1};
    return Date{y, static_cast<int>((sd - jan1).count()) + 1};
}

Date Date::parse(std::string_view iso) {
    int y = 0;
    unsigned m = 0, d = 0;
    auto bad = [&] { return Error(ErrorCode::InvalidValue, "bad ISO date '" + std::string(iso) + "'"); };
    if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') throw bad();
    auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        auto [p, ec] = std::from_chars(iso.data() + pos, iso.data() + pos + len, out);
        if (ec != std::errc{} || p != iso.data() + pos + len) throw bad();
    };
    num(0, 4, y);
    num(5, 2, m);
    num(8, 2, d);
    return from_ymd(y, m, d);
}

std::int64_t Date::serial() const { return to_sys(*this).time_since_epoch().count(); }

unsigned Date::month() const { return static_cast<unsigned>(chr::year_month_day{to_sys(*this)}.month()); }

unsigned Date::day_of_month() const { return static_cast<unsigned>(chr::year_month_day{to_sys(*this)}.day()); }

std::string Date::iso() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", year, month(), day_of_month());
    return buf;
}

std::int64_t days_between(Date from, Date to) { return to.serial() - from.serial(); }

std::int64_t overlap_days(const DateInterval& a, const DateInterval& b) {
    const Date lo = std::max(a.first, b.first);
    const Date hi = std::min(a.last, b.last);
    return hi < lo ? 0 : days_between(lo, hi) + 1;
}

// ---------------------------------------------------------------------------

void validate(const Observation& obs) {
    if (obs.nominal.doy < 1 || obs.nominal.doy > days_in_year(obs.nominal.year))
        throw Error(ErrorCode::InvalidValue, "nominal day-of-year out of range");
    if (obs.composite_doy < 1 || obs.composite_doy > kYearLength)
        throw Error(ErrorCode::InvalidValue,
                    "composite day " + std::to_string(obs.composite_doy) + " outside 1..366");
    const int len = days_in_year(obs.nominal.year);
    const int lag = ((obs.composite_doy - obs.nominal.doy) % len + len) % len;
    if (lag > kDaysPerComposite - 1)
        throw Error(ErrorCode::InvalidValue, "composite day " + std::to_string(obs.composite_doy) +
                                                 " is not within 15 days after nominal " + obs.nominal.iso());
    for (Band b : kAllBands) {
        const double v = obs.value(b);
        if (!(v >= min_accepted(b) && v <= kMaxAccepted))
            throw Error(ErrorCode::InvalidValue, std::string(band_name(b)) + " value " + std::to_string(v) +
                                                     " outside accepted range on " + obs.nominal.iso());
    }
}

void validate(const PixelSeries& series) {
    const auto& obs = series.observations;
    for (std::size_t i = 0; i < obs.size(); ++i) {
        validate(obs[i]);
        if (i > 0 && days_between(obs[i - 1].nominal, obs[i].nominal) != kDaysPerComposite)
            throw Error(ErrorCode::InvalidValue, "pixel " + series.pixel_id + ": dates " + obs[i - 1].nominal.iso() +
                                                     " and " + obs[i].nominal.iso() + " are not 16 days apart");
    }
}

std::vector<Observation> clear_observations(std::span<const Observation> obs) {
    std::vector<Observation> out;
    std::copy_if(obs.begin(), obs.end(), std::back_inserter(out), [](const Observation& o) { return o.is_clear(); });
    return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(DefoType t) noexcept {
    switch (t) {
        case DefoType::ForestToWater: return "forest-to-water";
        case DefoType::ForestToUrbanCropland: return "forest-to-urban-cropland";
        case DefoType::Unknown: return "unknown";
    }
    return "unknown";
}

DefoType parse_defo_type(std::string_view text) {
    for (DefoType t : {DefoType::ForestToWater, DefoType::ForestToUrbanCropland, DefoType::Unknown}) {
        if (text == to_string(t)) return t;
    }
    throw Error(ErrorCode::InvalidValue, "unknown deforestation type '" + std::string(text) + "'");
}

PixelId make_pixel_id(std::string_view site_id, int col, int row) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "_c%02dr%02d", col, row);
    return std::string(site_id) + buf;
}

SiteGrid::SiteGrid(std::string site_id, DefoType type, std::vector<PixelSeries> pixels)
    : site_id_(std::move(site_id)), type_(type) {
    if (pixels.size() != static_cast<std::size_t>(kSitePixels))
        throw Error(ErrorCode::ShapeMismatch, "site " + site_id_ + " has " + std::to_string(pixels.size()) +
                                                  " pixels, expected " + std::to_string(kSitePixels));
    pixels_.resize(pixels.size());
    std::vector<bool> seen(pixels.size(), false);
    for (auto& p : pixels) {
        if (p.col < 0 || p.col >= kSiteSide || p.row < 0 || p.row >= kSiteSide)
            throw Error(ErrorCode::ShapeMismatch, "pixel " + p.pixel_id + " outside the 25x25 grid");
        const auto idx = static_cast<std::size_t>(p.row * kSiteSide + p.col);
        if (seen[idx]) throw Error(ErrorCode::ShapeMismatch, "duplicate pixel at " + p.pixel_id);
        seen[idx] = true;
        pixels_[idx] = std::move(p);
    }
}

const PixelSeries& SiteGrid::at(int col, int row) const {
    if (col < 0 || col >= kSiteSide || row < 0 || row >= kSiteSide)
        throw Error(ErrorCode::OutOfRange, "grid index out of range");
    return pixels_.at(static_cast<std::size_t>(row * kSiteSide + col));
}

void validate(const DeforestationLabel& label) {
    if (label.defo_count < 0 || label.defo_count > 16)
        throw Error(ErrorCode::InvalidValue, "defo_count outside 0..16 for " + label.pixel_id);
    if (label.z != (label.defo_count >= 1))
        throw Error(ErrorCode::InvalidValue, "z inconsistent with defo_count for " + label.pixel_id);
}

}  // namespace cmfda
