#include "cmfda/synth.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "cmfda/indices.hpp"

namespace cmfda {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::mt19937_64 pixel_rng(std::uint64_t seed, int col, int row, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(col), static_cast<std::uint32_t>(row), stream};
    return std::mt19937_64(seq);
}

enum Stream : std::uint32_t { kCoeffStream = 1, kSeriesStream = 2, kLanduseStream = 3 };

// Keeps generated values inside the accepted range without ever landing on
// the fill value.
double clamp_value(Band b, double v) {
    const double lo = is_vegetation_index(b) ? -0.2 : 0.0;
    return std::clamp(v, lo, kMaxAccepted);
}

}  // namespace

void validate(const SynthConfig& cfg) {
    if (cfg.last_year < cfg.first_year) throw Error(ErrorCode::InvalidConfig, "last_year precedes first_year");
    for (double sd : cfg.noise_sd)
        if (!(sd >= 0.0)) throw Error(ErrorCode::InvalidConfig, "noise sd must be non-negative");
    if (!(cfg.pixel_coeff_sd >= 0.0)) throw Error(ErrorCode::InvalidConfig, "coefficient sd must be non-negative");
    for (std::size_t m = 0; m < 12; ++m) {
        if (!is_probability(cfg.cloudy_prob[m]) || !is_probability(cfg.marginal_prob[m]) ||
            cfg.cloudy_prob[m] + cfg.marginal_prob[m] + cfg.not_processed_prob > 1.0)
            throw Error(ErrorCode::InvalidConfig, "reliability probabilities must lie in [0, 1] and sum to at most 1");
    }
    if (!is_probability(cfg.not_processed_prob)) throw Error(ErrorCode::InvalidConfig, "invalid not-processed probability");
    for (const auto& e : cfg.events) {
        for (auto [c, r] : e.pixels)
            if (c < 0 || c >= kSiteSide || r < 0 || r >= kSiteSide)
                throw Error(ErrorCode::InvalidConfig, "event pixel outside the 25x25 grid");
    }
}

void set_seasonal_reliability(SynthConfig& cfg, double cloudy, double marginal) {
    for (std::size_t m = 0; m < 12; ++m) {
        const double k = (m >= 3 && m <= 8) ? 2.0 : 1.0;  // April..September
        cfg.cloudy_prob[m] = std::min(1.0, k * cloudy);
        cfg.marginal_prob[m] = std::min(1.0 - cfg.cloudy_prob[m], k * marginal);
    }
}

Coeffs pixel_coefficients(const SynthConfig& cfg, int col, int row, Band band) {
    Coeffs a = cfg.coeffs[band_slot(band)];
    if (cfg.pixel_coeff_sd > 0.0) {
        auto rng = pixel_rng(cfg.seed, col, row, kCoeffStream + 16 * static_cast<std::uint32_t>(band_slot(band)));
        std::normal_distribution<double> jitter(0.0, cfg.pixel_coeff_sd);
        for (double& v : a) v += jitter(rng);
    }
    return a;
}

SynthSite generate_site(const SynthConfig& cfg) {
    validate(cfg);

    // Shift per pixel and the date it starts.
    std::vector<std::vector<const SynthEvent*>> events(kSitePixels);
    for (const auto& e : cfg.events)
        for (auto [c, r] : e.pixels) events[static_cast<std::size_t>(r * kSiteSide + c)].push_back(&e);

    const Date start = Date::from_ymd(cfg.first_year, 1, 1);
    const Date end = Date::from_ymd(cfg.last_year, 12, 31);

    std::vector<PixelSeries> pixels;
    pixels.reserve(kSitePixels);
    for (int row = 0; row < kSiteSide; ++row) {
        for (int col = 0; col < kSiteSide; ++col) {
            PixelSeries px{make_pixel_id(cfg.site_id, col, row), cfg.site_id, col, row, {}};
            std::array<Coeffs, kBandCount> a;
            for (Band b : kAllBands) a[band_slot(b)] = pixel_coefficients(cfg, col, row, b);

            auto rng = pixel_rng(cfg.seed, col, row, kSeriesStream);
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::uniform_int_distribution<int> lag(0, kDaysPerComposite - 1);
            std::normal_distribution<double> gauss(0.0, 1.0);

            for (Date d = start; d <= end; d = d.plus_days(kDaysPerComposite)) {
                Observation obs;
                obs.nominal = d;
                const int len = days_in_year(d.year);
                obs.composite_doy = (d.doy - 1 + lag(rng)) % len + 1;

                const auto m = static_cast<std::size_t>(d.month() - 1);
                const double u = unit(rng);
                if (u < cfg.not_processed_prob) obs.reliability = Reliability::NotProcessed;
                else if (u < cfg.not_processed_prob + cfg.cloudy_prob[m]) obs.reliability = Reliability::Cloudy;
                else if (u < cfg.not_processed_prob + cfg.cloudy_prob[m] + cfg.marginal_prob[m])
                    obs.reliability = Reliability::Marginal;
                else obs.reliability = Reliability::Good;

                for (Band b : kAllBands) {
                    const std::size_t s = band_slot(b);
                    // Draw noise unconditionally so a pixel's stream does not
                    // depend on which bands happen to be filled.
                    const double noise = cfg.noise_sd[s] * gauss(rng);
                    if (obs.reliability == Reliability::NotProcessed) {
                        obs.set(b, fill_value(b));
                        continue;
                    }
                    double v = predict(a[s], obs.composite_doy) + noise;
                    for (const SynthEvent* e : events[static_cast<std::size_t>(row * kSiteSide + col)])
                        if (e->date <= d) v += e->shift[s];
                    if (obs.reliability == Reliability::Cloudy)
                        v += is_vegetation_index(b) ? -cfg.cloud_bias : cfg.cloud_bias;
                    obs.set(b, clamp_value(b, v));
                }
                px.observations.push_back(obs);
            }
            pixels.push_back(std::move(px));
        }
    }

    // Land use: forest everywhere except scattered cropland that may turn
    // urban; event pixels lose between 1 and 16 forest subpixels.
    auto rng = pixel_rng(cfg.seed, -1, -1, kLanduseStream);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<int> forest_class(3, 4);
    const int lost_class = cfg.defo_type == DefoType::ForestToWater ? kClassWater : kClassCropland;

    auto t0 = LanduseFineGrid::filled(cfg.first_year + 2, 3);
    auto t1 = LanduseFineGrid::filled(cfg.last_year, 3);
    for (int r = 0; r < kFineSide; ++r) {
        for (int c = 0; c < kFineSide; ++c) {
            const int cls = unit(rng) < 0.05 ? kClassCropland : forest_class(rng);
            t0.set(c, r, cls);
            t1.set(c, r, cls == kClassCropland && unit(rng) < 0.3 ? kClassUrban : cls);
        }
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].empty()) continue;
        const int col = static_cast<int>(i) % kSiteSide;
        const int row = static_cast<int>(i) / kSiteSide;
        std::vector<int> cells(kFinePerCoarse * kFinePerCoarse);
        for (std::size_t k = 0; k < cells.size(); ++k) cells[k] = static_cast<int>(k);
        std::shuffle(cells.begin(), cells.end(), rng);
        const int lost = std::uniform_int_distribution<int>(1, kFinePerCoarse * kFinePerCoarse)(rng);
        for (int k = 0; k < lost; ++k) {
            const int fc = col * kFinePerCoarse + cells[static_cast<std::size_t>(k)] % kFinePerCoarse;
            const int fr = row * kFinePerCoarse + cells[static_cast<std::size_t>(k)] / kFinePerCoarse;
            t0.set(fc, fr, forest_class(rng));
            t1.set(fc, fr, cfg.defo_type == DefoType::ForestToUrbanCropland && unit(rng) < 0.5 ? kClassUrban
                                                                                               : lost_class);
        }
    }

    SynthSite site{SiteGrid(cfg.site_id, cfg.defo_type, std::move(pixels)), {}, std::move(t0), std::move(t1)};
    site.labels = aggregate_labels(cfg.site_id, site.landuse_t0, site.landuse_t1);
    return site;
}

std::vector<std::pair<int, int>> random_pixels(int n, std::uint64_t seed) {
    if (n < 0 || n > kSitePixels) throw Error(ErrorCode::InvalidConfig, "event count outside 0..625");
    std::vector<int> idx(kSitePixels);
    for (int i = 0; i < kSitePixels; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < n; ++i) out.emplace_back(idx[static_cast<std::size_t>(i)] % kSiteSide,
                                                 idx[static_cast<std::size_t>(i)] / kSiteSide);
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

// Seasonal forest signatures: reflectances low in the visible, NIR high;
// indices high with a dry-season dip.
void forest_coefficients(SynthConfig& cfg) {
    cfg.coeffs[band_slot(Band::Red)] = {0.040, 0.010, 0.006, 0.002, -0.001};
    cfg.coeffs[band_slot(Band::NIR)] = {0.300, -0.030, 0.020, 0.008, 0.004};
    cfg.coeffs[band_slot(Band::Blue)] = {0.025, 0.006, 0.004, 0.001, 0.001};
    cfg.coeffs[band_slot(Band::MIR)] = {0.120, 0.020, 0.010, -0.004, 0.003};
    cfg.coeffs[band_slot(Band::NDVI)] = {0.780, -0.060, 0.040, 0.015, -0.010};
    cfg.coeffs[band_slot(Band::EVI)] = {0.450, -0.050, 0.030, 0.010, -0.005};
}

}  // namespace

std::vector<std::string> scenario_names() { return {"sonora-like", "yucatan-like"}; }

SynthConfig scenario(const std::string& name, std::uint64_t seed, int n_events, double noise_scale) {
    SynthConfig cfg;
    cfg.seed = seed;
    forest_coefficients(cfg);
    std::array<double, kBandCount> shift{};
    if (name == "sonora-like") {
        cfg.site_id = "sonora";
        cfg.defo_type = DefoType::ForestToWater;
        shift[band_slot(Band::NIR)] = -0.30;
        shift[band_slot(Band::NDVI)] = -0.10;
        shift[band_slot(Band::EVI)] = -0.10;
        shift[band_slot(Band::MIR)] = -0.08;
    } else if (name == "yucatan-like") {
        cfg.site_id = "yucatan";
        cfg.defo_type = DefoType::ForestToUrbanCropland;
        shift[band_slot(Band::NDVI)] = -0.30;
        shift[band_slot(Band::EVI)] = -0.15;
        shift[band_slot(Band::Red)] = 0.04;
        shift[band_slot(Band::MIR)] = 0.06;
        shift[band_slot(Band::NIR)] = -0.02;
    } else {
        throw Error(ErrorCode::InvalidConfig, "unknown scenario '" + name + "'");
    }
    for (Band b : kAllBands)
        cfg.noise_sd[band_slot(b)] = noise_scale * (is_vegetation_index(b) ? 0.03 : (b == Band::NIR ? 0.02 : 0.01));
    cfg.pixel_coeff_sd = 0.005;
    set_seasonal_reliability(cfg, 0.08, 0.12);
    cfg.not_processed_prob = 0.01;

    // Event dates fall between Jan 1 of the first prediction year and Sep 30
    // of the last, leaving room for a full run before the window closes.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const auto lo = Date::from_ymd(cfg.first_year + 2, 1, 1).serial();
    const auto hi = Date::from_ymd(cfg.last_year - 1, 9, 30).serial();
    std::uniform_int_distribution<std::int64_t> day(lo, hi);
    for (auto px : random_pixels(n_events, seed)) cfg.events.push_back({{px}, Date::from_serial(day(rng)), shift});
    return cfg;
}

}  // namespace cmfda
