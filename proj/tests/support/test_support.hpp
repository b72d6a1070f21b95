#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "cmfda/core.hpp"
#include "cmfda/detection.hpp"
#include "cmfda/harmonic.hpp"
#include "cmfda/training.hpp"
#include "cmfda/windows.hpp"

namespace testsupport {

using namespace cmfda;

using ValueFn = std::function<double(Band, Date, int doy)>;
using ReliabilityFn = std::function<Reliability(Date)>;

inline Reliability always_good(Date) { return Reliability::Good; }

/// 16-day series from Jan 1 of `first_year` to Dec 31 of `last_year`. The
/// composite day equals the nominal day so tests can reason about exact
/// harmonic values.
inline PixelSeries make_series(const std::string& id, int first_year, int last_year, const ValueFn& value,
                               const ReliabilityFn& reliability = always_good, int col = 0, int row = 0,
                               const std::string& site = "s") {
    PixelSeries s{id, site, col, row, {}};
    const Date end = Date::from_ymd(last_year, 12, 31);
    for (Date d = Date::from_ymd(first_year, 1, 1); d <= end; d = d.plus_days(kDaysPerComposite)) {
        Observation o;
        o.nominal = d;
        o.composite_doy = d.doy;
        o.reliability = reliability(d);
        for (Band b : kAllBands)
            o.set(b, o.reliability == Reliability::NotProcessed ? fill_value(b) : value(b, d, d.doy));
        s.observations.push_back(o);
    }
    return s;
}

/// Plausible forest signal per band: harmonic with a small seasonal swing.
inline double forest_value(Band b, int doy) {
    switch (b) {
        case Band::Red: return predict(Coeffs{0.04, 0.01, 0.005, 0.002, 0.0}, doy);
        case Band::NIR: return predict(Coeffs{0.30, -0.03, 0.02, 0.008, 0.004}, doy);
        case Band::Blue: return predict(Coeffs{0.025, 0.005, 0.003, 0.0, 0.001}, doy);
        case Band::MIR: return predict(Coeffs{0.12, 0.02, 0.01, -0.004, 0.003}, doy);
        case Band::NDVI: return predict(Coeffs{0.78, -0.06, 0.04, 0.015, -0.01}, doy);
        case Band::EVI: return predict(Coeffs{0.45, -0.05, 0.03, 0.01, -0.005}, doy);
    }
    return 0.0;
}

/// Forest signal with a level shift of `shift` on `band` from `event` on.
inline ValueFn stepped(Band band, Date event, double shift) {
    return [=](Band b, Date d, int doy) {
        double v = forest_value(b, doy);
        if (b == band && d >= event) v += shift;
        return v;
    };
}

inline ValueFn stable() {
    return [](Band b, Date, int doy) { return forest_value(b, doy); };
}

/// One-window error record with consecutive 16-day dates from `start`.
/// Either list may be empty, in which case the band is absent.
inline std::shared_ptr<PixelErrors> window_errors(const std::string& id, const std::vector<double>& nir,
                                                  const std::vector<double>& ndvi, int year = 2005) {
    auto pe = std::make_shared<PixelErrors>();
    pe->pixel_id = id;
    pe->site_id = "s";
    const auto w = window_for_prediction_year(year);
    WindowErrors we{w.index, w.predict_year, w.predict, {}};
    const std::size_t n = std::max(nir.size(), ndvi.size());
    Date d = Date::from_ymd(year, 1, 1);
    for (std::size_t i = 0; i < n; ++i, d = d.plus_days(kDaysPerComposite)) {
        ErrorPoint p{d, d.doy, {}, 0};
        if (i < nir.size()) p.set(Band::NIR, nir[i]);
        if (i < ndvi.size()) p.set(Band::NDVI, ndvi[i]);
        we.points.push_back(p);
    }
    pe->windows.push_back(std::move(we));
    return pe;
}

/// Separable labeled data: positives carry `n_post` errors of -0.3 at the
/// end of the year, negatives carry errors bounded by 0.05.
inline std::vector<LabeledPixel> separable_data(int n_pos, int n_neg, std::uint64_t seed, int n_post = 5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> small(-0.05, 0.05);
    std::vector<LabeledPixel> out;
    for (int i = 0; i < n_pos + n_neg; ++i) {
        const bool z = i < n_pos;
        std::vector<double> nir(20), ndvi(20);
        for (std::size_t k = 0; k < nir.size(); ++k) {
            nir[k] = small(rng);
            ndvi[k] = small(rng);
        }
        if (z)
            for (int k = 0; k < n_post; ++k) nir[nir.size() - 1 - static_cast<std::size_t>(k)] = -0.3 - 0.01 * k;
        out.push_back({window_errors("p" + std::to_string(i), nir, ndvi), z});
    }
    return out;
}

/// Unique scratch directory removed on destruction.
class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("cmfda_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
