#include "cmfda/covariance.hpp"

#include <cmath>

#include "cmfda/small_linalg.hpp"

namespace cmfda {

int period_of_day(int doy) {
    if (doy < 1 || doy > kYearLength)
        throw Error(ErrorCode::OutOfRangeDay, "day of year " + std::to_string(doy) + " outside 1..366");
    return std::min((doy - 1) / kPeriodDays, kPeriodCount - 1);
}

CubeIndex cube_of(int col, int row, int doy) {
    if (col < 0 || col >= kSiteSide || row < 0 || row >= kSiteSide)
        throw Error(ErrorCode::OutOfRange,
                    "grid index (" + std::to_string(col) + ", " + std::to_string(row) + ") outside 0..24");
    if (doy < 1 || doy > kYearLength)
        throw Error(ErrorCode::OutOfRange, "day of year " + std::to_string(doy) + " outside 1..366");
    const int squares_per_row = kSiteSide / kSquareSide;
    return {(row / kSquareSide) * squares_per_row + col / kSquareSide, period_of_day(doy)};
}

double mahalanobis_index(double eps_nir, double eps_ndvi, const Cov2& sigma) {
    const linalg::Matrix<2> m{sigma.s22, sigma.s28, sigma.s28, sigma.s88};
    const auto l = linalg::cholesky<2>(m);
    if (!l) throw Error(ErrorCode::SingularCovariance, "covariance matrix is not positive definite");
    // Forward substitution only: |L⁻¹e|² = eᵀΣ⁻¹e.
    const double y1 = eps_nir / (*l)[0];
    const double y2 = (eps_ndvi - (*l)[2] * y1) / (*l)[3];
    return std::sqrt(y1 * y1 + y2 * y2);
}

Cov2 regularized_covariance(std::span<const std::pair<double, double>> pairs) {
    Cov2 c;
    c.n = static_cast<long>(pairs.size());
    if (pairs.size() >= 2) {
        double m2 = 0.0, m8 = 0.0;
        for (auto [a, b] : pairs) {
            m2 += a;
            m8 += b;
        }
        m2 /= static_cast<double>(pairs.size());
        m8 /= static_cast<double>(pairs.size());
        for (auto [a, b] : pairs) {
            c.s22 += (a - m2) * (a - m2);
            c.s28 += (a - m2) * (b - m8);
            c.s88 += (b - m8) * (b - m8);
        }
        const double denom = static_cast<double>(pairs.size() - 1);
        c.s22 /= denom;
        c.s28 /= denom;
        c.s88 /= denom;
    }
    const double trace = c.s22 + c.s88;
    const double ridge = trace > 0.0 ? 1e-8 * trace / 2.0 : 1e-12;
    c.s22 += ridge;
    c.s88 += ridge;
    return c;
}

CubeCovarianceTable estimate_cube_covariances(std::span<const CovarianceRecord> records,
                                              const CovarianceOptions& opts) {
    using Pairs = std::vector<std::pair<double, double>>;
    std::map<std::string, std::map<CubeIndex, Pairs>> by_cube;
    std::map<std::string, std::map<int, Pairs>> by_site_period;
    std::map<std::string, Pairs> by_site;
    Pairs pooled;

    for (const auto& r : records) {
        const CubeIndex cube = cube_of(r.col, r.row, r.doy);
        const std::pair<double, double> e{r.eps_nir, r.eps_ndvi};
        by_cube[r.site_id][cube].push_back(e);
        by_site_period[r.site_id][cube.period].push_back(e);
        by_site[r.site_id].push_back(e);
        pooled.push_back(e);
    }

    CubeCovarianceTable table;
    table.pooled_ = regularized_covariance(pooled);
    for (const auto& [site, site_pairs] : by_site) {
        const Cov2 site_cov = site_pairs.size() >= 2 ? regularized_covariance(site_pairs) : table.pooled_;
        std::map<int, Cov2> period_cov;
        for (const auto& [period, pairs] : by_site_period[site]) {
            if (static_cast<long>(pairs.size()) >= opts.min_cube_n) period_cov[period] = regularized_covariance(pairs);
        }
        const auto& cubes = by_cube[site];
        for (int square = 0; square < kSquaresPerSite; ++square) {
            for (int period = 0; period < kPeriodCount; ++period) {
                Cov2 resolved = site_cov;
                if (auto it = cubes.find({square, period});
                    it != cubes.end() && static_cast<long>(it->second.size()) >= opts.min_cube_n) {
                    resolved = regularized_covariance(it->second);
                } else if (auto pit = period_cov.find(period); pit != period_cov.end()) {
                    resolved = pit->second;
                }
                table.cubes_.emplace(CubeCovarianceTable::Key{site, square, period}, resolved);
            }
        }
    }
    return table;
}

const Cov2& CubeCovarianceTable::lookup(const std::string& site_id, int col, int row, int doy) const {
    const CubeIndex cube = cube_of(col, row, doy);
    if (auto it = cubes_.find(Key{site_id, cube.square, cube.period}); it != cubes_.end()) return it->second;
    if (pooled_.n == 0) throw Error(ErrorCode::UnknownKey, "covariance table has no entry for site " + site_id);
    return pooled_;
}

const Cov2& CubeCovarianceTable::at(const Key& key) const {
    auto it = cubes_.find(key);
    if (it == cubes_.end()) throw Error(ErrorCode::UnknownKey, "no covariance for site " + std::get<0>(key));
    return it->second;
}

CubeCovarianceTable CubeCovarianceTable::from_entries(std::map<Key, Cov2> cubes, Cov2 pooled) {
    CubeCovarianceTable t;
    t.cubes_ = std::move(cubes);
    t.pooled_ = pooled;
    return t;
}

}  // namespace cmfda
