#pragma once

#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "cmfda/core.hpp"

namespace cmfda {

// Space-time cube geometry: 5x5 km squares (25 per site) crossed with
// five-day periods of the year (73, the last one spanning days 361-366).
inline constexpr int kSquareSide = 5;
inline constexpr int kSquaresPerSite = (kSiteSide / kSquareSide) * (kSiteSide / kSquareSide);
inline constexpr int kPeriodDays = 5;
inline constexpr int kPeriodCount = 73;

struct CubeIndex {
    int square = 0;  ///< 0..24, row-major over the 5x5 squares
    int period = 0;  ///< 0..72

    auto operator<=>(const CubeIndex&) const = default;
};

/// Period index 0..72 of a day of year. Throws OutOfRangeDay.
int period_of_day(int doy);
/// Throws OutOfRange for a grid index outside 0..24 or a day outside 1..366.
CubeIndex cube_of(int col, int row, int doy);

/// Symmetric 2x2 covariance of (NIR error, NDVI error).
struct Cov2 {
    double s22 = 0.0;  ///< NIR variance
    double s28 = 0.0;  ///< covariance
    double s88 = 0.0;  ///< NDVI variance
    long n = 0;        ///< pairs behind the estimate

    bool operator==(const Cov2&) const = default;
};

/// sqrt(eᵀ Σ⁻¹ e) for e = (eps_nir, eps_ndvi). Throws SingularCovariance
/// unless sigma is positive definite.
double mahalanobis_index(double eps_nir, double eps_ndvi, const Cov2& sigma);

struct CovarianceRecord {
    std::string site_id;
    int col = 0;
    int row = 0;
    int doy = 1;
    double eps_nir = 0.0;
    double eps_ndvi = 0.0;
};

struct CovarianceOptions {
    long min_cube_n = 10;
};

/// Regularized covariance per (site, square, period). Cubes with too few
/// pairs hold the site-period estimate, then the site-wide estimate, then
/// the estimate pooled over every site.
class CubeCovarianceTable {
public:
    using Key = std::tuple<std::string, int, int>;  // site, square, period

    /// Resolved matrix for a pixel and day. Unseen sites use the pooled
    /// estimate. Throws UnknownKey when the table is empty.
    const Cov2& lookup(const std::string& site_id, int col, int row, int doy) const;
    const Cov2& at(const Key& key) const;

    const std::map<Key, Cov2>& entries() const noexcept { return cubes_; }
    const Cov2& pooled() const noexcept { return pooled_; }
    bool empty() const noexcept { return cubes_.empty() && pooled_.n == 0; }

    /// Rebuild from serialized entries.
    static CubeCovarianceTable from_entries(std::map<Key, Cov2> cubes, Cov2 pooled);

private:
    friend CubeCovarianceTable estimate_cube_covariances(std::span<const CovarianceRecord>, const CovarianceOptions&);
    std::map<Key, Cov2> cubes_;
    Cov2 pooled_;
};

/// Sample covariance (n-1 denominator) with a ridge of 1e-8·trace/2 added
/// to the diagonal (1e-12 when the trace is zero).
Cov2 regularized_covariance(std::span<const std::pair<double, double>> pairs);

CubeCovarianceTable estimate_cube_covariances(std::span<const CovarianceRecord> records,
                                              const CovarianceOptions& opts = {});

}  // namespace cmfda
