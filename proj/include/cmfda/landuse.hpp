#pragma once

#include <string>
#include <vector>

#include "cmfda/core.hpp"

namespace cmfda {

inline constexpr int kFineSide = 100;        ///< 250 m cells per site edge
inline constexpr int kFinePerCoarse = 4;     ///< fine cells per 1 km cell edge
inline constexpr int kMinLanduseClass = 1;
inline constexpr int kMaxLanduseClass = 19;

/// Classes 1..6 are the forest classes of the land-cover legend.
inline bool is_forest_class(int cls) noexcept { return cls >= 1 && cls <= 6; }

inline constexpr int kClassWater = 18;
inline constexpr int kClassCropland = 15;
inline constexpr int kClassUrban = 17;

/// Land-use classes of one site at 250 m, one grid per epoch.
class LanduseFineGrid {
public:
    LanduseFineGrid() = default;
    /// Row-major classes; throws ShapeMismatch unless rows*cols match and
    /// InvalidValue for a class outside 1..19.
    LanduseFineGrid(int epoch, int cols, int rows, std::vector<int> classes);
    /// Uniform 100x100 grid.
    static LanduseFineGrid filled(int epoch, int cls);

    int epoch() const noexcept { return epoch_; }
    int cols() const noexcept { return cols_; }
    int rows() const noexcept { return rows_; }
    int at(int col, int row) const;
    void set(int col, int row, int cls);

private:
    int epoch_ = 0;
    int cols_ = 0;
    int rows_ = 0;
    std::vector<int> classes_;
};

/// Counts, per 1 km cell, the 250 m cells that were forest at t0 and are not
/// forest at t1. Labels are row-major over the 25x25 grid. Throws
/// ShapeMismatch unless both grids are 100x100.
std::vector<DeforestationLabel> aggregate_labels(const std::string& site_id, const LanduseFineGrid& t0,
                                                 const LanduseFineGrid& t1);

}  // namespace cmfda
