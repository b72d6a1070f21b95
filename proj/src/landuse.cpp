#include "cmfda/landuse.hpp"

namespace cmfda {

namespace {

void check_class(int cls) {
    if (cls < kMinLanduseClass || cls > kMaxLanduseClass)
        throw Error(ErrorCode::InvalidValue, "land-use class " + std::to_string(cls) + " outside 1..19");
}

}  // namespace

LanduseFineGrid::LanduseFineGrid(int epoch, int cols, int rows, std::vector<int> classes)
    : epoch_(epoch), cols_(cols), rows_(rows), classes_(std::move(classes)) {
    if (cols < 0 || rows < 0 || classes_.size() != static_cast<std::size_t>(cols) * static_cast<std::size_t>(rows))
        throw Error(ErrorCode::ShapeMismatch, "land-use grid size does not match its dimensions");
    for (int c : classes_) check_class(c);
}

LanduseFineGrid LanduseFineGrid::filled(int epoch, int cls) {
    return {epoch, kFineSide, kFineSide, std::vector<int>(kFineSide * kFineSide, cls)};
}

int LanduseFineGrid::at(int col, int row) const {
    if (col < 0 || col >= cols_ || row < 0 || row >= rows_) throw Error(ErrorCode::OutOfRange, "fine grid index out of range");
    return classes_[static_cast<std::size_t>(row * cols_ + col)];
}

void LanduseFineGrid::set(int col, int row, int cls) {
    if (col < 0 || col >= cols_ || row < 0 || row >= rows_) throw Error(ErrorCode::OutOfRange, "fine grid index out of range");
    check_class(cls);
    classes_[static_cast<std::size_t>(row * cols_ + col)] = cls;
}

std::vector<DeforestationLabel> aggregate_labels(const std::string& site_id, const LanduseFineGrid& t0,
                                                 const LanduseFineGrid& t1) {
    for (const auto* g : {&t0, &t1}) {
        if (g->cols() != kFineSide || g->rows() != kFineSide)
            throw Error(ErrorCode::ShapeMismatch, "land-use grids must be 100x100");
    }
    std::vector<DeforestationLabel> labels;
    labels.reserve(kSitePixels);
    for (int row = 0; row < kSiteSide; ++row) {
        for (int col = 0; col < kSiteSide; ++col) {
            int count = 0;
            for (int r = row * kFinePerCoarse; r < (row + 1) * kFinePerCoarse; ++r)
                for (int c = col * kFinePerCoarse; c < (col + 1) * kFinePerCoarse; ++c)
                    count += is_forest_class(t0.at(c, r)) && !is_forest_class(t1.at(c, r));
            labels.push_back({make_pixel_id(site_id, col, row), col, row, count, count >= 1});
        }
    }
    return labels;
}

}  // namespace cmfda
