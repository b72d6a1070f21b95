#include "cmfda/indices.hpp"

#include "cmfda/error.hpp"

namespace cmfda {

double ndvi(double red, double nir) {
    const double denom = nir + red;
    if (denom == 0.0) throw Error(ErrorCode::DegenerateInput, "ndvi: red + nir == 0");
    return (nir - red) / denom;
}

double evi(double red, double nir, double blue, const EviParams& params) {
    const double denom = blue < kEviBlueCutoff ? nir + params.c1 * red - params.c2 * blue + params.canopy
                                               : nir + 2.4 * red + params.canopy;
    if (denom == 0.0) throw Error(ErrorCode::DegenerateInput, "evi: zero denominator");
    return params.gain * (nir - red) / denom;
}

}  // namespace cmfda
