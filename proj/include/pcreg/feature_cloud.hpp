#pragma once

#include <stdexcept>

#include "pcreg/cloud.hpp"
#include "pcreg/kdtree.hpp"

namespace pcreg {

enum class Modality { visual, geometric };

inline const char* to_string(Modality m) {
    return m == Modality::visual ? "visual" : "geometric";
}

/// Per-point descriptors over one (voxelized) cloud; feature row i describes
/// point i of `cloud` when the cloud is populated.
struct FeatureCloud {
    PointCloud cloud;
    PointMatrix features;
    Modality modality = Modality::geometric;

    int size() const { return static_cast<int>(features.rows()); }
    int dim() const { return static_cast<int>(features.cols()); }

    void validate() const {
        if (!cloud.positions.empty() && cloud.size() != size())
            throw std::invalid_argument("feature cloud: feature count does not match cloud size");
    }
};

}  // namespace pcreg
