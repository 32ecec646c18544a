// SPDX-License-Identifier: Apache-2.0
//
// Dataset manifests. A manifest is a flat text file next to the data:
//
//   # fovseg dataset manifest
//   version 1
//   classes <K>
//   item <split> <image file> <label file>
//
// Paths are relative to the manifest location. Splits are train/val/test.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "fovseg/image.hpp"
#include "fovseg/patch.hpp"

namespace fovseg {

struct DatasetItem {
    std::string id;
    std::string image_path;
    std::string label_path;
    std::shared_ptr<ImageSource> image;
    std::shared_ptr<LabelMap> labels;
    std::shared_ptr<ImageTensor> lowres;  // cached at the spec's lowres rate
};

struct Dataset {
    int classes = 0;
    std::vector<DatasetItem> items;
};

// Loads one split; lowres versions are computed once at load time.
Dataset load_dataset(const std::string& manifest_path, const std::string& split,
                     const PatchSpec& spec);

// In-memory dataset construction (tests, synthetic pipelines).
DatasetItem make_dataset_item(std::string id, ImageTensor image, LabelMap labels,
                              const PatchSpec& spec);

}  // namespace fovseg
