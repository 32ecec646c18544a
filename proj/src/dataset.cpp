// SPDX-License-Identifier: Apache-2.0

#include "fovseg/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fovseg {

namespace fs = std::filesystem;

Dataset load_dataset(const std::string& manifest_path, const std::string& split,
                     const PatchSpec& spec) {
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open manifest: " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    Dataset data;
    std::string line;
    bool saw_version = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string key;
        ss >> key;
        if (key == "version") {
            int v = 0;
            ss >> v;
            if (v != 1) throw IoError("unsupported manifest version: " + manifest_path);
            saw_version = true;
        } else if (key == "classes") {
            ss >> data.classes;
        } else if (key == "item") {
            std::string item_split, image_file, label_file;
            ss >> item_split >> image_file >> label_file;
            if (!ss) throw IoError("malformed manifest item: " + line);
            if (item_split != split) continue;
            DatasetItem item;
            item.image_path = (base / image_file).string();
            item.label_path = (base / label_file).string();
            item.id = fs::path(image_file).stem().string();
            item.image = std::shared_ptr<ImageSource>(open_image_source(item.image_path));
            item.labels = std::make_shared<LabelMap>(load_label_png(item.label_path));
            FOV_CONFIG_REQUIRE(item.labels->height == item.image->height() &&
                                   item.labels->width == item.image->width(),
                               "labels not aligned with image: " + item.label_path);
            ImageTensor full(item.image->height(), item.image->width(), item.image->channels());
            item.image->read_region(0, 0, full.height, full.width, full.values.data());
            item.lowres = std::make_shared<ImageTensor>(make_lowres(full, spec.lowres_rate));
            data.items.push_back(std::move(item));
        }
    }
    if (!saw_version) throw IoError("not a dataset manifest: " + manifest_path);
    FOV_CONFIG_REQUIRE(data.classes >= 2, "manifest missing class count: " + manifest_path);
    return data;
}

DatasetItem make_dataset_item(std::string id, ImageTensor image, LabelMap labels,
                              const PatchSpec& spec) {
    DatasetItem item;
    item.id = std::move(id);
    item.lowres = std::make_shared<ImageTensor>(make_lowres(image, spec.lowres_rate));
    item.labels = std::make_shared<LabelMap>(std::move(labels));
    item.image = std::make_shared<MemoryImage>(std::move(image));
    return item;
}

}  // namespace fovseg
