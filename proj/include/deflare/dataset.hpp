#pragma once

#include <string>

#include "deflare/synthesis.hpp"

namespace deflare {

// On-disk layout:
//   <root>/{input,gt,flare,mask_glare,mask_streak,mask_light}/NNNNNN.png
//   <root>/meta/NNNNNN.json   (seed and sampled augmentation parameters)
std::string sample_image_name(int index);

void write_sample(const std::string& root, int index, const CompositeSample& s);

struct LoadedSample {
    Tensor input, gt, flare;
    Tensor mask_glare, mask_streak, mask_light;  // 1 x H x W binary
};

LoadedSample load_sample(const std::string& root, int index);

// Number of consecutive indices present, validated across all subdirectories.
// Throws listing every missing file if the layout is inconsistent or empty.
int validate_dataset(const std::string& root);

}  // namespace deflare
