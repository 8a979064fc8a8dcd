#include "deflare/dataset.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "deflare/image_io.hpp"

namespace fs = std::filesystem;

namespace deflare {

namespace {

const char* kImageDirs[] = {"input",       "gt",          "flare",
                            "mask_glare",  "mask_streak", "mask_light"};

Tensor to_binary_mask(const Tensor& rgb) {
    Tensor m(1, rgb.h, rgb.w);
    const size_t plane = static_cast<size_t>(rgb.h) * rgb.w;
    for (size_t i = 0; i < plane; ++i) m.v[i] = rgb.v[i] > 0.5 ? 1.0 : 0.0;
    return m;
}

}  // namespace

std::string sample_image_name(int index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d.png", index);
    return buf;
}

void write_sample(const std::string& root, int index, const CompositeSample& s) {
    for (const char* d : kImageDirs) fs::create_directories(fs::path(root) / d);
    fs::create_directories(fs::path(root) / "meta");

    const std::string name = sample_image_name(index);
    write_png((fs::path(root) / "input" / name).string(), s.input);
    write_png((fs::path(root) / "gt" / name).string(), s.reference);
    write_png((fs::path(root) / "flare" / name).string(), s.flare);
    write_png((fs::path(root) / "mask_glare" / name).string(), s.mask_glare);
    write_png((fs::path(root) / "mask_streak" / name).string(), s.mask_streak);
    write_png((fs::path(root) / "mask_light" / name).string(), s.mask_light);

    nlohmann::json meta;
    meta["seed"] = s.seed;
    meta["params"] = {
        {"gamma", s.params.gamma},
        {"rotation", s.params.rotation},
        {"translate_x", s.params.translate_x},
        {"translate_y", s.params.translate_y},
        {"shear", s.params.shear},
        {"scale", s.params.scale},
        {"blur_sigma", s.params.blur_sigma},
        {"flip", s.params.flip},
        {"color_shift", s.params.color_shift},
        {"bg_rgb_scale", s.params.bg_rgb_scale},
        {"noise_var", s.params.noise_var},
    };
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%06d.json", index);
    std::ofstream out(fs::path(root) / "meta" / buf);
    if (!out) throw std::runtime_error("write_sample: cannot write meta for " + name);
    out << meta.dump(2) << "\n";
}

LoadedSample load_sample(const std::string& root, int index) {
    const std::string name = sample_image_name(index);
    LoadedSample s;
    s.input = read_png((fs::path(root) / "input" / name).string());
    s.gt = read_png((fs::path(root) / "gt" / name).string());
    s.flare = read_png((fs::path(root) / "flare" / name).string());
    s.mask_glare = to_binary_mask(read_png((fs::path(root) / "mask_glare" / name).string()));
    s.mask_streak =
        to_binary_mask(read_png((fs::path(root) / "mask_streak" / name).string()));
    s.mask_light =
        to_binary_mask(read_png((fs::path(root) / "mask_light" / name).string()));
    return s;
}

int validate_dataset(const std::string& root) {
    if (!fs::is_directory(root))
        throw std::invalid_argument("dataset: " + root + " is not a directory");
    int n = 0;
    while (fs::exists(fs::path(root) / "input" / sample_image_name(n))) ++n;
    if (n == 0)
        throw std::invalid_argument("dataset: no input/000000.png under " + root);

    std::string missing;
    for (int i = 0; i < n; ++i) {
        const std::string name = sample_image_name(i);
        for (const char* d : kImageDirs) {
            fs::path p = fs::path(root) / d / name;
            if (!fs::exists(p)) missing += "\n  " + p.string();
        }
        char buf[16];
        std::snprintf(buf, sizeof(buf), "%06d.json", i);
        fs::path p = fs::path(root) / "meta" / buf;
        if (!fs::exists(p)) missing += "\n  " + p.string();
    }
    if (!missing.empty())
        throw std::invalid_argument("dataset: missing files:" + missing);
    return n;
}

}  // namespace deflare
