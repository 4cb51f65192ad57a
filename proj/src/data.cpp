#include "medusa/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "medusa/checkpoint.hpp"
#include "medusa/errors.hpp"

namespace medusa {
namespace {

struct ShapeInst {
    int cls = 0;
    bool ellipse = false;
    double cx = 0, cy = 0, rx = 0, ry = 0;
    double base = 0, gx = 0, gy = 0;  // depth plane: base + gx*(x-cx) + gy*(y-cy)

    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        if (ellipse) return (dx * dx) / (rx * rx) + (dy * dy) / (ry * ry) <= 1.0;
        return std::abs(dx) <= rx && std::abs(dy) <= ry;
    }
    double depth_at(double x, double y) const { return base + gx * (x - cx) + gy * (y - cy); }
};

constexpr double kPalette[kNumClasses][3] = {
    {0.35, 0.35, 0.35},  // background
    {0.90, 0.20, 0.20},
    {0.20, 0.90, 0.20},
    {0.25, 0.35, 0.95},
    {0.90, 0.85, 0.20},
};

// fixed light direction, normalized once
const double kLightNorm = std::sqrt(0.4 * 0.4 + 0.3 * 0.3 + 0.85 * 0.85);
const double kLight[3] = {0.4 / kLightNorm, -0.3 / kLightNorm, 0.85 / kLightNorm};

}  // namespace

void SceneSpec::validate() const {
    if (image_size < 8) throw ValueError("scene spec: image_size too small");
    if (min_shapes < 0 || max_shapes < min_shapes || max_shapes > kNumClasses - 1)
        throw ValueError("scene spec: shape count range must satisfy 0 <= min <= max <= " +
                         std::to_string(kNumClasses - 1));
    if (noise < 0.0 || noise > 0.1) throw ValueError("scene spec: noise outside [0, 0.1]");
}

std::string SceneSpec::kv_text() const {
    std::ostringstream os;
    os << "seed=" << seed << "\nimage_size=" << image_size << "\nmin_shapes=" << min_shapes
       << "\nmax_shapes=" << max_shapes << "\nnoise=" << noise << "\n";
    return os.str();
}

Sample generate_sample(const SceneSpec& spec, int index) {
    spec.validate();
    if (index < 0) throw ValueError("sample index must be >= 0");
    Rng rng(mix_seed(spec.seed, 0x5a0d5a0dULL + std::uint64_t(index)));
    const int S = spec.image_size;
    const std::size_t px = std::size_t(S) * S;

    const int n_shapes = rng.uniform_int(spec.min_shapes, spec.max_shapes);
    int class_pool[kNumClasses - 1];
    for (int i = 0; i < kNumClasses - 1; ++i) class_pool[i] = i + 1;
    for (int i = kNumClasses - 2; i > 0; --i) std::swap(class_pool[i], class_pool[rng.uniform_int(0, i)]);

    // One depth band per shape inside (0.15, 0.95); band 0 is nearest. The
    // tilt is bounded so each shape's depth stays inside its band, which
    // keeps instance depth ranges strictly separated.
    std::vector<ShapeInst> shapes(n_shapes);
    const double span_lo = 0.15, span_hi = 0.95;
    const double bw = n_shapes > 0 ? (span_hi - span_lo) / n_shapes : 0.0;
    for (int i = 0; i < n_shapes; ++i) {
        ShapeInst& sh = shapes[i];
        sh.cls = class_pool[i];
        sh.ellipse = rng.uniform_int(0, 1) == 1;
        sh.cx = rng.uniform(0.2, 0.8) * S;
        sh.cy = rng.uniform(0.2, 0.8) * S;
        sh.rx = rng.uniform(0.10, 0.28) * S;
        sh.ry = rng.uniform(0.10, 0.28) * S;
        const double lo = span_lo + i * bw;
        sh.base = rng.uniform(lo + 0.35 * bw, lo + 0.65 * bw);
        const double slope = 0.3 * bw / (sh.rx + sh.ry);
        sh.gx = rng.uniform(-slope, slope);
        sh.gy = rng.uniform(-slope, slope);
    }

    Sample s;
    s.size = S;
    s.image.assign(3 * px, 0.0);
    s.depth.assign(px, kFarPlane);
    s.segm.assign(px, 0);
    s.edges.assign(px, 0.0);
    s.normals.assign(3 * px, 0.0);
    s.saliency.assign(px, 0.0);
    s.parts.assign(px, 0);

    std::vector<int> instance(px, -1);
    for (std::size_t p = 0; p < px; ++p) s.normals[2 * px + p] = 1.0;  // background faces camera

    // painter's algorithm, far shapes first
    for (int i = n_shapes - 1; i >= 0; --i) {
        const ShapeInst& sh = shapes[i];
        for (int y = 0; y < S; ++y) {
            for (int x = 0; x < S; ++x) {
                if (!sh.contains(x, y)) continue;
                const std::size_t p = std::size_t(y) * S + x;
                s.depth[p] = sh.depth_at(x, y);
                s.segm[p] = sh.cls;
                instance[p] = i;
                const double norm = std::sqrt(sh.gx * sh.gx + sh.gy * sh.gy + 1.0);
                s.normals[0 * px + p] = -sh.gx / norm;
                s.normals[1 * px + p] = -sh.gy / norm;
                s.normals[2 * px + p] = 1.0 / norm;
                s.parts[p] = y < sh.cy ? 2 * sh.cls - 1 : 2 * sh.cls;
            }
        }
    }

    // edges: any 4-neighbor with a different class
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            const std::size_t p = std::size_t(y) * S + x;
            const int c = s.segm[p];
            const bool e = (x > 0 && s.segm[p - 1] != c) || (x + 1 < S && s.segm[p + 1] != c) ||
                           (y > 0 && s.segm[p - S] != c) || (y + 1 < S && s.segm[p + S] != c);
            s.edges[p] = e ? 1.0 : 0.0;
        }
    }

    // nearest shape is band 0 and is never occluded
    if (n_shapes > 0) {
        for (std::size_t p = 0; p < px; ++p) s.saliency[p] = instance[p] == 0 ? 1.0 : 0.0;
    }

    // Lambertian shading of a per-class base color, darkened with depth so
    // the image determines all labels up to noise.
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            const std::size_t p = std::size_t(y) * S + x;
            const double lambert = std::max(
                0.0, s.normals[p] * kLight[0] + s.normals[px + p] * kLight[1] +
                         s.normals[2 * px + p] * kLight[2]);
            const double shade = 0.35 + 0.45 * lambert + 0.2 * (1.0 - s.depth[p]);
            for (int ch = 0; ch < 3; ++ch) {
                double v = kPalette[s.segm[p]][ch] * shade;
                v += rng.uniform(-spec.noise, spec.noise);
                s.image[std::size_t(ch) * px + p] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return s;
}

void validate_sample(const Sample& s) {
    const int S = s.size;
    const std::size_t px = std::size_t(S) * S;
    auto fail = [](const std::string& why) { throw DataError("sample invariant violated: " + why); };

    if (s.image.size() != 3 * px || s.depth.size() != px || s.segm.size() != px ||
        s.edges.size() != px || s.normals.size() != 3 * px || s.saliency.size() != px ||
        s.parts.size() != px)
        fail("field sizes inconsistent with image size");

    for (std::size_t p = 0; p < px; ++p) {
        if (s.segm[p] < 0 || s.segm[p] >= kNumClasses) fail("segmentation class out of range");
        if (s.parts[p] < 0 || s.parts[p] >= kNumParts) fail("part id out of range");
        if (s.edges[p] != 0.0 && s.edges[p] != 1.0) fail("edge map not binary");
        if (s.saliency[p] != 0.0 && s.saliency[p] != 1.0) fail("saliency map not binary");
        if (s.segm[p] == 0) {
            if (s.depth[p] != kFarPlane) fail("background depth must be the far plane");
        } else {
            if (s.depth[p] <= 0.1 || s.depth[p] >= 1.0) fail("shape depth outside (0.1, 1.0)");
        }
        const double nx = s.normals[p], ny = s.normals[px + p], nz = s.normals[2 * px + p];
        if (std::abs(std::sqrt(nx * nx + ny * ny + nz * nz) - 1.0) > 1e-6)
            fail("normal not unit length");
    }
    for (std::size_t p = 0; p < 3 * px; ++p)
        if (s.image[p] < 0.0 || s.image[p] > 1.0) fail("image value outside [0, 1]");

    // edges must equal the 4-neighbor disagreement mask of the segmentation
    for (int y = 0; y < S; ++y) {
        for (int x = 0; x < S; ++x) {
            const std::size_t p = std::size_t(y) * S + x;
            const int c = s.segm[p];
            const bool e = (x > 0 && s.segm[p - 1] != c) || (x + 1 < S && s.segm[p + 1] != c) ||
                           (y > 0 && s.segm[p - S] != c) || (y + 1 < S && s.segm[p + S] != c);
            if (s.edges[p] != (e ? 1.0 : 0.0)) fail("edges disagree with segmentation");
        }
    }

    // parts: class consistency plus a horizontal top/bottom split per class
    for (int c = 1; c < kNumClasses; ++c) {
        int top_max = -1, bot_min = S;
        for (int y = 0; y < S; ++y) {
            for (int x = 0; x < S; ++x) {
                const std::size_t p = std::size_t(y) * S + x;
                if (s.segm[p] == c) {
                    if (s.parts[p] != 2 * c - 1 && s.parts[p] != 2 * c)
                        fail("part id inconsistent with class");
                    if (s.parts[p] == 2 * c - 1) top_max = std::max(top_max, y);
                    else bot_min = std::min(bot_min, y);
                } else if (s.parts[p] == 2 * c - 1 || s.parts[p] == 2 * c) {
                    fail("part id present outside its class");
                }
            }
        }
        if (top_max >= bot_min) fail("part halves are not split by a horizontal line");
    }

    // saliency: the full footprint of the class owning the globally nearest
    // pixel (shape depth bands are disjoint, so that class is unoccluded)
    bool any_fg = false;
    double min_depth = kFarPlane;
    std::size_t argmin = 0;
    for (std::size_t p = 0; p < px; ++p) {
        if (s.segm[p] != 0) any_fg = true;
        if (s.depth[p] < min_depth) {
            min_depth = s.depth[p];
            argmin = p;
        }
    }
    if (!any_fg) {
        for (std::size_t p = 0; p < px; ++p)
            if (s.saliency[p] != 0.0) fail("saliency nonzero in an empty scene");
    } else {
        const int nearest_cls = s.segm[argmin];
        if (nearest_cls == 0) fail("nearest pixel is background in a non-empty scene");
        double max_sal_depth = 0.0, min_other_depth = kFarPlane;
        for (std::size_t p = 0; p < px; ++p) {
            const bool expect = s.segm[p] == nearest_cls;
            if (s.saliency[p] != (expect ? 1.0 : 0.0)) fail("saliency is not the nearest shape's mask");
            if (expect) max_sal_depth = std::max(max_sal_depth, s.depth[p]);
            else if (s.segm[p] != 0) min_other_depth = std::min(min_other_depth, s.depth[p]);
        }
        if (max_sal_depth >= min_other_depth) fail("salient shape is not strictly nearest");
    }

    // normals must match the depth plane: central differences inside a class
    // region recover the plane gradient exactly
    for (int y = 1; y + 1 < S; ++y) {
        for (int x = 1; x + 1 < S; ++x) {
            const std::size_t p = std::size_t(y) * S + x;
            const int c = s.segm[p];
            if (s.segm[p - 1] != c || s.segm[p + 1] != c || s.segm[p - S] != c || s.segm[p + S] != c)
                continue;
            const double gx = (s.depth[p + 1] - s.depth[p - 1]) / 2.0;
            const double gy = (s.depth[p + S] - s.depth[p - S]) / 2.0;
            const double norm = std::sqrt(gx * gx + gy * gy + 1.0);
            if (std::abs(-gx / norm - s.normals[p]) > 1e-6 ||
                std::abs(-gy / norm - s.normals[px + p]) > 1e-6 ||
                std::abs(1.0 / norm - s.normals[2 * px + p]) > 1e-6)
                fail("normals disagree with the depth plane");
        }
    }
}

Dataset::Dataset(const SceneSpec& spec, int n_train, int n_val, int n_test)
    : spec_(spec), n_train_(n_train), n_val_(n_val), n_test_(n_test) {
    spec_.validate();
    if (n_train < 1 || n_val < 1 || n_test < 1)
        throw ValueError("dataset: split sizes must be positive");
    if (const char* dir = std::getenv("MEDUSA_DATA_CACHE")) cache_dir_ = dir;
}

int Dataset::check(int i, int n) {
    if (i < 0 || i >= n) throw ValueError("dataset: index out of range");
    return i;
}

Sample Dataset::by_split(const std::string& split, int i) const {
    if (split == "train") return train(i);
    if (split == "val") return val(i);
    if (split == "test") return test(i);
    throw ValueError("unknown split: " + split);
}

int Dataset::split_size(const std::string& split) const {
    if (split == "train") return n_train_;
    if (split == "val") return n_val_;
    if (split == "test") return n_test_;
    throw ValueError("unknown split: " + split);
}

Sample Dataset::fetch(int global_index) const {
    if (cache_dir_.empty()) return generate_sample(spec_, global_index);

    const std::string key = std::to_string(hash_string(spec_.kv_text()));
    const std::filesystem::path path =
        std::filesystem::path(cache_dir_) / ("sample_" + key + "_" + std::to_string(global_index) + ".bin");
    if (std::filesystem::exists(path)) {
        const Archive a = Archive::load(path.string());
        Sample s;
        auto get = [&](const char* name) -> const std::vector<double>& {
            const ArchiveEntry* e = a.find(name);
            if (!e) throw CheckpointError(std::string("cache file missing field ") + name);
            return e->data;
        };
        s.image = get("image");
        s.depth = get("depth");
        s.edges = get("edges");
        s.normals = get("normals");
        s.saliency = get("saliency");
        const auto& segm = get("segm");
        const auto& parts = get("parts");
        s.size = int(std::sqrt(double(s.depth.size())) + 0.5);
        s.segm.assign(segm.begin(), segm.end());
        s.parts.assign(parts.begin(), parts.end());
        return s;
    }

    Sample s = generate_sample(spec_, global_index);
    Archive a;
    a.metadata = spec_.kv_text();
    const int S = s.size;
    auto dump = [&](const char* name, const std::vector<double>& v, int ch) {
        a.entries.push_back({name, ch > 1 ? std::vector<int>{ch, S, S} : std::vector<int>{S, S}, v});
    };
    dump("image", s.image, 3);
    dump("depth", s.depth, 1);
    dump("segm", std::vector<double>(s.segm.begin(), s.segm.end()), 1);
    dump("edges", s.edges, 1);
    dump("normals", s.normals, 3);
    dump("saliency", s.saliency, 1);
    dump("parts", std::vector<double>(s.parts.begin(), s.parts.end()), 1);
    std::filesystem::create_directories(cache_dir_);
    a.save(path.string());
    return s;
}

}  // namespace medusa
