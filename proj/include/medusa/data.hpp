#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "medusa/rng.hpp"

namespace medusa {

// Procedural scenes: a handful of axis-aligned rectangles and ellipses on
// tilted depth planes, composited back to front. Every shape in a scene has
// a distinct class and its own depth band, so all six label maps are
// mutually consistent and recoverable from each other.
constexpr int kNumClasses = 5;  // background + 4 shape classes
constexpr int kNumParts = 2 * kNumClasses - 1;
constexpr double kFarPlane = 1.0;

struct SceneSpec {
    std::uint64_t seed = 1;
    int image_size = 64;
    int min_shapes = 1;
    int max_shapes = 4;  // one shape per class at most
    double noise = 0.02;

    void validate() const;
    std::string kv_text() const;
};

struct Sample {
    int size = 0;
    std::vector<double> image;     // 3 x S x S, values in [0, 1]
    std::vector<double> depth;     // S x S, background at the far plane
    std::vector<int> segm;         // S x S class ids
    std::vector<double> edges;     // S x S in {0, 1}
    std::vector<double> normals;   // 3 x S x S, unit per pixel
    std::vector<double> saliency;  // S x S in {0, 1}, nearest shape's mask
    std::vector<int> parts;        // S x S part ids (top/bottom halves)
};

// Deterministic in (spec.seed, index).
Sample generate_sample(const SceneSpec& spec, int index);

// Re-derives edges from segmentation, saliency from segmentation + depth,
// and normals from depth-plane finite differences; throws DataError with a
// reason when any invariant fails.
void validate_sample(const Sample& s);

// Disjoint index ranges over one generator stream; honors the
// MEDUSA_DATA_CACHE directory when set (regeneration is bit-identical to
// the cached files).
class Dataset {
  public:
    Dataset(const SceneSpec& spec, int n_train, int n_val, int n_test);

    Sample train(int i) const { return fetch(check(i, n_train_)); }
    Sample val(int i) const { return fetch(n_train_ + check(i, n_val_)); }
    Sample test(int i) const { return fetch(n_train_ + n_val_ + check(i, n_test_)); }
    Sample by_split(const std::string& split, int i) const;

    int n_train() const { return n_train_; }
    int n_val() const { return n_val_; }
    int n_test() const { return n_test_; }
    int split_size(const std::string& split) const;
    const SceneSpec& spec() const { return spec_; }

  private:
    static int check(int i, int n);
    Sample fetch(int global_index) const;

    SceneSpec spec_;
    int n_train_, n_val_, n_test_;
    std::string cache_dir_;  // empty when caching is off
};

}  // namespace medusa
