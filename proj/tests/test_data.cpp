#include <doctest.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "medusa/data.hpp"
#include "medusa/errors.hpp"
#include "medusa/heads.hpp"

using namespace medusa;

TEST_CASE("task specs agree with the dataset's label geometry") {
    CHECK(task_spec_by_name("segm").out_channels == kNumClasses);
    CHECK(task_spec_by_name("parts").out_channels == kNumParts);
    CHECK(task_spec_by_name("depth").out_channels == 1);
    CHECK(task_spec_by_name("normals").out_channels == 3);
    CHECK_THROWS_AS(task_spec_by_name("frobnication"), ValueError);
}

TEST_CASE("generation is deterministic in (seed, index)") {
    SceneSpec spec;
    spec.seed = 77;
    const Sample a = generate_sample(spec, 5);
    const Sample b = generate_sample(spec, 5);
    CHECK(a.image == b.image);
    CHECK(a.depth == b.depth);
    CHECK(a.segm == b.segm);
    CHECK(a.normals == b.normals);

    const Sample c = generate_sample(spec, 6);
    CHECK(a.image != c.image);
    SceneSpec other = spec;
    other.seed = 78;
    const Sample d = generate_sample(other, 5);
    CHECK(a.image != d.image);
}

TEST_CASE("empty scene hits the documented defaults") {
    SceneSpec spec;
    spec.min_shapes = 0;
    spec.max_shapes = 0;
    const Sample s = generate_sample(spec, 0);
    for (double v : s.depth) CHECK(v == 1.0);
    for (int v : s.segm) CHECK(v == 0);
    for (double v : s.edges) CHECK(v == 0.0);
    for (double v : s.saliency) CHECK(v == 0.0);
    for (int v : s.parts) CHECK(v == 0);
    validate_sample(s);
}

TEST_CASE("generated samples pass the validator") {
    SceneSpec spec;
    spec.seed = 123;
    for (int i = 0; i < 50; ++i) {
        const Sample s = generate_sample(spec, i);
        CHECK_NOTHROW(validate_sample(s));
    }
}

TEST_CASE("the validator actually rejects broken samples") {
    SceneSpec spec;
    spec.seed = 9;
    Sample s = generate_sample(spec, 0);

    SUBCASE("corrupted edge map") {
        s.edges[0] = 1.0 - s.edges[0];
        CHECK_THROWS_AS(validate_sample(s), DataError);
    }
    SUBCASE("corrupted normal") {
        s.normals[0] += 0.1;
        CHECK_THROWS_AS(validate_sample(s), DataError);
    }
    SUBCASE("corrupted saliency") {
        std::size_t i = 0;
        while (s.saliency[i] == 0.0) ++i;
        s.saliency[i] = 0.0;
        CHECK_THROWS_AS(validate_sample(s), DataError);
    }
    SUBCASE("corrupted depth") {
        s.depth[0] = 2.0;
        CHECK_THROWS_AS(validate_sample(s), DataError);
    }
    SUBCASE("corrupted parts") {
        std::size_t i = 0;
        while (s.segm[i] == 0) ++i;
        s.parts[i] = 0;
        CHECK_THROWS_AS(validate_sample(s), DataError);
    }
}

TEST_CASE("dataset splits are disjoint index ranges") {
    SceneSpec spec;
    spec.seed = 31;
    Dataset data(spec, 4, 2, 3);
    CHECK(data.n_train() == 4);
    // val comes right after train, test after val
    const Sample val0 = data.val(0);
    const Sample direct = generate_sample(spec, 4);
    CHECK(val0.image == direct.image);
    const Sample test0 = data.test(0);
    const Sample direct_test = generate_sample(spec, 6);
    CHECK(test0.image == direct_test.image);
    CHECK_THROWS_AS(data.train(4), ValueError);
    CHECK_THROWS_AS(data.val(-1), ValueError);
}

TEST_CASE("sample cache round-trips bit-exactly") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "medusa_cache_test";
    fs::remove_all(dir);
    setenv("MEDUSA_DATA_CACHE", dir.c_str(), 1);

    SceneSpec spec;
    spec.seed = 55;
    {
        Dataset data(spec, 2, 1, 1);
        const Sample fresh = data.train(0);  // generates and writes the cache
        Dataset data2(spec, 2, 1, 1);
        const Sample cached = data2.train(0);  // reads it back
        CHECK(std::memcmp(fresh.image.data(), cached.image.data(),
                          fresh.image.size() * sizeof(double)) == 0);
        CHECK(std::memcmp(fresh.depth.data(), cached.depth.data(),
                          fresh.depth.size() * sizeof(double)) == 0);
        CHECK(fresh.segm == cached.segm);
        CHECK(fresh.parts == cached.parts);
        CHECK(std::memcmp(fresh.normals.data(), cached.normals.data(),
                          fresh.normals.size() * sizeof(double)) == 0);
    }
    unsetenv("MEDUSA_DATA_CACHE");
    fs::remove_all(dir);
}
