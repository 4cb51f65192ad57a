#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medusa/data.hpp"
#include "medusa/heads.hpp"
#include "medusa/train.hpp"

namespace medusa {

// key=value config text with [section] headers; keys are stored as
// "section.key". '#' starts a comment.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text);
KvMap load_kv_file(const std::string& path);

struct HeadSetting {
    std::string task;
    HeadKind kind = HeadKind::Msa;
    bool sfa = true;
};

// Everything one experiment needs: roster, architecture, data, recipe.
struct ExperimentConfig {
    std::string scenario = "default";
    std::vector<HeadSetting> heads;
    BackboneConfig backbone;
    SceneSpec scene;  // scene.seed follows train.seed unless pinned
    std::optional<std::uint64_t> data_seed;
    int n_train = 128;
    int n_val = 32;
    int n_test = 64;
    TrainConfig train;
    std::string out_dir = "out";

    static ExperimentConfig from_kv(const KvMap& kv);
    static ExperimentConfig from_text(const std::string& text);
    static ExperimentConfig load(const std::string& path);

    KvMap to_kv() const;
    std::string to_text() const;  // canonical: sorted keys, stable formatting

    std::vector<std::string> task_names() const;
    SceneSpec resolved_scene() const;
    Dataset make_dataset() const;
    void validate() const;
};

std::string config_hash_hex(const ExperimentConfig& cfg);

}  // namespace medusa
