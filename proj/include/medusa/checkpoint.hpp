#pragma once

#include <string>
#include <vector>

#include "medusa/nn.hpp"

namespace medusa {

// Flat parameter archive: a manifest of names (in write order) with shapes,
// followed by raw little-endian 64-bit floats per entry. Round-trips are
// bit-exact. `metadata` carries the experiment config text so a model can be
// rebuilt from its checkpoint.
struct ArchiveEntry {
    std::string name;
    std::vector<int> shape;
    std::vector<double> data;
};

struct Archive {
    std::string metadata;
    std::vector<ArchiveEntry> entries;

    const ArchiveEntry* find(const std::string& name) const;
    void save(const std::string& path) const;
    static Archive load(const std::string& path);
};

// Parameters in collect order, then buffers; names come from the modules.
Archive snapshot_state(const ModuleState& state, const std::string& metadata = "");

// Strict restore: every entry must exist with a matching shape, and the
// archive may not contain entries unknown to `state`.
void restore_state(const Archive& archive, ModuleState& state);

}  // namespace medusa
