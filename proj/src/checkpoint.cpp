#include "medusa/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>

namespace medusa {
namespace {

constexpr char kMagic[8] = {'M', 'E', 'D', 'U', 'S', 'C', 'K', '1'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw CheckpointError("truncated checkpoint");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

const ArchiveEntry* Archive::find(const std::string& name) const {
    for (const ArchiveEntry& e : entries)
        if (e.name == name) return &e;
    return nullptr;
}

void Archive::save(const std::string& path) const {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u64(out, metadata.size());
    out += metadata;
    put_u64(out, entries.size());
    // manifest: names and shapes in write order
    for (const ArchiveEntry& e : entries) {
        put_u32(out, std::uint32_t(e.name.size()));
        out += e.name;
        put_u32(out, std::uint32_t(e.shape.size()));
        for (int d : e.shape) put_u32(out, std::uint32_t(d));
    }
    for (const ArchiveEntry& e : entries) {
        put_u64(out, e.data.size());
        for (double d : e.data) put_f64(out, d);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot open " + path + " for writing");
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw CheckpointError("write failed: " + path);
}

Archive Archive::load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw CheckpointError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    Reader r{buf};
    if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
        throw CheckpointError("bad magic in " + path + " (wrong file or version)");
    Archive a;
    a.metadata = r.bytes(r.u64());
    const std::uint64_t n = r.u64();
    a.entries.resize(n);
    for (auto& e : a.entries) {
        e.name = r.bytes(r.u32());
        e.shape.resize(r.u32());
        for (int& d : e.shape) d = int(r.u32());
    }
    for (auto& e : a.entries) {
        const std::uint64_t m = r.u64();
        std::size_t expect = 1;
        for (int d : e.shape) expect *= std::size_t(d);
        if (m != expect)
            throw CheckpointError("entry " + e.name + " has " + std::to_string(m) +
                                  " values, shape wants " + std::to_string(expect));
        e.data.resize(m);
        for (double& d : e.data) d = r.f64();
    }
    return a;
}

Archive snapshot_state(const ModuleState& state, const std::string& metadata) {
    Archive a;
    a.metadata = metadata;
    for (const Parameter* p : state.params) {
        const auto d = p->tensor.data();
        a.entries.push_back({p->name, p->tensor.shape(), {d.begin(), d.end()}});
    }
    for (const Buffer& b : state.buffers) {
        a.entries.push_back({b.name, {int(b.data->size())}, *b.data});
    }
    return a;
}

void restore_state(const Archive& archive, ModuleState& state) {
    std::map<std::string, const ArchiveEntry*> by_name;
    for (const ArchiveEntry& e : archive.entries) by_name[e.name] = &e;

    std::size_t used = 0;
    for (Parameter* p : state.params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end()) throw CheckpointError("missing entry: " + p->name);
        const ArchiveEntry& e = *it->second;
        if (e.shape != p->tensor.shape())
            throw CheckpointError("shape mismatch for " + p->name + ": checkpoint " +
                                  shape_str(e.shape) + " vs model " + shape_str(p->tensor.shape()));
        std::copy(e.data.begin(), e.data.end(), p->tensor.data().begin());
        ++used;
    }
    for (Buffer& b : state.buffers) {
        auto it = by_name.find(b.name);
        if (it == by_name.end()) throw CheckpointError("missing entry: " + b.name);
        const ArchiveEntry& e = *it->second;
        if (e.data.size() != b.data->size())
            throw CheckpointError("size mismatch for " + b.name);
        *b.data = e.data;
        ++used;
    }
    if (used != archive.entries.size())
        throw CheckpointError("checkpoint has " + std::to_string(archive.entries.size() - used) +
                              " entries unknown to the model");
}

}  // namespace medusa
