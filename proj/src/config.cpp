#include "medusa/config.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace medusa {
namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

struct KvReader {
    const KvMap& kv;
    mutable std::vector<std::string> unknown_guard;  // keys consumed

    std::optional<std::string> get(const std::string& key) const {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        return it->second;
    }
    std::string get_or(const std::string& key, const std::string& def) const {
        return get(key).value_or(def);
    }
    double get_double(const std::string& key, double def) const {
        auto v = get(key);
        if (!v) return def;
        try {
            return std::stod(*v);
        } catch (const std::exception&) {
            throw ValueError("config: bad number for " + key + ": " + *v);
        }
    }
    long get_long(const std::string& key, long def) const {
        auto v = get(key);
        if (!v) return def;
        try {
            return std::stol(*v);
        } catch (const std::exception&) {
            throw ValueError("config: bad integer for " + key + ": " + *v);
        }
    }
    bool get_onoff(const std::string& key, bool def) const {
        auto v = get(key);
        if (!v) return def;
        if (*v == "on" || *v == "true" || *v == "1") return true;
        if (*v == "off" || *v == "false" || *v == "0") return false;
        throw ValueError("config: expected on/off for " + key + ", got " + *v);
    }
    std::vector<int> get_ints(const std::string& key, const std::vector<int>& def) const {
        auto v = get(key);
        if (!v) return def;
        std::vector<int> out;
        for (const std::string& tok : split(*v, ','))
            out.push_back(int(std::stol(tok)));
        return out;
    }
};

}  // namespace

KvMap parse_kv_text(const std::string& text) {
    KvMap kv;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ValueError("config line " + std::to_string(lineno) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValueError("config line " + std::to_string(lineno) + ": expected key=value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ValueError("config line " + std::to_string(lineno) + ": empty key");
        kv[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

KvMap load_kv_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValueError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_kv_text(ss.str());
}

ExperimentConfig ExperimentConfig::from_kv(const KvMap& kv) {
    KvReader r{kv, {}};
    ExperimentConfig cfg;
    cfg.scenario = r.get_or("experiment.scenario", cfg.scenario);
    cfg.out_dir = r.get_or("experiment.out_dir", cfg.out_dir);

    const std::string default_kind = r.get_or("experiment.head_kind", "msa");
    const bool default_sfa = r.get_onoff("experiment.sfa", true);
    const auto tasks = split(r.get_or("experiment.tasks", "depth,segm"), ',');
    for (const std::string& t : tasks) {
        if (t.empty()) continue;
        HeadSetting h;
        h.task = t;
        h.kind = head_kind_from_str(r.get_or("experiment.head_kind." + t, default_kind));
        h.sfa = r.get_onoff("experiment.sfa." + t, default_sfa);
        cfg.heads.push_back(std::move(h));
    }

    cfg.backbone.scales = r.get_ints("backbone.scales", cfg.backbone.scales);
    cfg.backbone.channels = r.get_ints("backbone.channels", cfg.backbone.channels);
    cfg.backbone.stem_channels = int(r.get_long("backbone.stem_channels", cfg.backbone.stem_channels));
    cfg.backbone.blocks_per_scale = int(r.get_long("backbone.blocks_per_scale", cfg.backbone.blocks_per_scale));

    cfg.scene.image_size = int(r.get_long("data.image_size", cfg.scene.image_size));
    cfg.scene.min_shapes = int(r.get_long("data.min_shapes", cfg.scene.min_shapes));
    cfg.scene.max_shapes = int(r.get_long("data.max_shapes", cfg.scene.max_shapes));
    cfg.scene.noise = r.get_double("data.noise", cfg.scene.noise);
    if (auto v = r.get("data.seed")) cfg.data_seed = std::stoull(*v);
    cfg.n_train = int(r.get_long("data.n_train", cfg.n_train));
    cfg.n_val = int(r.get_long("data.n_val", cfg.n_val));
    cfg.n_test = int(r.get_long("data.n_test", cfg.n_test));

    cfg.train.epochs = int(r.get_long("train.epochs", cfg.train.epochs));
    cfg.train.base_lr = r.get_double("train.base_lr", cfg.train.base_lr);
    cfg.train.backbone_lr_scale = r.get_double("train.backbone_lr_scale", cfg.train.backbone_lr_scale);
    cfg.train.poly_power = r.get_double("train.poly_power", cfg.train.poly_power);
    cfg.train.batch_size = int(r.get_long("train.batch_size", cfg.train.batch_size));
    if (auto v = r.get("train.seed")) cfg.train.seed = std::stoull(*v);
    cfg.train.intermediate_loss_weight =
        r.get_double("train.intermediate_loss_weight", cfg.train.intermediate_loss_weight);
    for (const auto& [key, value] : kv) {
        const std::string prefix = "train.task_loss_weight.";
        if (key.rfind(prefix, 0) == 0)
            cfg.train.task_loss_weights[key.substr(prefix.size())] = std::stod(value);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    return from_kv(parse_kv_text(text));
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    return from_kv(load_kv_file(path));
}

KvMap ExperimentConfig::to_kv() const {
    KvMap kv;
    // out_dir is a runtime choice, not experiment identity: it stays out of
    // the serialized form so reruns into different directories hash equal
    kv["experiment.scenario"] = scenario;
    std::string tasks;
    for (const HeadSetting& h : heads) {
        if (!tasks.empty()) tasks += ',';
        tasks += h.task;
        kv["experiment.head_kind." + h.task] = head_kind_str(h.kind);
        kv["experiment.sfa." + h.task] = h.sfa ? "on" : "off";
    }
    kv["experiment.tasks"] = tasks;

    auto join_ints = [](const std::vector<int>& v) {
        std::string s;
        for (int x : v) {
            if (!s.empty()) s += ',';
            s += std::to_string(x);
        }
        return s;
    };
    kv["backbone.scales"] = join_ints(backbone.scales);
    kv["backbone.channels"] = join_ints(backbone.channels);
    kv["backbone.stem_channels"] = std::to_string(backbone.stem_channels);
    kv["backbone.blocks_per_scale"] = std::to_string(backbone.blocks_per_scale);

    kv["data.image_size"] = std::to_string(scene.image_size);
    kv["data.min_shapes"] = std::to_string(scene.min_shapes);
    kv["data.max_shapes"] = std::to_string(scene.max_shapes);
    kv["data.noise"] = fmt_double(scene.noise);
    if (data_seed) kv["data.seed"] = std::to_string(*data_seed);
    kv["data.n_train"] = std::to_string(n_train);
    kv["data.n_val"] = std::to_string(n_val);
    kv["data.n_test"] = std::to_string(n_test);

    kv["train.epochs"] = std::to_string(train.epochs);
    kv["train.base_lr"] = fmt_double(train.base_lr);
    kv["train.backbone_lr_scale"] = fmt_double(train.backbone_lr_scale);
    kv["train.poly_power"] = fmt_double(train.poly_power);
    kv["train.batch_size"] = std::to_string(train.batch_size);
    kv["train.seed"] = std::to_string(train.seed);
    kv["train.intermediate_loss_weight"] = fmt_double(train.intermediate_loss_weight);
    for (const auto& [task, w] : train.task_loss_weights)
        kv["train.task_loss_weight." + task] = fmt_double(w);
    return kv;
}

std::string ExperimentConfig::to_text() const {
    const KvMap kv = to_kv();
    std::string cur_section;
    std::ostringstream os;
    for (const auto& [key, value] : kv) {
        const auto dot = key.find('.');
        const std::string section = key.substr(0, dot);
        if (section != cur_section) {
            if (!cur_section.empty()) os << "\n";
            os << "[" << section << "]\n";
            cur_section = section;
        }
        os << key.substr(dot + 1) << " = " << value << "\n";
    }
    return os.str();
}

std::vector<std::string> ExperimentConfig::task_names() const {
    std::vector<std::string> out;
    for (const HeadSetting& h : heads) out.push_back(h.task);
    return out;
}

SceneSpec ExperimentConfig::resolved_scene() const {
    SceneSpec s = scene;
    s.seed = data_seed.value_or(train.seed);
    return s;
}

Dataset ExperimentConfig::make_dataset() const {
    return Dataset(resolved_scene(), n_train, n_val, n_test);
}

void ExperimentConfig::validate() const {
    if (heads.empty()) throw ValueError("config: task roster is empty");
    for (std::size_t i = 0; i < heads.size(); ++i)
        for (std::size_t j = i + 1; j < heads.size(); ++j)
            if (heads[i].task == heads[j].task)
                throw ValueError("config: duplicate task " + heads[i].task);
    backbone.validate();
    scene.validate();
    train.validate();
    if (scene.image_size % backbone.max_scale() != 0)
        throw ValueError("config: image_size must be divisible by the largest backbone scale");
    if (n_train < 1 || n_val < 1 || n_test < 1) throw ValueError("config: split sizes must be positive");
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << hash_string(cfg.to_text());
    return os.str();
}

}  // namespace medusa
