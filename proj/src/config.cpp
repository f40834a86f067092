#include "fsrlab/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace fsrlab {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

Json* descend(Json& root, const std::string& dotted, bool create) {
    Json* node = &root;
    std::stringstream ss(dotted);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    for (const auto& p : parts) {
        if (!node->is_object()) {
            if (!create) return nullptr;
            *node = Json::object();
        }
        if (!node->contains(p)) {
            if (!create) return nullptr;
            (*node)[p] = Json::object();
        }
        node = &(*node)[p];
    }
    return node;
}

Json parse_value(const std::string& text, const std::string& where) {
    const std::string t = trim(text);
    try {
        return Json::parse(t);
    } catch (const Json::parse_error&) {
        // bare words read as strings: method.kind = fsr_logit
        if (!t.empty() && t.find_first_of("\"{}[],") == std::string::npos) return Json(t);
        // arrays of bare words: grid.methods = [naive, ewc]
        if (t.size() >= 2 && t.front() == '[' && t.back() == ']') {
            Json arr = Json::array();
            std::stringstream ss(t.substr(1, t.size() - 2));
            std::string item;
            while (std::getline(ss, item, ','))
                if (!trim(item).empty()) arr.push_back(parse_value(item, where));
            return arr;
        }
        throw Error(where + ": cannot parse value '" + t + "'");
    }
}

} // namespace

Json parse_config_text(const std::string& text, const std::string& origin) {
    const std::string t = trim(text);
    if (!t.empty() && t[0] == '{') {
        try {
            return Json::parse(t);
        } catch (const Json::parse_error& e) {
            throw Error(origin + ": " + e.what());
        }
    }
    Json cfg = Json::object();
    std::stringstream ss(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string l = trim(line);
        if (l.empty() || l[0] == '#') continue;
        const auto eq = l.find('=');
        if (eq == std::string::npos)
            throw Error(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(l.substr(0, eq));
        if (key.empty())
            throw Error(origin + ":" + std::to_string(lineno) + ": empty key");
        Json* node = descend(cfg, key, true);
        *node = parse_value(l.substr(eq + 1), origin + ":" + std::to_string(lineno));
    }
    return cfg;
}

Json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

void apply_override(Json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw Error("override '" + assignment + "' is not key.path=value");
    const std::string key = trim(assignment.substr(0, eq));
    Json* node = descend(config, key, true);
    *node = parse_value(assignment.substr(eq + 1), "override " + key);
}

namespace {

void flatten_into(const Json& node, const std::string& prefix,
                  std::vector<std::string>& out) {
    if (node.is_object()) {
        for (auto it = node.begin(); it != node.end(); ++it)
            flatten_into(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key(), out);
    } else {
        out.push_back(prefix + " = " + node.dump());
    }
}

} // namespace

std::vector<std::string> flatten_config(const Json& config) {
    std::vector<std::string> out;
    flatten_into(config, "", out);
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t config_hash(const Json& config) {
    std::string all;
    for (const auto& line : flatten_config(config)) {
        all += line;
        all += '\n';
    }
    return fnv1a64(all);
}

// --- ExperimentConfig mapping ------------------------------------------------

namespace {

struct Reader {
    const Json& j;
    std::string prefix;
    std::set<std::string>* seen;

    bool has(const std::string& key) const { return j.contains(key); }

    template <class T>
    T get(const std::string& key, T fallback) const {
        if (!j.contains(key)) return fallback;
        seen->insert(prefix + key);
        try {
            return j.at(key).get<T>();
        } catch (const Json::exception& e) {
            throw Error("config key '" + prefix + key + "': " + e.what());
        }
    }

    Reader sub(const std::string& key) const {
        seen->insert(prefix + key);
        static const Json empty = Json::object();
        const Json& child = j.contains(key) ? j.at(key) : empty;
        if (!child.is_object())
            throw Error("config key '" + prefix + key + "' must be an object/section");
        return Reader{child, prefix + key + ".", seen};
    }
};

void collect_keys(const Json& node, const std::string& prefix, std::set<std::string>& out) {
    if (!node.is_object()) return;
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string full = prefix.empty() ? it.key() : prefix + "." + it.key();
        out.insert(full);
        collect_keys(it.value(), full, out);
    }
}

Activation activation_from_name(const std::string& name) {
    if (name == "identity") return Activation::Identity;
    if (name == "relu") return Activation::Relu;
    if (name == "leaky_relu") return Activation::LeakyRelu;
    throw Error("unknown activation '" + name + "'");
}

} // namespace

ExperimentConfig experiment_from_json(const Json& config) {
    std::set<std::string> seen;
    Reader root{config, "", &seen};
    ExperimentConfig cfg;

    {
        auto d = root.sub("dataset");
        const std::string kind = d.get<std::string>("kind", "synthetic");
        if (kind == "synthetic") {
            cfg.dataset.kind = DatasetSpec::Kind::Synthetic;
            auto& s = cfg.dataset.synthetic;
            s.classes = d.get<int>("classes", s.classes);
            s.height = d.get<int>("height", s.height);
            s.width = d.get<int>("width", s.width);
            s.channels = d.get<int>("channels", s.channels);
            s.train_per_class = d.get<int>("train_per_class", s.train_per_class);
            s.test_per_class = d.get<int>("test_per_class", s.test_per_class);
            s.seed = d.get<std::uint64_t>("seed", s.seed);
            s.jitter = d.get<float>("jitter", s.jitter);
            s.noise = d.get<float>("noise", s.noise);
            s.background = d.get<float>("background", s.background);
            s.sparsity = d.get<float>("sparsity", s.sparsity);
            s.pair_similarity = d.get<float>("pair_similarity", s.pair_similarity);
            s.label_noise = d.get<float>("label_noise", s.label_noise);
        } else if (kind == "idx") {
            cfg.dataset.kind = DatasetSpec::Kind::Idx;
            cfg.dataset.train_images = d.get<std::string>("train_images", "");
            cfg.dataset.train_labels = d.get<std::string>("train_labels", "");
            cfg.dataset.test_images = d.get<std::string>("test_images", "");
            cfg.dataset.test_labels = d.get<std::string>("test_labels", "");
            if (cfg.dataset.train_images.empty() || cfg.dataset.train_labels.empty() ||
                cfg.dataset.test_images.empty() || cfg.dataset.test_labels.empty())
                throw Error("dataset.kind=idx requires train/test image and label paths");
        } else if (kind == "csv") {
            cfg.dataset.kind = DatasetSpec::Kind::Csv;
            cfg.dataset.train_csv = d.get<std::string>("train_csv", "");
            cfg.dataset.test_csv = d.get<std::string>("test_csv", "");
            if (cfg.dataset.train_csv.empty() || cfg.dataset.test_csv.empty())
                throw Error("dataset.kind=csv requires train_csv and test_csv");
        } else {
            throw Error("unknown dataset.kind '" + kind + "'");
        }
    }
    {
        auto s = root.sub("stream");
        const std::string kind = s.get<std::string>("kind", "permuted");
        if (kind == "permuted")
            cfg.stream.kind = StreamSpec::Kind::Permuted;
        else if (kind == "nonlinear")
            cfg.stream.kind = StreamSpec::Kind::Nonlinear;
        else if (kind == "color")
            cfg.stream.kind = StreamSpec::Kind::ColorSpace;
        else if (kind == "class_split")
            cfg.stream.kind = StreamSpec::Kind::ClassSplit;
        else if (kind == "identity")
            cfg.stream.kind = StreamSpec::Kind::Identity;
        else
            throw Error("unknown stream.kind '" + kind + "'");
        cfg.stream.n_tasks = s.get<int>("tasks", cfg.stream.n_tasks);
        cfg.stream.color_spaces =
            s.get<std::vector<std::string>>("color_spaces", cfg.stream.color_spaces);
    }
    {
        auto m = root.sub("model");
        cfg.model.hidden = m.get<std::vector<std::size_t>>("hidden", cfg.model.hidden);
        cfg.model.act = activation_from_name(m.get<std::string>("activation", "leaky_relu"));
        cfg.model.alpha = m.get<float>("alpha", cfg.model.alpha);
    }
    {
        auto t = root.sub("train");
        cfg.train.epochs = t.get<int>("epochs", cfg.train.epochs);
        cfg.train.batch = t.get<std::size_t>("batch", cfg.train.batch);
        cfg.train.plateau_decay = t.get<bool>("plateau_decay", cfg.train.plateau_decay);
        cfg.train.patience = t.get<int>("patience", cfg.train.patience);
    }
    {
        auto o = root.sub("optimizer");
        const std::string kind = o.get<std::string>("kind", "adam");
        if (kind == "adam")
            cfg.optimizer.kind = OptKind::Adam;
        else if (kind == "sgd")
            cfg.optimizer.kind = OptKind::Sgd;
        else
            throw Error("unknown optimizer.kind '" + kind + "'");
        cfg.optimizer.lr = o.get<float>("lr", cfg.optimizer.kind == OptKind::Adam ? 1e-4f
                                                                                  : 1e-3f);
        cfg.optimizer.weight_decay = o.get<float>("weight_decay", 1e-4f);
        cfg.optimizer.beta1 = o.get<float>("beta1", cfg.optimizer.beta1);
        cfg.optimizer.beta2 = o.get<float>("beta2", cfg.optimizer.beta2);
        cfg.optimizer.eps = o.get<float>("eps", cfg.optimizer.eps);
    }
    {
        auto m = root.sub("method");
        cfg.method.kind = method_from_name(m.get<std::string>("kind", "naive"));
        cfg.method.lambda = m.get<float>("lambda", -1.0f);
        cfg.method.tau = m.get<float>("tau", 2.0f);
        cfg.method.replay_batch = m.get<int>("replay_batch", 128);
        cfg.method.label_weight = m.get<float>("label_weight", -1.0f);
        cfg.method.fisher_samples = m.get<int>("fisher_samples", 1000);
        cfg.method.refresh_logits = m.get<bool>("refresh_logits", false);
    }
    {
        auto m = root.sub("memory");
        const std::string budget = m.get<std::string>("budget", "per_task");
        if (budget == "per_task")
            cfg.memory.budget = MemorySpec::Budget::PerTask;
        else if (budget == "per_class")
            cfg.memory.budget = MemorySpec::Budget::PerClass;
        else if (budget == "ewc_equivalent")
            cfg.memory.budget = MemorySpec::Budget::EwcEquivalent;
        else
            throw Error("unknown memory.budget '" + budget + "'");
        cfg.memory.amount = m.get<std::size_t>("amount", cfg.memory.amount);
        cfg.memory.selection =
            selection_from_name(m.get<std::string>("selection", "stratified_random"));
        cfg.memory.probe_epochs = m.get<int>("probe_epochs", cfg.memory.probe_epochs);
    }
    cfg.val_fraction = root.get<double>("val_fraction", cfg.val_fraction);
    cfg.seed = root.get<std::uint64_t>("seed", cfg.seed);

    // reject unknown keys so config typos cannot silently change a run
    std::set<std::string> present;
    collect_keys(config, "", present);
    static const std::set<std::string> extra_ok = {
        "seeds",     "grid",      "grid.methods", "grid.memory_amounts", "grid.selections",
        "bench",     "bench.rho", "bench.figures"};
    for (const auto& key : present)
        if (!seen.count(key) && !extra_ok.count(key))
            throw Error("unknown config key '" + key + "'");
    return cfg;
}

RunSpec run_spec_from_json(const Json& config) {
    RunSpec spec;
    if (config.contains("seeds")) {
        for (const auto& s : config.at("seeds")) spec.seeds.push_back(s.get<std::uint64_t>());
    } else {
        Json tmp = config;
        spec.seeds.push_back(tmp.value("seed", std::uint64_t(1)));
    }
    if (spec.seeds.empty()) throw Error("config: empty seeds list");
    if (config.contains("bench")) {
        spec.compute_rho = config.at("bench").value("rho", false);
        spec.emit_figures = config.at("bench").value("figures", true);
    }

    std::vector<std::string> methods;
    std::vector<std::size_t> amounts;
    std::vector<std::string> selections;
    if (config.contains("grid")) {
        const auto& g = config.at("grid");
        if (g.contains("methods"))
            methods = g.at("methods").get<std::vector<std::string>>();
        if (g.contains("memory_amounts"))
            amounts = g.at("memory_amounts").get<std::vector<std::size_t>>();
        if (g.contains("selections"))
            selections = g.at("selections").get<std::vector<std::string>>();
    }
    const bool has_grid = !methods.empty() || !amounts.empty() || !selections.empty();
    if (methods.empty()) methods = {""};
    if (amounts.empty()) amounts = {std::size_t(0)};
    if (selections.empty()) selections = {""};

    for (const auto& method : methods)
        for (const auto amount : amounts)
            for (const auto& sel : selections) {
                Json j = config;
                j.erase("grid");
                j.erase("seeds");
                std::string name;
                if (!method.empty()) {
                    j["method"]["kind"] = method;
                    name += method;
                }
                if (amount != 0) {
                    j["memory"]["amount"] = amount;
                    name += (name.empty() ? "" : "-") + std::string("mem") +
                            std::to_string(amount);
                }
                if (!sel.empty()) {
                    j["memory"]["selection"] = sel;
                    name += (name.empty() ? "" : "-") + sel;
                }
                Arm arm;
                arm.name = has_grid && !name.empty() ? name : "arm";
                arm.config = experiment_from_json(j);
                arm.json = j;
                spec.arms.push_back(std::move(arm));
            }
    return spec;
}

} // namespace fsrlab
