#include "cdt/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>

#include <json.hpp>

#include "cdt/errors.hpp"

namespace cdt {

namespace {

using json = nlohmann::json;

struct Binding {
    ConfigKey key;
    std::function<void(const json&, ExperimentPlan&)> set;
    std::function<json(const ExperimentPlan&)> get;
};

template <class T>
T as(const json& v) {
    return v.get<T>();
}

std::vector<Binding> make_bindings() {
    std::vector<Binding> b;
    auto add = [&](std::string_view name, std::string_view type, std::string_view desc, auto set, auto get) {
        b.push_back({{name, type, desc}, set, get});
    };

    add("seed", "uint64", "master seed; per-run data and init seeds derive from it",
        [](const json& v, ExperimentPlan& p) { p.master_seed = as<std::uint64_t>(v); },
        [](const ExperimentPlan& p) { return json(p.master_seed); });
    add("out_dir", "string", "output directory",
        [](const json& v, ExperimentPlan& p) { p.out_dir = as<std::string>(v); },
        [](const ExperimentPlan& p) { return json(p.out_dir); });
    add("format", "string", "csv | json-lines",
        [](const json& v, ExperimentPlan& p) { p.format = parse_output_format(as<std::string>(v)); },
        [](const ExperimentPlan& p) { return json(std::string(to_string(p.format))); });
    add("threads", "int", "worker threads for the sweep (results do not depend on it)",
        [](const json& v, ExperimentPlan& p) { p.threads = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.threads); });

    add("dataset.source", "string", "csv | synthetic",
        [](const json& v, ExperimentPlan& p) { p.dataset.source = parse_data_source(as<std::string>(v)); },
        [](const ExperimentPlan& p) { return json(std::string(to_string(p.dataset.source))); });
    add("dataset.csv_path", "string", "input CSV (header row, numeric cells)",
        [](const json& v, ExperimentPlan& p) { p.dataset.csv_path = as<std::string>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.csv_path); });
    add("dataset.target_column", "string", "name of the target column in the CSV",
        [](const json& v, ExperimentPlan& p) { p.dataset.target_column = as<std::string>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.target_column); });
    add("dataset.kind", "string", "synthetic generator: linear | teacher",
        [](const json& v, ExperimentPlan& p) { p.dataset.kind = parse_synthetic_kind(as<std::string>(v)); },
        [](const ExperimentPlan& p) { return json(std::string(to_string(p.dataset.kind))); });
    add("dataset.n_samples", "int", "synthetic rows",
        [](const json& v, ExperimentPlan& p) { p.dataset.n_samples = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.n_samples); });
    add("dataset.n_features", "int", "synthetic feature count",
        [](const json& v, ExperimentPlan& p) { p.dataset.n_features = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.n_features); });
    add("dataset.output_dim", "int", "synthetic targets per sample (n_L)",
        [](const json& v, ExperimentPlan& p) { p.dataset.output_dim = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.output_dim); });
    add("dataset.teacher_width", "int", "hidden width of the random teacher network",
        [](const json& v, ExperimentPlan& p) { p.dataset.teacher_width = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.teacher_width); });
    add("dataset.noise_std", "float", "additive target noise",
        [](const json& v, ExperimentPlan& p) { p.dataset.noise_std = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.noise_std); });
    add("dataset.generator_seed", "uint64", "seed of the synthetic generator",
        [](const json& v, ExperimentPlan& p) { p.dataset.generator_seed = as<std::uint64_t>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.generator_seed); });
    add("dataset.subsample", "int", "rows drawn without replacement per run (0 = all)",
        [](const json& v, ExperimentPlan& p) { p.dataset.subsample = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.subsample); });
    add("dataset.normalize", "bool", "z-score features and targets over the subsample",
        [](const json& v, ExperimentPlan& p) { p.dataset.normalize = as<bool>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.normalize); });
    add("dataset.split_train_fraction", "float", "training share; train size = floor(fraction * N)",
        [](const json& v, ExperimentPlan& p) { p.dataset.split_train_fraction = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.dataset.split_train_fraction); });

    add("network.activation", "string", "relu | identity",
        [](const json& v, ExperimentPlan& p) { p.network.activation = parse_activation(as<std::string>(v)); },
        [](const ExperimentPlan& p) { return json(std::string(to_string(p.network.activation))); });
    add("network.sigma_w", "float", "weight scale",
        [](const json& v, ExperimentPlan& p) { p.network.sigma_w = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.network.sigma_w); });
    add("network.sigma_b", "float", "bias scale",
        [](const json& v, ExperimentPlan& p) { p.network.sigma_b = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.network.sigma_b); });
    add("network.init_scheme", "string", "standard | ntk | improved_standard",
        [](const json& v, ExperimentPlan& p) { p.network.init_scheme = parse_init_scheme(as<std::string>(v)); },
        [](const ExperimentPlan& p) { return json(std::string(to_string(p.network.init_scheme))); });

    add("plan.architectures", "list of int lists", "hidden widths per architecture, e.g. [[256], [64, 64]]",
        [](const json& v, ExperimentPlan& p) { p.architectures = as<std::vector<std::vector<int>>>(v); },
        [](const ExperimentPlan& p) { return json(p.architectures); });
    add("plan.alphas", "float list", "initial learning rates",
        [](const json& v, ExperimentPlan& p) { p.alphas = as<std::vector<double>>(v); },
        [](const ExperimentPlan& p) { return json(p.alphas); });
    add("plan.methods", "string list", "subset of [\"gd\", \"cdt\"]",
        [](const json& v, ExperimentPlan& p) {
            p.methods.clear();
            for (const auto& m : as<std::vector<std::string>>(v)) p.methods.push_back(parse_method(m));
        },
        [](const ExperimentPlan& p) {
            json a = json::array();
            for (Method m : p.methods) a.push_back(std::string(to_string(m)));
            return a;
        });
    add("plan.n_seeds", "int", "initializations / data shuffles per cell",
        [](const json& v, ExperimentPlan& p) { p.n_seeds = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.n_seeds); });

    add("trainer.steps", "int", "training steps per run (required)",
        [](const json& v, ExperimentPlan& p) { p.trainer.steps = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.trainer.steps); });
    add("trainer.loss", "string", "mse | sse",
        [](const json& v, ExperimentPlan& p) { p.trainer.loss = parse_loss_kind(as<std::string>(v)); },
        [](const ExperimentPlan& p) { return json(std::string(to_string(p.trainer.loss))); });
    add("trainer.decay_coeff", "float", "alpha_k = alpha0 / (1 + decay_coeff * k)",
        [](const json& v, ExperimentPlan& p) { p.trainer.decay_coeff = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.trainer.decay_coeff); });
    add("trainer.p", "float", "control penalty, R = p I",
        [](const json& v, ExperimentPlan& p) { p.trainer.p = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.trainer.p); });
    add("trainer.q", "float", "output penalty, Q = q I",
        [](const json& v, ExperimentPlan& p) { p.q_scale = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.q_scale); });
    add("trainer.divergence_threshold", "float", "training loss above this flags divergence",
        [](const json& v, ExperimentPlan& p) { p.trainer.divergence_threshold = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.trainer.divergence_threshold); });
    add("trainer.snapshot_interval", "int", "record sample outputs every N steps (0 = off)",
        [](const json& v, ExperimentPlan& p) { p.trainer.snapshot_interval = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.trainer.snapshot_interval); });
    add("trainer.snapshot_samples", "int list", "training-sample indices for output traces",
        [](const json& v, ExperimentPlan& p) { p.trainer.snapshot_samples = as<std::vector<int>>(v); },
        [](const ExperimentPlan& p) { return json(p.trainer.snapshot_samples); });

    add("dare.method", "string", "fixed_point | doubling",
        [](const json& v, ExperimentPlan& p) { p.dare.method = parse_dare_method(as<std::string>(v)); },
        [](const ExperimentPlan& p) { return json(std::string(to_string(p.dare.method))); });
    add("dare.tol", "float", "relative increment tolerance",
        [](const json& v, ExperimentPlan& p) { p.dare.tol = as<double>(v); },
        [](const ExperimentPlan& p) { return json(p.dare.tol); });
    add("dare.max_iters", "int", "iteration cap",
        [](const json& v, ExperimentPlan& p) { p.dare.max_iters = as<int>(v); },
        [](const ExperimentPlan& p) { return json(p.dare.max_iters); });

    add("analysis.validity_monitor", "bool", "compare each run with its local model",
        [](const json& v, ExperimentPlan& p) { p.validity_monitor = as<bool>(v); },
        [](const ExperimentPlan& p) { return json(p.validity_monitor); });
    return b;
}

const std::vector<Binding>& bindings() {
    static const std::vector<Binding> b = make_bindings();
    return b;
}

void flatten(const json& node, const std::string& prefix, std::vector<std::pair<std::string, json>>& out) {
    for (auto it = node.begin(); it != node.end(); ++it) {
        const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (it->is_object())
            flatten(*it, key, out);
        else
            out.emplace_back(key, *it);
    }
}

} // namespace

const std::vector<ConfigKey>& config_schema() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> k;
        for (const auto& b : bindings()) k.push_back(b.key);
        return k;
    }();
    return keys;
}

ExperimentPlan parse_plan(std::string_view json_text, ExperimentPlan base) {
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end(), nullptr, true, true);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    std::vector<std::pair<std::string, json>> entries;
    flatten(doc, "", entries);
    for (const auto& [key, value] : entries) {
        const Binding* hit = nullptr;
        for (const auto& b : bindings())
            if (b.key.name == key) hit = &b;
        if (!hit) throw ConfigError("unknown config key '" + key + "'");
        try {
            hit->set(value, base);
        } catch (const json::exception&) {
            throw ConfigError("config key '" + key + "' expects " + std::string(hit->key.type));
        } catch (const std::exception& e) {
            throw ConfigError("config key '" + key + "': " + e.what());
        }
    }
    return base;
}

ExperimentPlan load_plan(const std::string& path, ExperimentPlan base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_plan(ss.str(), std::move(base));
}

std::string plan_to_json(const ExperimentPlan& plan) {
    json doc = json::object();
    for (const auto& b : bindings()) doc[std::string(b.key.name)] = b.get(plan);
    return doc.dump(2);
}

} // namespace cdt
