#include "cli/run_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "tailaug/core/rng.hpp"
#include "tailaug/error.hpp"

namespace tailaug::cli {

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"seed", "0", "master seed; every stage derives its own seed from it"},
        {"train_manifest", "", "training manifest CSV (pipeline synthesizes a world when empty)"},
        {"test_manifest", "", "held-out manifest CSV"},
        {"normal_manifest", "", "normal images for train-gen (default: all-zero rows of train_manifest)"},
        {"tail_classes", "", "explicit comma-separated tail classes; overrides tail_tau"},
        {"tail_tau", "0.1", "class is tail when its count < tail_tau * largest count"},
        {"synth.num_samples", "2500", "synthetic world size before the train/test split"},
        {"synth.train_fraction", "0.8", "share of the synthetic world used for training"},
        {"synth.image_size", "64", "synthetic image side in pixels"},
        {"synth.names", "", "class names (default world when empty)"},
        {"synth.frequencies", "", "per-class inclusion probabilities, parallel to synth.names"},
        {"synth.entangle", "", "overlap probabilities as Name|Name=p pairs (default world's when empty)"},
        {"synth.groundtruth", "", "ground-truth directory of a synthetic world (oracle inpainter)"},
        {"gen.kind", "diffusion", "inpainter: diffusion or oracle"},
        {"gen.checkpoint", "", "trained generator checkpoint"},
        {"gen.timesteps", "200", "diffusion steps"},
        {"gen.epochs", "5", "generator training epochs"},
        {"gen.batch_size", "8", "generator batch size"},
        {"gen.lr", "0.001", "generator learning rate"},
        {"gen.base_channels", "16", "generator width"},
        {"train.epochs", "20", "baseline classifier epochs"},
        {"train.batch_size", "32", "classifier batch size"},
        {"train.lr", "0.003", "classifier learning rate (Adam)"},
        {"train.loss", "bce", "bce or focal"},
        {"train.focal_gamma", "2", "focal loss gamma"},
        {"train.focal_alpha", "0.25", "focal loss alpha"},
        {"train.image_size", "64", "working resolution for classifier and generator"},
        {"classifier.checkpoint", "", "classifier checkpoint used by generate, finetune, evaluate"},
        {"aug.cam_threshold", "0.5", "Grad-CAM binarization threshold"},
        {"aug.dilation_radius", "2", "mask dilation radius at 64 px, scaled with resolution"},
        {"aug.entangle_threshold", "0.5", "heads entangled at or above this score are retained"},
        {"aug.max_mask_fraction", "0.5", "skip samples whose mask covers more of the image"},
        {"aug.multiplicity", "1", "augmented copies per eligible source"},
        {"aug.retention", "all", "all (every entangled head) or strongest (at most one head)"},
        {"aug.sources", "", "augmented manifests concatenated into D_i for finetune"},
        {"lkg.backend", "matrix", "matrix, llm or none"},
        {"lkg.matrix", "", "entanglement matrix JSON (also the llm fallback when set)"},
        {"lkg.llm_endpoint", "https://api.openai.com/v1/chat/completions", "chat-completions URL"},
        {"lkg.llm_model", "gpt-4", "model name"},
        {"lkg.llm_api_key_env", "OPENAI_API_KEY", "environment variable holding the API key"},
        {"lkg.llm_cache", "", "JSON response cache file"},
        {"lkg.llm_retries", "3", "retries per request"},
        {"lkg.llm_backoff_ms", "500", "initial retry backoff"},
        {"lkg.llm_min_interval_ms", "0", "minimum spacing between requests"},
        {"ft.epochs", "10", "fine-tuning epochs"},
        {"ft.schedule", "pil", "pil, mixed (all of D_i every epoch) or original (D_o only)"},
        {"pil.beta", "0.5", "ramp-in rate of the augmented set"},
        {"eval.threshold", "0.5", "sigmoid decision threshold"},
        {"report.baseline", "", "baseline EvalReport JSON"},
        {"report.treated", "", "treated EvalReport JSON"},
        {"report.dump_cams", "0", "number of training samples whose CAMs and masks are dumped"},
    };
    return keys;
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
    for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

RunConfig RunConfig::parse(const std::string& text, const std::string& origin) {
    RunConfig config;
    config.merge(text, origin);
    return config;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open config file: " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str(), path.string());
}

void RunConfig::merge(const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int number = 0;
    while (std::getline(in, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            throw ArgumentError(origin + ":" + std::to_string(number) + ": expected key = value");
        }
        try {
            set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
        } catch (const ArgumentError& e) {
            throw ArgumentError(origin + ":" + std::to_string(number) + ": " + e.what());
        }
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ArgumentError("unknown config key: " + key);
    it->second = value;
}

void RunConfig::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ArgumentError("--set expects key=value, got: " + assignment);
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

const std::string& RunConfig::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw ArgumentError("unknown config key: " + key);
    return it->second;
}

double RunConfig::number(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ArgumentError("config key " + key + " expects a number, got '" + v + "'");
    }
}

int RunConfig::integer(const std::string& key) const {
    const std::string& v = get(key);
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ArgumentError("config key " + key + " expects an integer, got '" + v + "'");
    }
    return out;
}

std::uint64_t RunConfig::u64(const std::string& key) const {
    const std::string& v = get(key);
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ArgumentError("config key " + key + " expects a nonnegative integer, got '" + v + "'");
    }
    return out;
}

bool RunConfig::flag(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no" || v.empty()) return false;
    throw ArgumentError("config key " + key + " expects a boolean, got '" + v + "'");
}

std::vector<std::string> RunConfig::list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::uint64_t RunConfig::stage_seed(const std::string& stage) const {
    return core::derive_seed(u64("seed"), stage);
}

std::string RunConfig::dump() const {
    std::ostringstream out;
    for (const auto& k : config_keys()) {
        out << "# " << k.doc << '\n' << k.key << " = " << values_.at(k.key) << '\n';
    }
    return out.str();
}

}  // namespace tailaug::cli
