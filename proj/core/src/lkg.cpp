#include "tailaug/lkg.hpp"

#include <fstream>
#include <optional>

#include "json.hpp"
#include "tailaug/error.hpp"

namespace tailaug::lkg {

std::string to_string(MatrixProvenance p) {
    switch (p) {
        case MatrixProvenance::llm_cache: return "llm-cache";
        case MatrixProvenance::hand_authored: return "hand-authored";
        case MatrixProvenance::synthetic_ground_truth: return "synthetic-ground-truth";
    }
    return "hand-authored";
}

MatrixProvenance matrix_provenance_from_string(const std::string& text) {
    if (text == "llm-cache") return MatrixProvenance::llm_cache;
    if (text == "hand-authored") return MatrixProvenance::hand_authored;
    if (text == "synthetic-ground-truth") return MatrixProvenance::synthetic_ground_truth;
    throw SchemaError("unknown entanglement matrix provenance: " + text);
}

EntanglementMatrix EntanglementMatrix::zeros(const core::ClassRegistry& registry, MatrixProvenance provenance) {
    EntanglementMatrix m;
    m.registry = registry;
    m.scores.assign(registry.size() * registry.size(), 0.0);
    m.provenance = provenance;
    return m;
}

void EntanglementMatrix::set(core::ClassIndex a, core::ClassIndex b, double value) {
    const std::size_t k = registry.size();
    scores.at(static_cast<std::size_t>(a) * k + static_cast<std::size_t>(b)) = value;
    scores.at(static_cast<std::size_t>(b) * k + static_cast<std::size_t>(a)) = value;
}

void EntanglementMatrix::validate() const {
    const std::size_t k = registry.size();
    if (scores.size() != k * k) throw ValidationError("entanglement matrix is not K x K");
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double v = scores[i * k + j];
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError("entanglement score outside [0,1] at (" + registry.names()[i] + ", " +
                                      registry.names()[j] + ")");
            }
            if (i != j && v != scores[j * k + i]) {
                throw ValidationError("entanglement matrix is not symmetric at (" + registry.names()[i] + ", " +
                                      registry.names()[j] + ")");
            }
        }
    }
}

EntanglementMatrix EntanglementMatrix::load(const std::filesystem::path& path, const core::ClassRegistry& registry) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open entanglement matrix: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError("entanglement matrix is not valid JSON: " + std::string(e.what()));
    }
    const auto names = doc.at("classes").get<std::vector<std::string>>();
    const auto rows = doc.at("scores").get<std::vector<std::vector<double>>>();
    if (names.size() != registry.size() || rows.size() != names.size()) {
        throw SchemaError("entanglement matrix does not cover the registry: " + path.string());
    }
    EntanglementMatrix m = zeros(registry, matrix_provenance_from_string(doc.value("provenance", "hand-authored")));
    std::vector<core::ClassIndex> map;
    for (const auto& name : names) map.push_back(registry.index_of(name));
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (rows[i].size() != names.size()) throw SchemaError("entanglement matrix row length mismatch");
        for (std::size_t j = 0; j < names.size(); ++j) {
            m.scores[static_cast<std::size_t>(map[i]) * registry.size() + static_cast<std::size_t>(map[j])] = rows[i][j];
        }
    }
    m.validate();
    return m;
}

void EntanglementMatrix::save(const std::filesystem::path& path) const {
    validate();
    nlohmann::ordered_json doc;
    doc["classes"] = registry.names();
    std::vector<std::vector<double>> rows(registry.size());
    for (std::size_t i = 0; i < registry.size(); ++i) {
        rows[i].assign(scores.begin() + static_cast<std::ptrdiff_t>(i * registry.size()),
                       scores.begin() + static_cast<std::ptrdiff_t>((i + 1) * registry.size()));
    }
    doc["scores"] = rows;
    doc["provenance"] = to_string(provenance);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write entanglement matrix: " + path.string());
    out << doc.dump(2) << '\n';
}

MatrixBackend::MatrixBackend(EntanglementMatrix matrix) : matrix_(std::move(matrix)) { matrix_.validate(); }

PairScores MatrixBackend::query(const std::vector<ClassPair>& pairs) {
    PairScores out;
    for (const auto& pair : pairs) {
        if (!matrix_.registry.contains(pair.first) || !matrix_.registry.contains(pair.second)) {
            throw ArgumentError("entanglement query names a class outside the registry");
        }
        out[pair] = matrix_.at(pair.first, pair.second);
    }
    return out;
}

PairScores FallbackBackend::query(const std::vector<ClassPair>& pairs) {
    if (!fell_back_) {
        try {
            return primary_.query(pairs);
        } catch (const BackendError&) {
            fell_back_ = true;
        }
    }
    return fallback_.query(pairs);
}

PairScores query_entanglement(KnowledgeBackend& backend, const core::ClassSet& heads, const core::ClassSet& tails,
                              const core::ClassRegistry& registry) {
    std::vector<ClassPair> pairs;
    for (core::ClassIndex h : heads) {
        if (!registry.contains(h)) throw ArgumentError("unknown head class index " + std::to_string(h));
        if (tails.count(h)) throw ArgumentError("class " + registry.name(h) + " is both head and tail");
    }
    for (core::ClassIndex t : tails) {
        if (!registry.contains(t)) throw ArgumentError("unknown tail class index " + std::to_string(t));
    }
    for (core::ClassIndex h : heads)
        for (core::ClassIndex t : tails) pairs.emplace_back(h, t);
    if (pairs.empty()) return {};
    PairScores scores = backend.query(pairs);
    for (const auto& pair : pairs) {
        if (!scores.count(pair)) {
            throw BackendError("backend " + backend.name() + " returned no score for (" + registry.name(pair.first) +
                               ", " + registry.name(pair.second) + ")");
        }
    }
    return scores;
}

EntanglementDecision select_inpaint_targets(const core::LabelVector& labels, const stats::HeadTailPartition& partition,
                                            const PairScores& scores, double entangle_threshold, RetentionMode mode) {
    if (!(entangle_threshold >= 0.0 && entangle_threshold <= 1.0)) {
        throw ArgumentError("entangle threshold must lie in [0,1]");
    }
    core::ClassSet heads, tails;
    for (core::ClassIndex c : labels.positives()) {
        if (partition.is_tail(c)) tails.insert(c);
        else if (partition.is_head(c)) heads.insert(c);
    }
    EntanglementDecision decision;
    if (heads.empty()) return decision;
    if (tails.empty()) {
        decision.inpaint_targets = heads;
        return decision;
    }

    std::map<core::ClassIndex, double> strongest;
    for (core::ClassIndex h : heads) {
        double best = -1.0;
        for (core::ClassIndex t : tails) {
            const auto it = scores.find({h, t});
            if (it == scores.end()) {
                throw ArgumentError("missing entanglement score for head " + std::to_string(h) + ", tail " +
                                    std::to_string(t));
            }
            decision.rationale[it->first] = it->second;
            best = std::max(best, it->second);
        }
        strongest[h] = best;
    }

    if (mode == RetentionMode::all_above_threshold) {
        for (const auto& [h, score] : strongest) {
            (score >= entangle_threshold ? decision.retained_heads : decision.inpaint_targets).insert(h);
        }
    } else {
        std::optional<core::ClassIndex> keep;
        for (const auto& [h, score] : strongest) {
            if (score >= entangle_threshold && (!keep || score > strongest[*keep])) keep = h;
        }
        for (core::ClassIndex h : heads) {
            (keep && *keep == h ? decision.retained_heads : decision.inpaint_targets).insert(h);
        }
    }
    return decision;
}

}  // namespace tailaug::lkg
