#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tailaug/core/types.hpp"
#include "tailaug/stats.hpp"

namespace tailaug::lkg {

using ClassPair = std::pair<core::ClassIndex, core::ClassIndex>;
/// Score in [0,1] per (head, tail) pair.
using PairScores = std::map<ClassPair, double>;

enum class MatrixProvenance { llm_cache, hand_authored, synthetic_ground_truth };

std::string to_string(MatrixProvenance p);
MatrixProvenance matrix_provenance_from_string(const std::string& text);

/// Symmetric K x K spatial-entanglement likelihoods. The diagonal is ignored.
struct EntanglementMatrix {
    core::ClassRegistry registry;
    std::vector<double> scores;  // row-major K x K
    MatrixProvenance provenance = MatrixProvenance::hand_authored;

    static EntanglementMatrix zeros(const core::ClassRegistry& registry, MatrixProvenance provenance);

    double at(core::ClassIndex a, core::ClassIndex b) const {
        return scores[static_cast<std::size_t>(a) * registry.size() + static_cast<std::size_t>(b)];
    }
    /// Sets both (a,b) and (b,a).
    void set(core::ClassIndex a, core::ClassIndex b, double value);
    /// Throws ValidationError on asymmetry, out-of-range values or a size mismatch.
    void validate() const;

    /// File layout: {"classes": [...], "scores": [[...]...], "provenance": "..."}.
    /// Rows are re-ordered to `registry` by name.
    static EntanglementMatrix load(const std::filesystem::path& path, const core::ClassRegistry& registry);
    void save(const std::filesystem::path& path) const;
};

class KnowledgeBackend {
public:
    virtual ~KnowledgeBackend() = default;
    virtual PairScores query(const std::vector<ClassPair>& pairs) = 0;
    virtual std::string name() const = 0;
};

/// Table lookup; pure and deterministic.
class MatrixBackend final : public KnowledgeBackend {
public:
    explicit MatrixBackend(EntanglementMatrix matrix);
    PairScores query(const std::vector<ClassPair>& pairs) override;
    std::string name() const override { return "matrix:" + to_string(matrix_.provenance); }
    const EntanglementMatrix& matrix() const { return matrix_; }

private:
    EntanglementMatrix matrix_;
};

/// Uses `primary` and switches to `fallback` when the primary raises BackendError.
class FallbackBackend final : public KnowledgeBackend {
public:
    FallbackBackend(KnowledgeBackend& primary, KnowledgeBackend& fallback) : primary_(primary), fallback_(fallback) {}
    PairScores query(const std::vector<ClassPair>& pairs) override;
    std::string name() const override { return primary_.name() + "|fallback:" + fallback_.name(); }
    bool fell_back() const { return fell_back_; }

private:
    KnowledgeBackend& primary_;
    KnowledgeBackend& fallback_;
    bool fell_back_ = false;
};

/// Scores for every (head, tail) pair in heads x tails.
PairScores query_entanglement(KnowledgeBackend& backend, const core::ClassSet& heads, const core::ClassSet& tails,
                              const core::ClassRegistry& registry);

enum class RetentionMode {
    /// Retain every present head whose strongest present-tail score clears the threshold.
    all_above_threshold,
    /// Retain at most one head: the one with the strongest score, if it clears the threshold.
    strongest_only,
};

struct EntanglementDecision {
    core::ClassSet inpaint_targets;
    core::ClassSet retained_heads;
    /// The pair scores consulted.
    PairScores rationale;
};

/// Decides which present head classes are safe to inpaint away.
/// No present tail: every present head is a target. No present head: nothing to do.
EntanglementDecision select_inpaint_targets(const core::LabelVector& labels, const stats::HeadTailPartition& partition,
                                            const PairScores& scores, double entangle_threshold,
                                            RetentionMode mode = RetentionMode::all_above_threshold);

}  // namespace tailaug::lkg
