#include "perfguard/apu.hpp"

#include <algorithm>
#include <ostream>

namespace perfguard {

void UpdateConfig::validate() const {
    if (top_m < 1) throw InvalidSpec("update config: m must be >= 1");
    if (random_n < 0) throw InvalidSpec("update config: n must be >= 0");
    // a ranking over a single tool carries no signal
    if (top_m + random_n < 2) throw InvalidSpec("update config: m + n must be >= 2");
    if (!(eta > 0.0)) throw InvalidSpec("update config: eta must be positive");
}

std::vector<ToolId> CandidateSet::all() const {
    std::vector<ToolId> out;
    out.reserve(size());
    out.insert(out.end(), exploit.begin(), exploit.end());
    out.insert(out.end(), explore.begin(), explore.end());
    return out;
}

double DirectionCoefficient::of(const ToolId& id) const {
    for (const auto& [tool, value] : per_tool)
        if (tool == id) return value;
    throw UnknownTool("no direction coefficient for tool: " + id.value);
}

double DirectionCoefficient::sum() const {
    double total = 0.0;
    for (const auto& [tool, value] : per_tool) total += value;
    return total;
}

CandidateSet select_candidates(const SuitabilityScores& scores, const UpdateConfig& cfg,
                               SeededRng& rng) {
    cfg.validate();
    const Ranking ranking = rank(scores);
    const std::size_t l = ranking.size();
    const std::size_t m_eff = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_m), l);

    CandidateSet set;
    set.exploit.assign(ranking.ordered().begin(), ranking.ordered().begin() + m_eff);

    const std::size_t remainder = l - m_eff;
    const std::size_t n_eff = std::min<std::size_t>(static_cast<std::size_t>(cfg.random_n),
                                                    remainder);
    if (n_eff > 0) {
        const auto picks = rng.pick_distinct(remainder, n_eff);
        for (std::size_t p : picks) set.explore.push_back(ranking.ordered()[m_eff + p]);
    }
    return set;
}

Ranking theory_ranking(const SuitabilityScores& scores, const CandidateSet& candidates) {
    const Ranking full = rank(scores);
    const auto member = candidates.all();
    std::vector<ToolId> ordered;
    ordered.reserve(member.size());
    for (const auto& tool : full.ordered()) {
        if (std::find(member.begin(), member.end(), tool) != member.end())
            ordered.push_back(tool);
    }
    if (ordered.size() != member.size())
        throw RankingMismatch("candidate set contains tools outside the scored registry");
    return Ranking(std::move(ordered));
}

DirectionCoefficient direction(const Ranking& theory, const Ranking& actual) {
    if (theory.size() != actual.size())
        throw RankingMismatch("theory and actual rankings have different sizes");
    for (const auto& tool : theory.ordered()) {
        if (!actual.contains(tool))
            throw RankingMismatch("rankings cover different tool sets: " + tool.value);
    }
    const double c = static_cast<double>(theory.size());
    DirectionCoefficient delta;
    delta.per_tool.reserve(theory.size());
    for (const auto& tool : theory.ordered()) {
        const double diff = static_cast<double>(theory.rank_of(tool)) -
                            static_cast<double>(actual.rank_of(tool));
        delta.per_tool.emplace_back(tool, diff / c);
    }
    return delta;
}

PerformanceMatrix apply_update(const PerformanceMatrix& matrix, const PreferenceWeights& weights,
                               const DirectionCoefficient& delta, const UpdateConfig& cfg) {
    if (weights.dims != matrix.dims())
        throw DimensionMismatch("preference dimensions do not match the matrix");
    const std::size_t d = matrix.dim_count();
    const std::size_t l = matrix.tool_count();
    std::vector<double> scores(matrix.raw().begin(), matrix.raw().end());
    for (const auto& [tool, dj] : delta.per_tool) {
        const std::size_t col = matrix.require_index(tool);
        if (dj == 0.0) continue;
        for (std::size_t i = 0; i < d; ++i) {
            const double bump = weights.w[i] * cfg.eta * dj;
            if (bump == 0.0) continue; // keep untouched entries bit-identical
            scores[i * l + col] = std::max(0.0, scores[i * l + col] + bump);
        }
    }
    PerformanceMatrix updated(matrix.dims(), matrix.tools(), std::move(scores));
    if (cfg.renormalize_raw) return normalize(updated).matrix;
    return updated;
}

nlohmann::ordered_json trace_record_to_json(const UpdateTraceRecord& record) {
    auto ids = [](const std::vector<ToolId>& tools) {
        std::vector<std::string> out;
        out.reserve(tools.size());
        for (const auto& t : tools) out.push_back(t.value);
        return out;
    };
    nlohmann::ordered_json doc;
    doc["step"] = record.step;
    doc["candidates"] = ids(record.candidates);
    doc["theory_ranking"] = ids(record.theory);
    doc["actual_ranking"] = ids(record.actual);
    nlohmann::ordered_json delta;
    for (const auto& [tool, value] : record.delta) delta[tool.value] = value;
    doc["delta"] = std::move(delta);
    doc["eta"] = record.eta;
    doc["selected_tool"] = record.selected_tool.value;
    doc["oracle_best"] = record.oracle_best.value;
    doc["error_flag"] = record.error_flag;
    return doc;
}

void write_trace_line(std::ostream& out, const UpdateTraceRecord& record) {
    out << trace_record_to_json(record).dump() << '\n';
}

} // namespace perfguard
