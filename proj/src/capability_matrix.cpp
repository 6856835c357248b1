#include "perfguard/capability_matrix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "perfguard/text.hpp"

namespace perfguard {

std::string_view to_string(DimensionCategory category) {
    switch (category) {
    case DimensionCategory::generation: return "generation";
    case DimensionCategory::editing: return "editing";
    case DimensionCategory::custom: return "custom";
    }
    return "custom";
}

DimensionCategory category_from_string(std::string_view name) {
    if (name == "generation") return DimensionCategory::generation;
    if (name == "editing") return DimensionCategory::editing;
    if (name == "custom") return DimensionCategory::custom;
    throw SchemaMismatch("unknown dimension category: " + std::string(name));
}

const std::vector<std::string>& DimensionSet::generation_labels() {
    static const std::vector<std::string> labels = {
        "color", "shape", "texture", "2D-spatial", "3D-spatial", "numeracy", "non-spatial"};
    return labels;
}

const std::vector<std::string>& DimensionSet::editing_labels() {
    static const std::vector<std::string> labels = {
        "addition",      "removement",     "replacement",      "attribute-alter",
        "motion-change", "style-transfer", "background-change"};
    return labels;
}

DimensionSet DimensionSet::generation() {
    return DimensionSet{DimensionCategory::generation, generation_labels()};
}

DimensionSet DimensionSet::editing() {
    return DimensionSet{DimensionCategory::editing, editing_labels()};
}

DimensionSet DimensionSet::custom(std::vector<std::string> names) {
    return make(DimensionCategory::custom, std::move(names));
}

DimensionSet DimensionSet::make(DimensionCategory category, std::vector<std::string> names) {
    if (names.empty()) throw SchemaMismatch("dimension set must have at least one label");
    std::set<std::string> unique;
    for (const auto& name : names) {
        if (name.empty()) throw SchemaMismatch("dimension labels must be non-empty");
        if (!unique.insert(name).second)
            throw SchemaMismatch("duplicate dimension label: " + name);
    }
    if (category != DimensionCategory::custom) {
        const auto& canonical = category == DimensionCategory::generation ? generation_labels()
                                                                          : editing_labels();
        const std::set<std::string> expected(canonical.begin(), canonical.end());
        if (unique != expected) {
            std::string offender;
            for (const auto& name : names)
                if (!expected.count(name)) { offender = name; break; }
            if (offender.empty()) offender = "(missing labels)";
            throw SchemaMismatch("dimension label '" + offender + "' is not part of the " +
                                 std::string(to_string(category)) + " label set");
        }
    }
    return DimensionSet{category, std::move(names)};
}

PerformanceMatrix::PerformanceMatrix(DimensionSet dims, std::vector<ToolInfo> tools,
                                     std::vector<double> scores)
    : dims_(std::move(dims)), tools_(std::move(tools)), scores_(std::move(scores)) {
    if (scores_.size() != dims_.size() * tools_.size())
        throw ShapeMismatch("score buffer does not match dims x tools");
    for (double v : scores_) {
        if (!std::isfinite(v) || v < 0.0)
            throw SchemaMismatch("capability scores must be finite and nonnegative");
    }
    for (std::size_t j = 0; j < tools_.size(); ++j) {
        if (tools_[j].id.value.empty()) throw SchemaMismatch("tool id must be non-empty");
        if (!index_.emplace(tools_[j].id.value, j).second)
            throw DuplicateTool("duplicate tool id: " + tools_[j].id.value);
    }
}

std::vector<ToolId> PerformanceMatrix::tool_ids() const {
    std::vector<ToolId> ids;
    ids.reserve(tools_.size());
    for (const auto& t : tools_) ids.push_back(t.id);
    return ids;
}

std::vector<double> PerformanceMatrix::column(std::size_t tool) const {
    std::vector<double> col(dim_count());
    for (std::size_t i = 0; i < dim_count(); ++i) col[i] = at(i, tool);
    return col;
}

std::optional<std::size_t> PerformanceMatrix::index_of(const ToolId& id) const {
    auto it = index_.find(id.value);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t PerformanceMatrix::require_index(const ToolId& id) const {
    auto idx = index_of(id);
    if (!idx) throw UnknownTool("unknown tool id: " + id.value);
    return *idx;
}

std::vector<std::size_t> PerformanceMatrix::degenerate_dims() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < dim_count(); ++i) {
        bool all_zero = true;
        for (std::size_t j = 0; j < tool_count(); ++j) {
            if (at(i, j) > 0.0) { all_zero = false; break; }
        }
        if (all_zero) rows.push_back(i);
    }
    return rows;
}

bool PerformanceMatrix::operator==(const PerformanceMatrix& other) const {
    if (dims_ != other.dims_ || scores_ != other.scores_) return false;
    if (tools_.size() != other.tools_.size()) return false;
    for (std::size_t j = 0; j < tools_.size(); ++j) {
        if (tools_[j].id != other.tools_[j].id ||
            tools_[j].description != other.tools_[j].description)
            return false;
    }
    return true;
}

NormalizeOutcome normalize(const PerformanceMatrix& matrix) {
    const std::size_t d = matrix.dim_count();
    const std::size_t l = matrix.tool_count();
    std::vector<double> out(matrix.raw().begin(), matrix.raw().end());
    std::vector<std::size_t> degenerate;
    for (std::size_t i = 0; i < d; ++i) {
        double row_max = 0.0;
        for (std::size_t j = 0; j < l; ++j) row_max = std::max(row_max, out[i * l + j]);
        if (row_max <= 0.0) {
            degenerate.push_back(i);
            continue; // all-zero row stays as-is
        }
        for (std::size_t j = 0; j < l; ++j) {
            // dividing an entry equal to the max yields exactly 1.0, which
            // also makes the operation idempotent
            out[i * l + j] = out[i * l + j] / row_max;
        }
    }
    return NormalizeOutcome{PerformanceMatrix(matrix.dims(), matrix.tools(), std::move(out)),
                            std::move(degenerate)};
}

PerformanceMatrix init_new_tool(const PerformanceMatrix& matrix, const ToolInfo& new_tool,
                                const std::vector<ToolId>& peers) {
    if (peers.empty()) throw UnknownPeer("peer list must not be empty");
    if (matrix.index_of(new_tool.id))
        throw DuplicateTool("tool already registered: " + new_tool.id.value);
    std::vector<std::size_t> peer_cols;
    peer_cols.reserve(peers.size());
    for (const auto& peer : peers) {
        auto idx = matrix.index_of(peer);
        if (!idx) throw UnknownPeer("unknown peer tool: " + peer.value);
        peer_cols.push_back(*idx);
    }

    const std::size_t d = matrix.dim_count();
    const std::size_t l = matrix.tool_count();
    std::vector<double> scores(d * (l + 1));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < l; ++j) scores[i * (l + 1) + j] = matrix.at(i, j);
        double sum = 0.0;
        for (std::size_t col : peer_cols) sum += matrix.at(i, col);
        scores[i * (l + 1) + l] = sum / static_cast<double>(peer_cols.size());
    }
    auto tools = matrix.tools();
    tools.push_back(new_tool);
    return PerformanceMatrix(matrix.dims(), std::move(tools), std::move(scores));
}

PerformanceMatrix registry_from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ParseError("registry root must be a JSON object");
    for (const char* key : {"category", "dimensions", "tools"}) {
        if (!doc.contains(key))
            throw ParseError(std::string("registry is missing field '") + key + "'");
    }
    if (!doc["dimensions"].is_array()) throw ParseError("field 'dimensions' must be an array");
    if (!doc["tools"].is_array()) throw ParseError("field 'tools' must be an array");

    const auto category = category_from_string(doc["category"].get<std::string>());
    auto dims = DimensionSet::make(category, doc["dimensions"].get<std::vector<std::string>>());

    std::vector<ToolInfo> tools;
    std::vector<std::vector<double>> per_tool_scores;
    for (const auto& entry : doc["tools"]) {
        if (!entry.is_object() || !entry.contains("id") || !entry.contains("scores"))
            throw ParseError("each tool entry needs 'id' and 'scores'");
        ToolInfo info;
        info.id.value = entry["id"].get<std::string>();
        info.description = entry.value("description", std::string{});
        auto scores = entry["scores"].get<std::vector<double>>();
        if (scores.size() != dims.size())
            throw SchemaMismatch("tool '" + info.id.value + "' has " +
                                 std::to_string(scores.size()) + " scores, expected " +
                                 std::to_string(dims.size()));
        tools.push_back(std::move(info));
        per_tool_scores.push_back(std::move(scores));
    }
    if (tools.empty()) throw SchemaMismatch("registry must contain at least one tool");

    const std::size_t d = dims.size();
    const std::size_t l = tools.size();
    std::vector<double> scores(d * l);
    for (std::size_t j = 0; j < l; ++j)
        for (std::size_t i = 0; i < d; ++i) scores[i * l + j] = per_tool_scores[j][i];
    return PerformanceMatrix(std::move(dims), std::move(tools), std::move(scores));
}

nlohmann::ordered_json registry_to_json(const PerformanceMatrix& matrix) {
    nlohmann::ordered_json doc;
    doc["category"] = std::string(to_string(matrix.dims().category));
    doc["dimensions"] = matrix.dims().names;
    doc["tools"] = nlohmann::ordered_json::array();
    for (std::size_t j = 0; j < matrix.tool_count(); ++j) {
        nlohmann::ordered_json entry;
        entry["id"] = matrix.tools()[j].id.value;
        entry["description"] = matrix.tools()[j].description;
        entry["scores"] = matrix.column(j);
        doc["tools"].push_back(std::move(entry));
    }
    return doc;
}

PerformanceMatrix load_registry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open registry file: " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("registry " + path.string() + ": " + e.what());
    }
    return registry_from_json(doc);
}

void save_registry(const PerformanceMatrix& matrix, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write registry file: " + path.string());
    out << registry_to_json(matrix).dump(2) << '\n';
}

std::string registry_to_csv(const PerformanceMatrix& matrix) {
    std::ostringstream out;
    out << "tool";
    for (const auto& name : matrix.dims().names) out << ',' << name;
    out << '\n';
    for (std::size_t j = 0; j < matrix.tool_count(); ++j) {
        out << matrix.tools()[j].id.value;
        for (std::size_t i = 0; i < matrix.dim_count(); ++i)
            out << ',' << format_double(matrix.at(i, j));
        out << '\n';
    }
    return out.str();
}

} // namespace perfguard
