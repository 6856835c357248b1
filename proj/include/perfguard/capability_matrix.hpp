#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "perfguard/errors.hpp"

namespace perfguard {

enum class DimensionCategory { generation, editing, custom };

std::string_view to_string(DimensionCategory category);
DimensionCategory category_from_string(std::string_view name);

/// Ordered set of capability dimension labels. The generation and editing
/// categories carry fixed canonical label sets; custom accepts any unique,
/// non-empty labels.
struct DimensionSet {
    DimensionCategory category = DimensionCategory::custom;
    std::vector<std::string> names;

    static const std::vector<std::string>& generation_labels();
    static const std::vector<std::string>& editing_labels();

    static DimensionSet generation();
    static DimensionSet editing();
    static DimensionSet custom(std::vector<std::string> names);

    /// Validates labels against the category; throws SchemaMismatch.
    static DimensionSet make(DimensionCategory category, std::vector<std::string> names);

    std::size_t size() const { return names.size(); }
    bool operator==(const DimensionSet&) const = default;
};

struct ToolId {
    std::string value;
    auto operator<=>(const ToolId&) const = default;
};

struct ToolInfo {
    ToolId id;
    std::string description;
};

/// Capability score matrix: rows are dimensions, columns are tools. Holds raw
/// (unnormalized) scores; normalization is always computed on read so repeated
/// updates never compound rounding. Immutable value type: every operation
/// returns a new matrix.
///
/// Suitability scoring multiplies a 1xd weight row into the normalized dxl
/// matrix directly (no transpose), which is the only shape-consistent reading
/// and yields the documented 1xl score row.
class PerformanceMatrix {
public:
    PerformanceMatrix(DimensionSet dims, std::vector<ToolInfo> tools,
                      std::vector<double> scores);

    const DimensionSet& dims() const { return dims_; }
    std::size_t dim_count() const { return dims_.size(); }
    std::size_t tool_count() const { return tools_.size(); }
    const std::vector<ToolInfo>& tools() const { return tools_; }
    std::vector<ToolId> tool_ids() const;

    double at(std::size_t dim, std::size_t tool) const {
        return scores_[dim * tool_count() + tool];
    }
    std::span<const double> raw() const { return scores_; }
    std::vector<double> column(std::size_t tool) const;

    std::optional<std::size_t> index_of(const ToolId& id) const;
    /// Column index for a known tool; throws UnknownTool.
    std::size_t require_index(const ToolId& id) const;

    /// Rows whose scores are all zero (no tool has any capability there).
    std::vector<std::size_t> degenerate_dims() const;

    bool operator==(const PerformanceMatrix& other) const;

private:
    DimensionSet dims_;
    std::vector<ToolInfo> tools_;
    std::vector<double> scores_; // row-major, dim_count x tool_count
    std::unordered_map<std::string, std::size_t> index_;
};

struct NormalizeOutcome {
    PerformanceMatrix matrix;
    std::vector<std::size_t> degenerate_dims; // all-zero rows, returned unchanged
};

/// Divides each dimension row by its max so every entry lands in [0,1] and the
/// per-row max is exactly 1. All-zero rows are left as-is and flagged.
/// Idempotent and order-preserving within each row.
NormalizeOutcome normalize(const PerformanceMatrix& matrix);

/// Appends a column for a new tool, initialized to the element-wise mean of
/// the peer columns (raw scores). Existing columns are copied bit-identically.
PerformanceMatrix init_new_tool(const PerformanceMatrix& matrix, const ToolInfo& new_tool,
                                const std::vector<ToolId>& peers);

// Registry persistence. JSON schema:
//   { "category": "generation"|"editing"|"custom",
//     "dimensions": [string...],
//     "tools": [ { "id": string, "description": string, "scores": [number...] } ] }
// Each tool's scores are listed in dimension order.
PerformanceMatrix registry_from_json(const nlohmann::json& doc);
nlohmann::ordered_json registry_to_json(const PerformanceMatrix& matrix);
PerformanceMatrix load_registry(const std::filesystem::path& path);
void save_registry(const PerformanceMatrix& matrix, const std::filesystem::path& path);

/// CSV mirror: header row of dimension names, one row per tool.
std::string registry_to_csv(const PerformanceMatrix& matrix);

} // namespace perfguard
