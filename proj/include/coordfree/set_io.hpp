#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "coordfree/core_model.hpp"

namespace coordfree {

enum class SetFormat { Json, Csv };

/// Header (grid bounds, steps, counts, codec) and the sorted member indices.
std::string set_to_json(const StateSet& set, const UniformGrid& grid);
/// One row per member: index, then the cell centre coordinates.
std::string set_to_csv(const StateSet& set, const UniformGrid& grid);

void export_set(const StateSet& set, const UniformGrid& grid, const std::filesystem::path& path, SetFormat format);

struct ImportedSet {
  UniformGrid grid;
  StateSet set;
};

ImportedSet set_from_json(const std::string& text);
/// CSV carries no header grid, so the grid must be supplied.
StateSet set_from_csv(const std::string& text, const UniformGrid& grid);
ImportedSet import_set(const std::filesystem::path& path, const std::optional<UniformGrid>& grid = std::nullopt);

}  // namespace coordfree
