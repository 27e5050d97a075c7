#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coordfree/coordination.hpp"
#include "coordfree/trace_io.hpp"

namespace coordfree {

/// Two free dimensions and one value per remaining dimension.
struct SliceSpec {
  std::size_t dim_x = 0, dim_y = 1;
  std::vector<std::pair<std::size_t, double>> fixed;
};

/// "0,1" and "2=0.5,3=2.8" (either may be empty for fixed).
SliceSpec parse_slice(std::string_view dims, std::string_view fixed);

/// Cells of a slice, row-major from the bottom row; throws DomainError when
/// the slice does not fit the grid or a fixed value is off the grid.
struct SliceCells {
  std::size_t nx = 0, ny = 0;
  std::vector<StateIndex> cells;
};
SliceCells slice_cells(const UniformGrid& grid, const SliceSpec& slice);

/// Fill of cells counted as "inside" (T(F), or S_d in depth mode).
inline constexpr std::string_view kInsideFill = "#ffffff";
inline constexpr std::string_view kOutsideFill = "#404040";

struct RenderOptions {
  /// Colour by chain membership relative to S_depth instead of by layer.
  std::optional<std::size_t> depth;
  std::size_t canvas_px = 600;
};

std::string render_layers_svg(const UniformGrid& grid, const LayerMap& layers, double tau, const SliceSpec& slice,
                              const RenderOptions& options = {});

/// Trajectory of one run projected onto the slice dimensions, plus its
/// countdown over time.
std::string render_trace_svg(const TraceFile& traces, const SliceSpec& slice, std::size_t run = 0);

}  // namespace coordfree
