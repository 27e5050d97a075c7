#include "coordfree/set_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace coordfree {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::string set_to_json(const StateSet& set, const UniformGrid& grid) {
  if (set.universe() != grid.size()) throw DomainError("set is not over the given grid");
  json j;
  j["format"] = "coordfree-set";
  j["version"] = 1;
  j["codec"] = "mixed radix, dimension 0 least significant";
  j["grid"] = {{"lower", grid.lower()}, {"upper", grid.upper()}, {"eta", grid.eta()}, {"counts", grid.counts()}};
  j["cell_count"] = grid.size();
  j["member_count"] = set.count();
  j["members"] = set.members();
  return j.dump() + "\n";
}

std::string set_to_csv(const StateSet& set, const UniformGrid& grid) {
  if (set.universe() != grid.size()) throw DomainError("set is not over the given grid");
  std::string out = "index";
  for (std::size_t d = 0; d < grid.dim(); ++d) out += ",x" + std::to_string(d);
  out += "\n";
  char buf[32];
  set.for_each([&](std::size_t x) {
    out += std::to_string(x);
    const Vector p = grid.point_of(x);
    for (std::size_t d = 0; d < grid.dim(); ++d) {
      std::snprintf(buf, sizeof buf, ",%.10g", p(static_cast<Eigen::Index>(d)));
      out += buf;
    }
    out += "\n";
  });
  return out;
}

void export_set(const StateSet& set, const UniformGrid& grid, const std::filesystem::path& path, SetFormat format) {
  const std::string text = format == SetFormat::Json ? set_to_json(set, grid) : set_to_csv(set, grid);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

ImportedSet set_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    if (j.at("format") != "coordfree-set") throw ParseError("not a coordfree set file");
    const auto& g = j.at("grid");
    ImportedSet out{UniformGrid(g.at("lower").get<std::vector<double>>(), g.at("upper").get<std::vector<double>>(),
                                g.at("eta").get<std::vector<double>>()),
                    {}};
    if (out.grid.counts() != g.at("counts").get<std::vector<std::size_t>>())
      throw ParseError("set file grid counts are inconsistent with its bounds");
    out.set = StateSet(out.grid.size());
    for (const auto& m : j.at("members")) {
      const auto x = m.get<std::size_t>();
      if (x >= out.grid.size()) throw ParseError("set member " + std::to_string(x) + " outside the grid");
      out.set.insert(x);
    }
    return out;
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed set file: ") + e.what());
  }
}

StateSet set_from_csv(const std::string& text, const UniformGrid& grid) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("index", 0) != 0) throw ParseError("CSV set file lacks its header");
  StateSet s(grid.size());
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::size_t x = 0;
    try {
      x = std::stoull(line.substr(0, line.find(',')));
    } catch (const std::exception&) {
      throw ParseError("CSV set file row " + std::to_string(row) + ": bad index");
    }
    if (x >= grid.size()) throw ParseError("CSV set file row " + std::to_string(row) + ": index outside grid");
    s.insert(x);
  }
  return s;
}

ImportedSet import_set(const std::filesystem::path& path, const std::optional<UniformGrid>& grid) {
  const std::string text = read_file(path);
  if (!text.empty() && text.front() == '{') {
    auto out = set_from_json(text);
    if (grid && !(*grid == out.grid)) throw DomainError("set file grid differs from the expected grid");
    return out;
  }
  if (!grid) throw PreconditionError("importing a CSV set needs the grid");
  return {*grid, set_from_csv(text, *grid)};
}

}  // namespace coordfree
