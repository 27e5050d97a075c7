#pragma once

#include <filesystem>
#include <string>

#include "coordfree/coordination.hpp"
#include "coordfree/core_model.hpp"
#include "coordfree/digest.hpp"

namespace coordfree {

/// Version written into (and required from) every binary container.
inline constexpr std::uint32_t kArtifactVersion = 1;

struct SystemArtifact {
  std::string scenario_name;
  std::string scenario_digest;  ///< hex digest of the canonical scenario
  double tau = 0.0;
  TransitionSystem ts;
  StateSet safe;
  Partition partition;  ///< scenario default
  Digest content_hash{};  ///< filled in by write/read
};

struct ControllerArtifact {
  Digest system_hash{};
  Controller controller;
  Digest content_hash{};
};

struct LayersArtifact {
  Digest system_hash{};
  Digest controller_hash{};
  Partition partition;
  double tau = 0.0;
  UniformGrid grid;
  LayerMap layers;
  Digest content_hash{};
};

/// Writers return the content hash stored in the file trailer.
Digest write_system(const std::filesystem::path& path, const SystemArtifact& a);
Digest write_controller(const std::filesystem::path& path, const ControllerArtifact& a);
Digest write_layers(const std::filesystem::path& path, const LayersArtifact& a);

/// Readers throw ParseError on a bad magic, version, truncation or hash.
SystemArtifact read_system(const std::filesystem::path& path);
ControllerArtifact read_controller(const std::filesystem::path& path);
LayersArtifact read_layers(const std::filesystem::path& path);

/// Five-byte magic of a container file ("CFSYS", "CFCTL", "CFLAY"), or empty.
std::string artifact_kind(const std::filesystem::path& path);

/// PreconditionError unless `actual` is the hash an artifact was derived from.
void require_derived_from(const Digest& recorded, const Digest& actual, const std::string& what);

}  // namespace coordfree
