#pragma once

// Scene documents: JSON parsing with full validation, defaults, canonical form and
// content hashing.

#include "nanowb/analysis.hpp"
#include "nanowb/lattice.hpp"
#include "nanowb/mechcore.hpp"
#include "nanowb/solver.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace nanowb {

using Json = nlohmann::json;

inline constexpr int kSceneVersion = 1;

enum class SceneKind { meso_simulation, lattice_composite };

struct GridSpec {
  int nx = 150;
  int ny = 175;
  double width = 27.0;
  double height = 31.4;
};

struct GrainSpec {
  int count = 120;
  double delta = 0.3;
  std::uint64_t seed = 1;
  int relax_iters = 5;
};

struct MesoScene {
  std::string material;
  GridSpec grid;
  GrainSpec grains;
  Schedule schedule;
};

struct CompositeScene {
  LatticeSpec matrix;
  std::vector<ParticleSpec> particles;
  std::vector<std::string> placement_names;  // particle name per placement
  std::vector<Placement> placements;
  double clearance = 2.0;
  std::size_t max_atoms = 1000000;
};

struct OutputSpec {
  std::vector<std::string> fields = {"eq_plastic", "von_mises", "pressure"};
  bool recovered_stress = false;
  bool png = false;
  BandOptions bands;
};

struct SceneSpec {
  int scene_version = kSceneVersion;
  SceneKind kind = SceneKind::meso_simulation;
  std::vector<MaterialModel> materials;
  std::optional<MesoScene> meso;
  std::optional<CompositeScene> lattice;
  OutputSpec outputs;

  const MaterialModel& material(const std::string& name) const;
};

/// Parses and cross-validates a scene. Every problem is reported (JSON-pointer path
/// plus message) in one ValidationError; unknown fields are errors.
SceneSpec parse_scene(const Json& doc);
SceneSpec parse_scene_text(const std::string& text);
SceneSpec load_scene(const std::string& path);

/// Normalized document with every default filled in (keys sorted).
Json scene_to_json(const SceneSpec& scene);
/// Compact canonical serialization used for hashing.
std::string canonical_scene(const SceneSpec& scene);
/// Content hash of the canonical scene: 16 lowercase hex digits of its SHA-256.
std::string scene_id(const SceneSpec& scene);
std::string sha256_hex(const std::string& data);

/// Standalone lattice / particle specs (CLI `lattice build`, preview endpoint).
LatticeSpec parse_lattice_spec(const Json& doc);
ParticleSpec parse_particle_spec(const Json& doc);
Json lattice_to_json(const LatticeSpec& spec);

std::string to_string(SceneKind kind);
std::string to_string(StressMode mode);
std::string to_string(LoadType type);

SimulationSetup make_setup(const SceneSpec& scene);
GrainMap make_grains(const MesoScene& meso, const Grid2D& grid);

}  // namespace nanowb
