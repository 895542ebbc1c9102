#pragma once

#include <filesystem>
#include <iosfwd>

#include "glimg/engine.hpp"

namespace glimg {

/// Current model container version.
inline constexpr std::uint32_t kModelVersion = 1;

/// Versioned little-endian binary container:
///   magic "GLIMGMDL", u32 version,
///   hyperparameter block, item/user id maps, training history,
///   cluster assignment + centroids, global graph,
///   per cluster: id, operator kind, D, S, operator (row-major f64).
/// Saving the same model twice yields identical bytes.
void save_model(const GlimgModel& model, std::ostream& out);
void save_model(const GlimgModel& model, const std::filesystem::path& path);

/// Throws ModelVersionError on a bad magic or version, CorruptModelError on a
/// truncated or inconsistent file, IoError when the file cannot be opened.
GlimgModel load_model(std::istream& in);
GlimgModel load_model(const std::filesystem::path& path);

}  // namespace glimg
