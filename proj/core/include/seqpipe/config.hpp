#pragma once

#include <filesystem>

#include "seqpipe/registry.hpp"

namespace seqpipe {

// Loads task and mixture definitions from a JSON config file (the format is
// documented in the repository README). Relative source locations and
// vocabulary paths are resolved against the config file's directory.
Registry load_registry(const std::filesystem::path& config_path);

} // namespace seqpipe
