#pragma once

// Command-line front end: generate, run, train, eval, serve, replay.

#include <iosfwd>
#include <string>
#include <vector>

#include "scenesearch/harness.hpp"

namespace scenesearch {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// `args[0]` is the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Step table for one episode.
std::string render_step_table(const EpisodeRecord& record);
/// Top-down map of the house with the walked path drawn over it.
std::string render_ascii_trace(const EpisodeRecord& record, const HouseSpec& house, const NavGraph& nav);
std::string render_svg_trace(const EpisodeRecord& record, const HouseSpec& house, const NavGraph& nav);

}  // namespace scenesearch
