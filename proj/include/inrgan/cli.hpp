#pragma once

#include "inrgan/config.hpp"
#include "inrgan/coords.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace inrgan {

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitRuntime = 3, kExitIo = 4 };

/// Entry point of the `inrgan` executable. Errors are reported on `err` as
/// one line: `inrgan: error code=<n> type=<kind> message="<text>"`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Resolved configuration: defaults, then the file, then INRGAN_*
/// environment overrides, then an explicit seed.
RunConfig resolve_config(const std::optional<std::string>& path, std::optional<std::uint64_t> seed);

Extent parse_extent(const std::string& text);

}  // namespace inrgan
