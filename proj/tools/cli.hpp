#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cpkl::cli {

inline constexpr const char* kVersion = "cpkl 1.0.0";

enum ExitCode : int { kOk = 0, kNotConverged = 1, kUsage = 2 };

/// Entry point shared by the executable and the tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// 64-bit FNV-1a of the compact JSON dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

}  // namespace cpkl::cli
