#pragma once

#include "derivkit/kernel.hpp"
#include "derivkit/numcheck.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>

namespace derivkit {

struct RunResult {
    CheckReport report;
    std::optional<NumericSummary> numeric;
};

nlohmann::json to_json(const RunResult& r);
// Inverse of to_json for the keys the schema carries.
RunResult run_result_from_json(const nlohmann::json& j);

// Exit codes: 0 all accepted (and numeric checks passed), 1 any failure,
// 2 usage or IO error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace derivkit
